//! Alternating successive-convex-approximation planner.

pub mod association;
pub mod benchmark;
pub mod feasibility;
pub mod model;
pub mod plan;
pub mod solve;
pub mod time_alloc;
pub mod trajectory;

pub use model::LinkModel;
pub use plan::{evaluate, Plan, PlanEval};
pub use solve::{optimize, optimize_with, PlannerError, PlannerOptions, SolveTrace, TraceRow};
