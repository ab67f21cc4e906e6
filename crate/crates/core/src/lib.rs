//! Simulation and planning engine for a UAV that senses, charges, collects
//! data from and backhauls data for a field of moored buoys.

pub mod channel;
pub mod convex_kernel;
pub mod metrics;
pub mod planner;
pub mod scalar;
pub mod scenario;
pub mod verify;

pub use scalar::Scalar;
pub use scenario::{default_scenario, parallel_rows_scenario, ScenarioConfig};

/// Double-precision link geometry, the type every planner path uses.
pub type LinkGeometry = channel::LinkGeometry<f64>;
pub type LinkGeometryF32 = channel::LinkGeometry<f32>;
pub type RfModel = metrics::RfModel<f64>;
pub type RfModelF32 = metrics::RfModel<f32>;
pub type GainBundle = metrics::GainBundle<f64>;
