//! Outer alternation between the association/trajectory/power block and the
//! stage-share block, with the inner penalized loop and its trace.

use std::time::Instant;

use serde::Serialize;

use super::association::{alpha_step, init_association_time, TooManyBuoys};
use super::benchmark::{hover_path, hover_points};
use super::feasibility::{feasibility_init, FeasibilityCertificate};
use super::model::LinkModel;
use super::plan::{evaluate, Plan, PlanEval};
use super::time_alloc::{refine_time_power, time_allocation_lp};
use super::trajectory::{trajectory_step, TrustRegion, FEAS_TOL};
use crate::convex_kernel::SolverError;
use crate::metrics::{evaluate_report, MetricReport};
use crate::scenario::{DecisionState, ScenarioConfig, ScenarioError};

#[derive(Debug, thiserror::Error)]
pub enum PlannerError {
    #[error("invalid scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    TooManyBuoys(#[from] TooManyBuoys),
    #[error("no feasible starting point ({})", .0.reason)]
    Infeasible(FeasibilityCertificate),
    #[error("solver failure: {0}")]
    Solver(#[from] SolverError),
    #[error("metric evaluation failed: {0}")]
    Metrics(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerOptions {
    pub max_outer: usize,
    pub max_inner: usize,
    pub eta0: f64,
    pub eta_decay: f64,
    /// Relative objective change ending the outer loop.
    pub outer_tol: f64,
    /// Relative objective change ending the inner loop.
    pub inner_tol: f64,
    /// Penalty residual below which the association counts as binary.
    pub penalty_tol: f64,
    /// Keep every share at this split (no share optimization at all).
    pub frozen_gamma: Option<[f64; 4]>,
    /// Also try the hover-point start and keep the better feasible one.
    pub hover_start: bool,
}

impl Default for PlannerOptions {
    fn default() -> Self {
        Self {
            max_outer: 6,
            max_inner: 25,
            eta0: 1.0,
            eta_decay: 0.2,
            outer_tol: 1e-3,
            inner_tol: 1e-4,
            penalty_tol: 1e-6,
            frozen_gamma: None,
            hover_start: true,
        }
    }
}

/// One row of the iteration log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub outer: usize,
    pub inner: usize,
    /// `init`, `inner` or `shares`.
    pub phase: &'static str,
    /// Sum of all uplink rates.
    pub total_rate: f64,
    pub avg_rate: f64,
    pub eta: f64,
    pub penalty_residual: f64,
    pub trust: f64,
    pub viol_sensing: f64,
    pub viol_energy: f64,
    pub viol_rate: f64,
    pub viol_backhaul: f64,
    pub wall_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolveTrace {
    pub rows: Vec<TraceRow>,
    /// Which start was kept: `feasibility` or `hover`.
    pub start: String,
    pub feasibility_iterations: usize,
    pub outer_iterations: usize,
    pub converged: bool,
}

impl SolveTrace {
    /// Objective at the end of each outer iteration.
    pub fn outer_objectives(&self) -> Vec<f64> {
        self.rows.iter().filter(|r| r.phase == "shares").map(|r| r.avg_rate).collect()
    }
}

struct Clock {
    t0: Instant,
}

impl Clock {
    fn row(&self, outer: usize, inner: usize, phase: &'static str, ev: &PlanEval, eta: f64, pen: f64, trust: f64) -> TraceRow {
        let n = ev.rate.len() as f64;
        TraceRow {
            outer,
            inner,
            phase,
            total_rate: ev.objective * n,
            avg_rate: ev.objective,
            eta,
            penalty_residual: pen,
            trust,
            viol_sensing: ev.violation[0],
            viol_energy: ev.violation[1],
            viol_rate: ev.violation[2],
            viol_backhaul: ev.violation[3],
            wall_s: self.t0.elapsed().as_secs_f64(),
        }
    }
}

/// Runs the planner with default options.
pub fn optimize(cfg: &ScenarioConfig) -> Result<(DecisionState, MetricReport, SolveTrace), PlannerError> {
    optimize_with(cfg, &PlannerOptions::default())
}

pub fn optimize_with(
    cfg: &ScenarioConfig,
    opts: &PlannerOptions,
) -> Result<(DecisionState, MetricReport, SolveTrace), PlannerError> {
    cfg.validate()?;
    let model = LinkModel::new(cfg);
    let (plan, trace) = plan_with(&model, cfg, opts)?;
    let state = plan.to_state(cfg);
    let report = evaluate_report(cfg, &state).map_err(|e| PlannerError::Metrics(e.to_string()))?;
    Ok((state, report, trace))
}

/// Shares and power at the plan's positions: the exact LP followed by the
/// joint refinement. Keeps the incoming shares when neither helps.
pub fn allocate_shares(model: &LinkModel, cfg: &ScenarioConfig, plan: &mut Plan, enforce_c5: bool) -> Result<(), SolverError> {
    let before = evaluate(model, cfg, plan);
    if let Some(g) = time_allocation_lp(model, cfg, plan, enforce_c5)? {
        let mut cand = plan.clone();
        cand.gamma = g;
        let ev = evaluate(model, cfg, &cand);
        let no_worse = ev.violation.iter().zip(&before.violation).all(|(a, b)| *a <= b.max(FEAS_TOL));
        if no_worse && (ev.objective >= before.objective || !before.feasible(FEAS_TOL)) {
            *plan = cand;
        }
    }
    refine_time_power(model, cfg, plan, enforce_c5)?;
    Ok(())
}

/// Least-slack plan from the initial association when no feasible start
/// exists; used to report strategies that cannot meet the constraints.
pub fn least_slack_plan(model: &LinkModel, cfg: &ScenarioConfig, opts: &PlannerOptions) -> Result<Plan, PlannerError> {
    let tr = TrustRegion::new(model, cfg);
    let mut init = init_association_time(model, cfg)?;
    if let Some(g) = opts.frozen_gamma {
        init.gamma = vec![g; cfg.num_slots];
        set_max_power(model, cfg, &mut init);
    }
    let (mut plan, _, _) = make_feasible(model, cfg, init, &tr, opts.frozen_gamma.is_none())?;
    idle_slots_rest(&mut plan);
    Ok(plan)
}

/// Brings a plan to feasibility: slack minimization over trajectory and
/// power, alternating with share updates when the shares are free.
fn make_feasible(
    model: &LinkModel,
    cfg: &ScenarioConfig,
    plan: Plan,
    tr: &TrustRegion,
    shares_free: bool,
) -> Result<(Plan, usize, Result<(), FeasibilityCertificate>), SolverError> {
    let mut plan = plan;
    let mut iterations = 0;
    let rounds = if shares_free { 4 } else { 1 };
    let mut last = None;
    for round in 0..rounds {
        if evaluate(model, cfg, &plan).feasible(FEAS_TOL) {
            return Ok((plan, iterations, Ok(())));
        }
        let out = feasibility_init(model, cfg, &plan, tr)?;
        iterations += out.iterations;
        plan = out.plan;
        if out.feasible {
            return Ok((plan, iterations, Ok(())));
        }
        last = Some(out.slack);
        if shares_free && round + 1 < rounds {
            allocate_shares(model, cfg, &mut plan, false)?;
        }
    }
    let slack = last.expect("at least one round ran");
    Ok((
        plan,
        iterations,
        Err(FeasibilityCertificate {
            slack,
            iterations,
            reason: format!("slack minimization stalled at {:.3e}", slack.total()),
        }),
    ))
}

/// Hover-point start: full-speed legs between per-buoy hover points.
fn hover_start(model: &LinkModel, cfg: &ScenarioConfig, frozen: Option<[f64; 4]>) -> Result<Option<Plan>, SolverError> {
    let Some((pos, serve)) = hover_path(cfg, &hover_points(model, cfg)) else { return Ok(None) };
    let ns = cfg.num_slots;
    let mut plan = Plan { pos, serve, gamma: vec![frozen.unwrap_or([0.25; 4]); ns], power: vec![0.0; ns] };
    set_max_power(model, cfg, &mut plan);
    if frozen.is_none() {
        allocate_shares(model, cfg, &mut plan, true)?;
        set_max_power(model, cfg, &mut plan);
        allocate_shares(model, cfg, &mut plan, true)?;
    }
    Ok(Some(plan))
}

pub(crate) fn set_max_power(model: &LinkModel, cfg: &ScenarioConfig, plan: &mut Plan) {
    for n in 0..plan.num_slots() {
        if let Some(u) = plan.serve[n] {
            plan.power[n] = model.max_power(u, plan.pos[n], &cfg.buoy_position(u, n), &plan.gamma[n]);
        }
    }
}

/// Start selection followed by the alternating loop.
pub fn plan_with(model: &LinkModel, cfg: &ScenarioConfig, opts: &PlannerOptions) -> Result<(Plan, SolveTrace), PlannerError> {
    let clock = Clock { t0: Instant::now() };
    let tr = TrustRegion::new(model, cfg);
    let mut trace = SolveTrace::default();
    let shares_free = opts.frozen_gamma.is_none();

    let mut init = init_association_time(model, cfg)?;
    if let Some(g) = opts.frozen_gamma {
        init.gamma = vec![g; cfg.num_slots];
        set_max_power(model, cfg, &mut init);
    }
    let (from_init, iters, status) = make_feasible(model, cfg, init, &tr, shares_free)?;
    trace.feasibility_iterations = iters;
    let mut best: Option<(Plan, &str)> = status.is_ok().then(|| (from_init, "feasibility"));
    if opts.hover_start {
        if let Some(h) = hover_start(model, cfg, opts.frozen_gamma)? {
            let (h, _, ok) = make_feasible(model, cfg, h, &tr, shares_free)?;
            if ok.is_ok() {
                let better = best.as_ref().map_or(true, |(b, _)| evaluate(model, cfg, &h).objective > evaluate(model, cfg, b).objective);
                if better {
                    best = Some((h, "hover"));
                }
            }
        }
    }
    let (mut plan, start) = match (best, status) {
        (Some(b), _) => b,
        (None, Err(cert)) => return Err(PlannerError::Infeasible(cert)),
        (None, Ok(())) => unreachable!("a feasible start is always kept"),
    };
    trace.start = start.to_string();
    let mut ev = evaluate(model, cfg, &plan);
    trace.rows.push(clock.row(0, 0, "init", &ev, opts.eta0, f64::NAN, tr.theta0));

    let mut eta = opts.eta0;
    let mut theta = tr.theta0;
    let mut outer_ref = ev.objective;
    for outer in 1..=opts.max_outer {
        let mut inner_ref = ev.objective;
        for inner in 1..=opts.max_inner {
            let st = trajectory_step(model, cfg, &plan, theta, &tr)?;
            // Grow after a success, otherwise start the next attempt afresh.
            theta = if st.accepted { (2.0 * st.theta).min(tr.theta0) } else { tr.theta0 };
            plan = st.plan;
            let a = alpha_step(model, cfg, &mut plan, eta, opts.frozen_gamma);
            ev = evaluate(model, cfg, &plan);
            trace.rows.push(clock.row(outer, inner, "inner", &ev, eta, a.penalty_residual, st.theta));
            let rel = (ev.objective - inner_ref) / inner_ref.abs().max(1e-12);
            inner_ref = ev.objective;
            if rel < opts.inner_tol && a.switched == 0 {
                if a.penalty_residual < opts.penalty_tol {
                    break;
                }
                eta *= opts.eta_decay;
            }
        }
        if shares_free {
            allocate_shares(model, cfg, &mut plan, true)?;
            ev = evaluate(model, cfg, &plan);
        }
        trace.rows.push(clock.row(outer, 0, "shares", &ev, eta, f64::NAN, theta));
        trace.outer_iterations = outer;
        let rel = (ev.objective - outer_ref) / outer_ref.abs().max(1e-12);
        outer_ref = ev.objective;
        if rel < opts.outer_tol {
            trace.converged = true;
            break;
        }
    }
    idle_slots_rest(&mut plan);
    Ok((plan, trace))
}

/// Slots without a served buoy carry no shares and no power.
fn idle_slots_rest(plan: &mut Plan) {
    for n in 0..plan.num_slots() {
        if plan.serve[n].is_none() {
            plan.gamma[n] = [0.0; 4];
            plan.power[n] = 0.0;
        }
    }
}
