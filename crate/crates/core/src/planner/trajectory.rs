//! Trajectory/power subproblem at fixed association and shares: the convex
//! restriction built around a reference plan, solved inside a shrinking
//! trust region and accepted only when the original constraints hold.

use std::f64::consts::LN_2;

use super::model::LinkModel;
use super::plan::{evaluate, Plan, PlanEval};
use crate::convex_kernel::{
    solve_concave, ConcaveObjective, ConvexConstraint, ConvexProgram, HessianSink, QuadraticConstraint, SolveResult, SolveStatus,
    SolverError, Sparse,
};
use crate::scenario::{Point3, ScenarioConfig, STAGE_B, STAGE_C, STAGE_P, STAGE_S};

/// Powers inside the subproblems are in milliwatts.
pub(crate) const MW: f64 = 1e-3;
/// Acceptance tolerance on the original constraints.
pub const FEAS_TOL: f64 = 1e-6;

/// Variable layout: every slot owns a block `[x, y, p, extra...]`, where the
/// endpoint slots (pinned positions) drop `x, y`. Wide variables follow the
/// slot blocks.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    off: Vec<usize>,
    free: Vec<bool>,
    pub extra: usize,
    pub slots_end: usize,
    pub dim: usize,
}

impl Layout {
    pub fn new(ns: usize, extra: usize, wide: usize) -> Self {
        let mut off = Vec::with_capacity(ns);
        let mut free = Vec::with_capacity(ns);
        let mut k = 0;
        for n in 0..ns {
            let f = n > 0 && n + 1 < ns;
            off.push(k);
            free.push(f);
            k += if f { 3 } else { 1 } + extra;
        }
        Self { off, free, extra, slots_end: k, dim: k + wide }
    }

    pub fn xy(&self, n: usize) -> Option<(usize, usize)> {
        self.free[n].then(|| (self.off[n], self.off[n] + 1))
    }

    pub fn p(&self, n: usize) -> usize {
        self.off[n] + if self.free[n] { 2 } else { 0 }
    }

    pub fn extra(&self, n: usize, k: usize) -> usize {
        self.p(n) + 1 + k
    }

    pub fn bandwidth(&self) -> usize {
        3 + 2 * self.extra + 1
    }

    pub fn pack(&self, plan: &Plan) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for n in 0..plan.num_slots() {
            if let Some((x, y)) = self.xy(n) {
                v[x] = plan.pos[n][0];
                v[y] = plan.pos[n][1];
            }
            v[self.p(n)] = plan.power[n] / MW;
        }
        v
    }

    pub fn position(&self, v: &[f64], plan: &Plan, n: usize) -> [f64; 2] {
        match self.xy(n) {
            Some((x, y)) => [v[x], v[y]],
            None => plan.pos[n],
        }
    }
}

/// Linear term in the layout variables: adds `g·(c - c0)` for the position
/// and `gp·(p - p0)` for the power (gp per watt), returning the constant.
pub(crate) fn linear_terms(
    lay: &Layout,
    n: usize,
    c0: [f64; 2],
    p0_mw: f64,
    gxy: [f64; 2],
    gp_per_w: f64,
    coeffs: &mut Sparse,
) -> f64 {
    let mut constant = 0.0;
    if let Some((x, y)) = lay.xy(n) {
        coeffs.push((x, gxy[0]));
        coeffs.push((y, gxy[1]));
        constant -= gxy[0] * c0[0] + gxy[1] * c0[1];
    }
    if gp_per_w != 0.0 {
        coeffs.push((lay.p(n), gp_per_w * MW));
        constant -= gp_per_w * MW * p0_mw;
    }
    constant
}

/// Squared UAV–point distance as quadratic rows in the layout.
pub(crate) fn dist_rows(lay: &Layout, n: usize, c: [f64; 2], target: &Point3, z_uav: f64) -> (Vec<(Sparse, f64)>, f64) {
    let z2 = (z_uav - target[2]).powi(2);
    match lay.xy(n) {
        Some((x, y)) => (vec![(vec![(x, 1.0)], -target[0]), (vec![(y, 1.0)], -target[1])], z2),
        None => (Vec::new(), (c[0] - target[0]).powi(2) + (c[1] - target[1]).powi(2) + z2),
    }
}

/// `‖c_n - c_{n-1}‖² <= L²` with pinned endpoints as constants.
pub(crate) fn step_constraint(lay: &Layout, plan: &Plan, n: usize, limit: f64) -> Option<QuadraticConstraint> {
    let (a, b) = (lay.xy(n - 1), lay.xy(n));
    if a.is_none() && b.is_none() {
        return None;
    }
    let mut rows = Vec::with_capacity(2);
    for k in 0..2 {
        let mut coeffs = Vec::new();
        let mut constant = 0.0;
        match b {
            Some((x, y)) => coeffs.push((if k == 0 { x } else { y }, 1.0)),
            None => constant += plan.pos[n][k],
        }
        match a {
            Some((x, y)) => coeffs.push((if k == 0 { x } else { y }, -1.0)),
            None => constant -= plan.pos[n - 1][k],
        }
        rows.push((coeffs, constant));
    }
    Some(QuadraticConstraint { rows, linear: Vec::new(), c: limit * limit })
}

/// Geometry of one quadratic-transform term: `q = 1 + s0·(2√(p/p0) - d²/d0²)`.
#[derive(Debug, Clone, Copy)]
struct QtTerm {
    xy: Option<(usize, usize)>,
    ip: usize,
    w: f64,
    s0: f64,
    p0: f64,
    d0sq: f64,
    b: [f64; 2],
    /// Constant part of `d²` (vertical offset, or all of it when pinned).
    dconst: f64,
}

impl QtTerm {
    fn d2(&self, x: &[f64]) -> f64 {
        match self.xy {
            Some((ix, iy)) => (x[ix] - self.b[0]).powi(2) + (x[iy] - self.b[1]).powi(2) + self.dconst,
            None => self.dconst,
        }
    }

    /// `2√(p/p0) - d²/d0²`
    fn inner(&self, x: &[f64]) -> f64 {
        2.0 * (x[self.ip] / self.p0).sqrt() - self.d2(x) / self.d0sq
    }
}

struct QtObjective {
    terms: Vec<QtTerm>,
}

impl ConcaveObjective for QtObjective {
    fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.w * (1.0 + t.s0 * t.inner(x)).log2()).sum()
    }
    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        for t in &self.terms {
            let q = 1.0 + t.s0 * t.inner(x);
            let k = t.w / (q * LN_2) * t.s0;
            g[t.ip] += k / (x[t.ip] * t.p0).sqrt();
            if let Some((ix, iy)) = t.xy {
                g[ix] -= k * 2.0 * (x[ix] - t.b[0]) / t.d0sq;
                g[iy] -= k * 2.0 * (x[iy] - t.b[1]) / t.d0sq;
            }
        }
    }
    fn hessian(&self, x: &[f64], scale: f64, h: &mut dyn HessianSink) {
        for t in &self.terms {
            let q = 1.0 + t.s0 * t.inner(x);
            let c = scale * t.w / LN_2;
            let p = x[t.ip];
            let qp = t.s0 / (p * t.p0).sqrt();
            let qpp = -0.5 * t.s0 / (p * (p * t.p0).sqrt());
            h.add(t.ip, t.ip, c * (qpp / q - qp * qp / (q * q)));
            if let Some((ix, iy)) = t.xy {
                let qx = -2.0 * t.s0 * (x[ix] - t.b[0]) / t.d0sq;
                let qy = -2.0 * t.s0 * (x[iy] - t.b[1]) / t.d0sq;
                let qxx = -2.0 * t.s0 / t.d0sq;
                let inv2 = 1.0 / (q * q);
                h.add(ix, ix, c * (qxx / q - qx * qx * inv2));
                h.add(iy, ix, c * (-qx * qy * inv2));
                h.add(iy, iy, c * (qxx / q - qy * qy * inv2));
                h.add(t.ip, ix, c * (-qp * qx * inv2));
                h.add(t.ip, iy, c * (-qp * qy * inv2));
            }
        }
    }
}

/// Keeps the surrogate at or above zero rate: `d²/d0² - 2√(p/p0) <= 0`.
struct QtDomain(QtTerm);

impl ConvexConstraint for QtDomain {
    fn value(&self, x: &[f64]) -> f64 {
        -self.0.inner(x)
    }
    fn gradient(&self, x: &[f64], out: &mut Sparse) {
        let t = &self.0;
        out.push((t.ip, -1.0 / (x[t.ip] * t.p0).sqrt()));
        if let Some((ix, iy)) = t.xy {
            out.push((ix, 2.0 * (x[ix] - t.b[0]) / t.d0sq));
            out.push((iy, 2.0 * (x[iy] - t.b[1]) / t.d0sq));
        }
    }
    fn hessian(&self, x: &[f64], scale: f64, h: &mut dyn HessianSink) {
        let t = &self.0;
        let p = x[t.ip];
        h.add(t.ip, t.ip, scale * 0.5 / (p * (p * t.p0).sqrt()));
        if let Some((ix, iy)) = t.xy {
            h.add(ix, ix, scale * 2.0 / t.d0sq);
            h.add(iy, iy, scale * 2.0 / t.d0sq);
        }
    }
}

/// Trust-region parameters.
#[derive(Debug, Clone)]
pub struct TrustRegion {
    pub theta0: f64,
    pub shrink: f64,
    pub theta_min: f64,
    /// Position scale (m).
    pub upsilon_c: f64,
    /// Power scale per buoy (W).
    pub upsilon_p: Vec<f64>,
}

impl TrustRegion {
    pub fn new(model: &LinkModel, cfg: &ScenarioConfig) -> Self {
        Self {
            theta0: 8.0,
            shrink: 0.5,
            theta_min: 1e-3,
            upsilon_c: cfg.max_step(),
            upsilon_p: model.harvest.iter().map(|h| h / (cfg.uav_height * cfg.uav_height)).collect(),
        }
    }
}

/// Whether a slot transmits: served, with uplink share and power.
pub(crate) fn transmitting(plan: &Plan, n: usize) -> Option<usize> {
    plan.serve[n].filter(|_| plan.gamma[n][STAGE_C] > 0.0 && plan.power[n] > 0.0)
}

/// Builds the convex restriction around `plan` with trust size `theta`.
fn build(model: &LinkModel, cfg: &ScenarioConfig, plan: &Plan, theta: f64, tr: &TrustRegion) -> (Layout, ConvexProgram<'static>) {
    let ns = plan.num_slots();
    let lay = Layout::new(ns, 0, 0);
    let mut terms = Vec::new();
    let mut affine: Vec<(Sparse, f64)> = Vec::new();
    let mut quads: Vec<QuadraticConstraint> = Vec::new();
    let mut c5_rows: Vec<(Sparse, f64)> = vec![(Vec::new(), -model.gamma_c_th * ns as f64); cfg.num_buoys()];
    for n in 0..ns {
        let c0 = plan.pos[n];
        let p0w = plan.power[n];
        let p0 = p0w / MW;
        let ip = lay.p(n);
        let Some(u) = transmitting(plan, n) else {
            // Power is unused here; keep its variable boxed.
            affine.push((vec![(ip, -1.0)], 1.0));
            affine.push((vec![(ip, 1.0)], 1.0 + p0));
            continue;
        };
        let g = plan.gamma[n];
        let b = cfg.buoy_position(u, n);
        let d0sq = model.dist2(c0, &b);
        let z2 = (model.z_uav - b[2]).powi(2);
        let term = QtTerm {
            xy: lay.xy(n),
            ip,
            w: g[STAGE_C] / ns as f64,
            s0: model.c3 * p0w / d0sq,
            p0,
            d0sq,
            b: [b[0], b[1]],
            dconst: if lay.xy(n).is_some() { z2 } else { d0sq },
        };
        terms.push(term);
        // Sensing, linearized.
        if lay.xy(n).is_some() && model.gamma_s_th > 0.0 {
            let (l0, gl) = model.lambda(c0, &b);
            let cu = model.c_u(u, g[STAGE_S]);
            if l0.is_finite() && cu.is_finite() {
                let mut coeffs = Vec::new();
                let k = linear_terms(&lay, n, c0, p0, gl, 0.0, &mut coeffs);
                affine.push((coeffs, cu - l0 - k));
            }
        }
        // Backhaul, linearized.
        if g[STAGE_B] > 0.0 {
            let r = g[STAGE_C] * model.chi[u] / g[STAGE_B];
            let (pi0, gpi) = model.pi(c0, &b, p0w, r);
            let mut coeffs = Vec::new();
            let k = linear_terms(&lay, n, c0, p0, [gpi[0], gpi[1]], gpi[2], &mut coeffs);
            affine.push((coeffs, -pi0 - k));
        }
        // Energy, inner approximation: d² - 2J/p0 + p·J/p0² <= 0.
        let j = model.energy_j(u, g[STAGE_P], g[STAGE_C]);
        let (rows, dconst) = dist_rows(&lay, n, c0, &b, model.z_uav);
        let lin = j / (p0w * p0w) * MW;
        quads.push(QuadraticConstraint { rows, linear: vec![(ip, lin)], c: 2.0 * j / p0w - dconst });
        // Power trust box.
        let up = theta * tr.upsilon_p[u] / MW;
        affine.push((vec![(ip, -1.0)], -(p0 - up).max(0.0)));
        affine.push((vec![(ip, 1.0)], p0 + up));
        // Per-buoy rate requirement, linearized.
        let (r0, gr) = model.rate(c0, &b, p0w, g[STAGE_C]);
        let mut coeffs = Vec::new();
        let k = linear_terms(&lay, n, c0, p0, [gr[0], gr[1]], gr[2], &mut coeffs);
        let row = &mut c5_rows[u];
        row.0.extend(coeffs.into_iter().map(|(i, v)| (i, -v)));
        row.1 += r0 + k;
    }
    let domains: Vec<QtTerm> = terms.iter().map(|t| QtTerm { w: 1.0, ..*t }).collect();
    let mut prog = ConvexProgram::new(lay.dim, QtObjective { terms }).banded(lay.bandwidth());
    for (coeffs, rhs) in affine {
        prog.add_affine(coeffs, rhs);
    }
    for q in quads {
        prog.add_quadratic(q);
    }
    for t in domains {
        prog.add_constraint(QtDomain(t));
    }
    if model.gamma_c_th > 0.0 {
        for (coeffs, rhs) in c5_rows {
            if !coeffs.is_empty() {
                prog.add_affine(coeffs, rhs);
            }
        }
    }
    for n in 1..ns {
        if let Some(q) = step_constraint(&lay, plan, n, cfg.max_step()) {
            prog.add_quadratic(q);
        }
    }
    for n in 0..ns {
        if let Some((x, y)) = lay.xy(n) {
            prog.add_quadratic(QuadraticConstraint::ball(&[x, y], &plan.pos[n], theta * tr.upsilon_c));
        }
    }
    (lay, prog)
}

/// Reads a candidate plan out of a subproblem solution. Power is clipped to
/// the exact energy/backhaul limits, which only removes round-off for
/// points the restriction already certifies.
fn unpack(model: &LinkModel, cfg: &ScenarioConfig, lay: &Layout, plan: &Plan, x: &[f64]) -> Plan {
    let mut cand = plan.clone();
    for n in 0..plan.num_slots() {
        cand.pos[n] = lay.position(x, plan, n);
        if let Some(u) = transmitting(plan, n) {
            let b = cfg.buoy_position(u, n);
            let cap = model.max_power(u, cand.pos[n], &b, &plan.gamma[n]);
            cand.power[n] = (x[lay.p(n)] * MW).clamp(0.0, cap);
        }
    }
    cand
}

/// Solves the restriction around `plan` at trust size `theta` and returns
/// the candidate together with the raw solver result.
pub fn solve_restriction(
    model: &LinkModel,
    cfg: &ScenarioConfig,
    plan: &Plan,
    theta: f64,
    tr: &TrustRegion,
) -> Result<(Plan, SolveResult), SolverError> {
    let (lay, prog) = build(model, cfg, plan, theta, tr);
    let prog = prog.with_start(lay.pack(plan)).with_options(crate::convex_kernel::SolverOptions { max_newton: 400, ..Default::default() });
    let res = solve_concave(&prog)?;
    Ok((unpack(model, cfg, &lay, plan, &res.x), res))
}

/// Result of one trust-region trajectory step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub plan: Plan,
    pub eval: PlanEval,
    pub accepted: bool,
    /// Trust size of the accepted (or last rejected) attempt.
    pub theta: f64,
    pub attempts: usize,
    pub newton_steps: usize,
}

/// One trajectory/power step from a feasible `plan`: solve the restriction
/// with trust size starting at `theta_start`, halving until the candidate
/// meets the original constraints without lowering the rate. When no trust
/// size works the reference plan is returned unchanged.
pub fn trajectory_step(
    model: &LinkModel,
    cfg: &ScenarioConfig,
    plan: &Plan,
    theta_start: f64,
    tr: &TrustRegion,
) -> Result<StepOutcome, SolverError> {
    let reference = evaluate(model, cfg, plan);
    let mut theta = theta_start.min(tr.theta0);
    let mut attempts = 0;
    let mut newton = 0;
    while theta >= tr.theta_min {
        attempts += 1;
        match solve_restriction(model, cfg, plan, theta, tr) {
            Ok((cand, res)) => {
                newton += res.newton_steps;
                if res.status != SolveStatus::Infeasible {
                    let ev = evaluate(model, cfg, &cand);
                    if ev.feasible(FEAS_TOL) && ev.objective >= reference.objective {
                        return Ok(StepOutcome { plan: cand, eval: ev, accepted: true, theta, attempts, newton_steps: newton });
                    }
                }
            }
            Err(SolverError::Singular | SolverError::NonFinite(_)) => {}
            Err(e) => return Err(e),
        }
        theta *= tr.shrink;
    }
    Ok(StepOutcome { plan: plan.clone(), eval: reference, accepted: false, theta, attempts, newton_steps: newton })
}
