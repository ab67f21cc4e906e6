//! Feasible starting point: successive minimization of the total slack
//! needed by the linearized constraints, with association and shares fixed.

use serde::Serialize;

use super::model::LinkModel;
use super::plan::{evaluate, Plan};
use super::trajectory::{dist_rows, linear_terms, step_constraint, transmitting, Layout, TrustRegion, FEAS_TOL, MW};
use crate::convex_kernel::{solve_concave, ConvexProgram, LinearObjective, QuadraticConstraint, SolveStatus, SolverError, Sparse};
use crate::scenario::{ScenarioConfig, STAGE_B, STAGE_C, STAGE_P, STAGE_S};

/// Normalized violations per family `[c3, c4, c5, c6]`, summed over slots
/// (c5 over buoys).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlackBreakdown {
    pub sensing: f64,
    pub energy: f64,
    pub rate: f64,
    pub backhaul: f64,
}

impl SlackBreakdown {
    pub fn total(&self) -> f64 {
        self.sensing + self.energy + self.rate + self.backhaul
    }
}

/// Evidence that no feasible point was found for the given association and
/// shares.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityCertificate {
    pub slack: SlackBreakdown,
    pub iterations: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct FeasibilityOutcome {
    pub plan: Plan,
    pub slack: SlackBreakdown,
    pub iterations: usize,
    pub feasible: bool,
}

/// Exact normalized slack of a plan.
pub fn slack_of(model: &LinkModel, cfg: &ScenarioConfig, plan: &Plan) -> SlackBreakdown {
    let ns = plan.num_slots();
    let mut s = SlackBreakdown { sensing: 0.0, energy: 0.0, rate: 0.0, backhaul: 0.0 };
    let mut sums = vec![0.0; cfg.num_buoys()];
    for n in 0..ns {
        let Some(u) = plan.serve[n] else { continue };
        let b = cfg.buoy_position(u, n);
        let c = plan.pos[n];
        let g = plan.gamma[n];
        if model.gamma_s_th > 0.0 {
            let (l, _) = model.lambda(c, &b);
            let cu = model.c_u(u, g[STAGE_S]);
            s.sensing += if cu > 0.0 { (l / cu - 1.0).max(0.0).min(1e6) } else { 1e6 };
        }
        if let Some(u) = transmitting(plan, n) {
            let j = model.energy_j(u, g[STAGE_P], g[STAGE_C]);
            let p = plan.power[n];
            s.energy += ((model.dist2(c, &b) - j / p) / (j / p)).max(0.0);
            if g[STAGE_B] > 0.0 {
                let r = g[STAGE_C] * model.chi[u] / g[STAGE_B];
                let (t1, t2) = model.pi_terms(c, &b, p, r);
                s.backhaul += ((t1 - t2) / t2).max(0.0);
            } else {
                s.backhaul += 1.0;
            }
            sums[u] += model.rate(c, &b, p, g[STAGE_C]).0;
        }
    }
    if model.gamma_c_th > 0.0 {
        let need = model.gamma_c_th * ns as f64;
        s.rate = sums.iter().map(|&r| ((need - r) / need).max(0.0)).sum();
    }
    s
}

const MAX_ITERS: usize = 200;
const STALL_ITERS: usize = 8;

/// Minimizes the total normalized slack over trajectory and power with the
/// association and shares of `plan` fixed. Stops once the plan meets the
/// original constraints, or reports the residual slack when progress stalls.
pub fn feasibility_init(
    model: &LinkModel,
    cfg: &ScenarioConfig,
    plan: &Plan,
    tr: &TrustRegion,
) -> Result<FeasibilityOutcome, SolverError> {
    let mut plan = plan.clone();
    let mut slack = slack_of(model, cfg, &plan);
    let mut theta = tr.theta0;
    let mut iterations = 0;
    let mut since_progress = 0;
    while iterations < MAX_ITERS {
        if evaluate(model, cfg, &plan).feasible(FEAS_TOL) {
            return Ok(FeasibilityOutcome { plan, slack, iterations, feasible: true });
        }
        if theta < tr.theta_min || since_progress >= STALL_ITERS {
            break;
        }
        iterations += 1;
        let cand = match slack_step(model, cfg, &plan, theta, tr)? {
            Some(c) => c,
            None => {
                theta *= tr.shrink;
                since_progress += 1;
                continue;
            }
        };
        let s = slack_of(model, cfg, &cand);
        if s.total() < slack.total() {
            let rel = (slack.total() - s.total()) / slack.total().max(1e-12);
            since_progress = if rel < 1e-6 { since_progress + 1 } else { 0 };
            plan = cand;
            slack = s;
            theta = (2.0 * theta).min(tr.theta0);
        } else {
            theta *= tr.shrink;
            since_progress += 1;
        }
    }
    let feasible = evaluate(model, cfg, &plan).feasible(FEAS_TOL);
    Ok(FeasibilityOutcome { plan, slack, iterations, feasible })
}

/// One slack-minimization subproblem around `plan`. `None` when the solver
/// gives no usable point.
fn slack_step(
    model: &LinkModel,
    cfg: &ScenarioConfig,
    plan: &Plan,
    theta: f64,
    tr: &TrustRegion,
) -> Result<Option<Plan>, SolverError> {
    let ns = plan.num_slots();
    let nu = cfg.num_buoys();
    let lay = Layout::new(ns, 3, nu);
    let wide = |u: usize| lay.slots_end + u;
    let mut obj = vec![0.0; lay.dim];
    let mut start = lay.pack(plan);
    let mut affine: Vec<(Sparse, f64)> = Vec::new();
    let mut quads: Vec<QuadraticConstraint> = Vec::new();
    let need = model.gamma_c_th * ns as f64;
    let mut c5: Vec<(Sparse, f64)> = vec![(Vec::new(), 0.0); nu];
    let mut c5_start = vec![0.0; nu];
    let mut lin_viol = vec![[0.0f64; 3]; ns];
    for n in 0..ns {
        let c0 = plan.pos[n];
        let p0w = plan.power[n];
        let p0 = p0w / MW;
        let ip = lay.p(n);
        for k in 0..3 {
            obj[lay.extra(n, k)] = -1.0;
        }
        let Some(u) = transmitting(plan, n) else {
            affine.push((vec![(ip, -1.0)], 1.0));
            affine.push((vec![(ip, 1.0)], 1.0 + p0));
            continue;
        };
        let g = plan.gamma[n];
        let b = cfg.buoy_position(u, n);
        // Sensing: Λ̃/C_u - 1 <= ω1.
        if lay.xy(n).is_some() && model.gamma_s_th > 0.0 {
            let (l0, gl) = model.lambda(c0, &b);
            let cu = model.c_u(u, g[STAGE_S]);
            if l0.is_finite() && cu.is_finite() && cu > 0.0 {
                let mut coeffs = Vec::new();
                let k = linear_terms(&lay, n, c0, p0, [gl[0] / cu, gl[1] / cu], 0.0, &mut coeffs);
                coeffs.push((lay.extra(n, 0), -1.0));
                affine.push((coeffs, 1.0 - l0 / cu - k));
                lin_viol[n][0] = l0 / cu - 1.0;
            }
        }
        // Backhaul: Π̃ / (1 + C4/d_b²) <= ω2.
        if g[STAGE_B] > 0.0 {
            let r = g[STAGE_C] * model.chi[u] / g[STAGE_B];
            let (pi0, gpi) = model.pi(c0, &b, p0w, r);
            let scale = 1.0 + model.c4 / model.ship_dist2(c0);
            let mut coeffs = Vec::new();
            let k = linear_terms(&lay, n, c0, p0, [gpi[0] / scale, gpi[1] / scale], gpi[2] / scale, &mut coeffs);
            coeffs.push((lay.extra(n, 1), -1.0));
            affine.push((coeffs, -pi0 / scale - k));
            lin_viol[n][1] = pi0 / scale;
        }
        // Energy (inner approximation) scaled by J/p0: <= ω3.
        let j = model.energy_j(u, g[STAGE_P], g[STAGE_C]);
        let scale = j / p0w;
        let (rows, dconst) = dist_rows(&lay, n, c0, &b, model.z_uav);
        let rows = rows.into_iter().map(|(a, c)| (a.into_iter().map(|(i, v)| (i, v / scale.sqrt())).collect(), c / scale.sqrt())).collect();
        quads.push(QuadraticConstraint {
            rows,
            linear: vec![(ip, j / (p0w * p0w) * MW / scale), (lay.extra(n, 2), -1.0)],
            c: 2.0 - dconst / scale,
        });
        lin_viol[n][2] = model.dist2(c0, &b) / scale - 1.0;
        // Power box inside the trust region, kept positive.
        let up = theta * tr.upsilon_p[u] / MW;
        affine.push((vec![(ip, -1.0)], -(p0 - up).max(1e-3 * p0)));
        affine.push((vec![(ip, 1.0)], p0 + up));
        if need > 0.0 {
            let (r0, gr) = model.rate(c0, &b, p0w, g[STAGE_C]);
            let mut coeffs = Vec::new();
            let k = linear_terms(&lay, n, c0, p0, [-gr[0] / need, -gr[1] / need], -gr[2] / need, &mut coeffs);
            c5[u].0.extend(coeffs);
            c5[u].1 += (r0 / need) + (-k);
            c5_start[u] += r0;
        }
    }
    for n in 0..ns {
        for k in 0..3 {
            let w = lay.extra(n, k);
            start[w] = lin_viol[n][k].max(0.0) + 1.0;
            affine.push((vec![(w, -1.0)], 0.0));
        }
    }
    // Rate requirement: 1 - Σ R̃/need <= ω4.
    for u in 0..nu {
        let w = wide(u);
        affine.push((vec![(w, -1.0)], 0.0));
        if need > 0.0 && !c5[u].0.is_empty() {
            obj[w] = -1.0;
            let (mut coeffs, acc) = std::mem::take(&mut c5[u]);
            coeffs.push((w, -1.0));
            // -Σ g·c/need - ω <= Σ(r0 - g·c0)/need - 1
            affine.push((coeffs, acc - 1.0));
            start[w] = (1.0 - c5_start[u] / need).max(0.0) + 1.0;
        } else {
            start[w] = 1.0;
            affine.push((vec![(w, 1.0)], 2.0));
        }
    }
    let mut prog = ConvexProgram::new(lay.dim, LinearObjective(obj)).banded(lay.bandwidth());
    for (coeffs, rhs) in affine {
        prog.add_affine(coeffs, rhs);
    }
    for q in quads {
        prog.add_quadratic(q);
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
    let prog = prog.with_start(start);
    let res = match solve_concave(&prog) {
        Ok(r) => r,
        Err(SolverError::Singular | SolverError::NonFinite(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    if res.status == SolveStatus::Infeasible {
        return Ok(None);
    }
    let mut cand = plan.clone();
    for n in 0..ns {
        cand.pos[n] = lay.position(&res.x, plan, n);
        if transmitting(plan, n).is_some() {
            cand.power[n] = res.x[lay.p(n)].max(0.0) * MW;
        }
    }
    Ok(Some(cand))
}
