//! Initial association/time split and the penalized association update.

use super::model::{alpha_bar, LinkModel};
use super::plan::{evaluate, Plan};
use crate::convex_kernel::solve_simplex_qp;
use crate::scenario::{ScenarioConfig, STAGE_C, STAGE_S};

/// Buoys ordered by their progress along the start→end corridor; ties go to
/// the lower index.
pub fn corridor_order(cfg: &ScenarioConfig) -> Vec<usize> {
    let (s, e) = (cfg.uav_start, cfg.uav_end);
    let axis = [e[0] - s[0], e[1] - s[1]];
    let len2 = (axis[0] * axis[0] + axis[1] * axis[1]).max(1e-300);
    let progress = |u: usize| {
        let b = cfg.buoy_position(u, 0);
        ((b[0] - s[0]) * axis[0] + (b[1] - s[1]) * axis[1]) / len2
    };
    let mut order: Vec<usize> = (0..cfg.num_buoys()).collect();
    order.sort_by(|&a, &b| progress(a).total_cmp(&progress(b)).then(a.cmp(&b)));
    order
}

/// Straight-line flight at constant speed between the pinned endpoints.
pub fn straight_line(cfg: &ScenarioConfig) -> Vec<[f64; 2]> {
    let ns = cfg.num_slots;
    (0..ns)
        .map(|n| {
            let t = if ns > 1 { n as f64 / (ns - 1) as f64 } else { 0.0 };
            [
                cfg.uav_start[0] + t * (cfg.uav_end[0] - cfg.uav_start[0]),
                cfg.uav_start[1] + t * (cfg.uav_end[1] - cfg.uav_start[1]),
            ]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{buoys} buoys cannot each get a slot out of {slots}")]
pub struct TooManyBuoys {
    pub buoys: usize,
    pub slots: usize,
}

/// Initial plan: straight-line path, slots handed out in equal consecutive
/// blocks following the corridor order of the buoys, equal stage shares and
/// the largest power the energy and backhaul constraints allow.
pub fn init_association_time(model: &LinkModel, cfg: &ScenarioConfig) -> Result<Plan, TooManyBuoys> {
    let (ns, nu) = (cfg.num_slots, cfg.num_buoys());
    if nu > ns {
        return Err(TooManyBuoys { buoys: nu, slots: ns });
    }
    let order = corridor_order(cfg);
    let pos = straight_line(cfg);
    let mut plan = Plan { pos, serve: vec![None; ns], gamma: vec![[0.25; 4]; ns], power: vec![0.0; ns] };
    for n in 0..ns {
        let u = order[n * nu / ns];
        plan.serve[n] = Some(u);
        plan.power[n] = model.max_power(u, plan.pos[n], &cfg.buoy_position(u, n), &plan.gamma[n]);
    }
    Ok(plan)
}

/// Summary of one association update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaStep {
    pub switched: usize,
    pub reverted: usize,
    /// `Σ [(α(1-ᾱ))² + (α-ᾱ)²]` of the continuous solution.
    pub penalty_residual: f64,
}

/// Penalized association update. For every slot the prospective rate of
/// each buoy (best shares and power at the current position) enters the
/// separable simplex QP with the penalty around `ᾱ`; the slot is handed to
/// the buoy with the largest continuous weight. A hand-over that would break
/// the losing buoy's rate requirement is undone. Switched slots take the
/// per-slot optimal shares, or `frozen` when the shares are not free, so
/// every constraint still holds.
pub fn alpha_step(
    model: &LinkModel,
    cfg: &ScenarioConfig,
    plan: &mut Plan,
    eta: f64,
    frozen: Option<[f64; 4]>,
) -> AlphaStep {
    let (ns, nu) = (plan.num_slots(), cfg.num_buoys());
    let mut out = AlphaStep { switched: 0, reverted: 0, penalty_residual: 0.0 };
    let mut buoy_avg = evaluate(model, cfg, plan).buoy_avg;
    for n in 0..ns {
        let c = plan.pos[n];
        let mut prospects = vec![(0.0, 0.0, 0.0); nu];
        let mut lin = vec![0.0; nu];
        let mut quad = vec![0.0; nu];
        for u in 0..nu {
            let b = cfg.buoy_position(u, n);
            let s = model.sensing_floor(u, c, &b);
            let (r, rho) = match frozen {
                Some(g) if s <= g[STAGE_S] => (g[STAGE_C] * model.uplink_se(c, &b, model.max_power(u, c, &b, &g)), 0.0),
                Some(_) => (0.0, 0.0),
                None if s < 1.0 => model.slot_rate_optimum(u, c, &b, s),
                None => (0.0, 0.0),
            };
            prospects[u] = (r, rho, s);
            let a_prev = if plan.serve[n] == Some(u) { 1.0 } else { 0.0 };
            let ab = alpha_bar(a_prev);
            lin[u] = r + 2.0 * ab / eta;
            quad[u] = -((1.0 - ab).powi(2) + 1.0) / eta;
        }
        let alpha = solve_simplex_qp(&lin, &quad, &vec![1.0; nu]);
        for u in 0..nu {
            let ab = alpha_bar(if plan.serve[n] == Some(u) { 1.0 } else { 0.0 });
            out.penalty_residual += (alpha[u] * (1.0 - ab)).powi(2) + (alpha[u] - ab).powi(2);
        }
        let best = (0..nu).filter(|&u| alpha[u] > 0.0).max_by(|&a, &b| alpha[a].total_cmp(&alpha[b]).then(b.cmp(&a)));
        let Some(best) = best else { continue };
        if plan.serve[n] == Some(best) || prospects[best].0 <= 0.0 {
            continue;
        }
        let old_rate = plan.gamma[n][STAGE_C] * plan.serve[n].map_or(0.0, |u| model.uplink_se(c, &cfg.buoy_position(u, n), plan.power[n]));
        if prospects[best].0 <= old_rate {
            continue;
        }
        if let Some(old) = plan.serve[n] {
            if model.gamma_c_th > 0.0 && buoy_avg[old] - old_rate / (ns as f64) < model.gamma_c_th {
                out.reverted += 1;
                continue;
            }
            buoy_avg[old] -= old_rate / ns as f64;
        }
        let b = cfg.buoy_position(best, n);
        let (g, p) = match frozen {
            Some(g) => (g, f64::INFINITY),
            None => model.slot_allocation(best, c, &b, prospects[best].2, prospects[best].1),
        };
        plan.serve[n] = Some(best);
        plan.gamma[n] = g;
        plan.power[n] = p.min(model.max_power(best, c, &b, &g));
        buoy_avg[best] += model.rate(c, &b, plan.power[n], g[STAGE_C]).0 / ns as f64;
        out.switched += 1;
    }
    out
}
