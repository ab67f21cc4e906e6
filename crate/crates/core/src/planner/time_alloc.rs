//! Stage-share allocation with the trajectory and association fixed: the
//! exact linear program over the shares at fixed power, followed by a
//! joint share/power refinement that can move the power/uplink ratio.

use std::f64::consts::LN_2;

use super::model::LinkModel;
use super::plan::{evaluate, Plan};
use crate::convex_kernel::{
    solve_concave, solve_lp, ConcaveObjective, ConvexConstraint, ConvexProgram, HessianSink, LinearProgram,
    SolveStatus, SolverError, Sparse,
};
use crate::scenario::{ScenarioConfig, STAGE_B, STAGE_C, STAGE_P, STAGE_S};

/// Fixed-position quantities of one served slot.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SlotTerms {
    pub n: usize,
    pub u: usize,
    /// Minimum sensing share.
    pub s_min: f64,
    /// Harvested power per unit power-transfer share (W).
    pub p_unit: f64,
    /// Uplink SNR per watt.
    pub snr_per_w: f64,
    /// Backhaul spectral efficiency.
    pub l_b: f64,
}

pub(crate) fn slot_terms(model: &LinkModel, cfg: &ScenarioConfig, plan: &Plan) -> Vec<SlotTerms> {
    let mut out = Vec::new();
    for n in 0..plan.num_slots() {
        let Some(u) = plan.serve[n] else { continue };
        let b = cfg.buoy_position(u, n);
        let c = plan.pos[n];
        let d2 = model.dist2(c, &b);
        out.push(SlotTerms {
            n,
            u,
            s_min: model.sensing_floor(u, c, &b),
            p_unit: model.harvest[u] / d2,
            snr_per_w: model.c3 / d2,
            l_b: model.backhaul_se(c),
        });
    }
    out
}

/// Shares maximizing the average uplink rate at the plan's positions and
/// powers. `None` when the program is infeasible.
pub fn time_allocation_lp(
    model: &LinkModel,
    cfg: &ScenarioConfig,
    plan: &Plan,
    enforce_c5: bool,
) -> Result<Option<Vec<[f64; 4]>>, SolverError> {
    let terms = slot_terms(model, cfg, plan);
    let ns = plan.num_slots() as f64;
    let k = terms.len();
    let mut lp = LinearProgram::new(vec![0.0; 4 * k]);
    let mut per_buoy: Vec<Sparse> = vec![Vec::new(); cfg.num_buoys()];
    for (i, t) in terms.iter().enumerate() {
        if t.s_min > 1.0 {
            return Ok(None);
        }
        let (s, p, c, b) = (4 * i + STAGE_S, 4 * i + STAGE_P, 4 * i + STAGE_C, 4 * i + STAGE_B);
        let power = plan.power[t.n];
        let l_c = (1.0 + t.snr_per_w * power).log2();
        lp.c[c] = l_c / ns;
        lp.bounds[s] = (t.s_min, 1.0);
        lp.bounds[p] = (0.0, 1.0);
        lp.bounds[c] = (0.0, 1.0);
        lp.bounds[b] = (0.0, 1.0);
        lp.eq_rows.push((vec![(s, 1.0), (p, 1.0), (c, 1.0), (b, 1.0)], 1.0));
        if power > 0.0 {
            let m = power.max(t.p_unit);
            lp.ub_rows.push((vec![(c, power / m), (p, -t.p_unit / m)], 0.0));
        }
        let chi_lc = model.chi[t.u] * l_c;
        let m = chi_lc.max(t.l_b);
        if m > 0.0 {
            lp.ub_rows.push((vec![(c, chi_lc / m), (b, -t.l_b / m)], 0.0));
        }
        per_buoy[t.u].push((c, -l_c / ns));
    }
    if enforce_c5 && model.gamma_c_th > 0.0 {
        for row in per_buoy {
            if row.is_empty() {
                return Ok(None);
            }
            lp.ub_rows.push((row, -model.gamma_c_th));
        }
    }
    let res = solve_lp(&lp)?;
    if res.status != SolveStatus::Optimal {
        return Ok(None);
    }
    let mut gamma = vec![[0.0; 4]; plan.num_slots()];
    for (i, t) in terms.iter().enumerate() {
        let mut g = [0.0; 4];
        for (j, v) in g.iter_mut().enumerate() {
            *v = res.x[4 * i + j].clamp(0.0, 1.0);
        }
        gamma[t.n] = g;
    }
    Ok(Some(gamma))
}

/// Perspective rate `γ·log2(1 + k·e/γ)` with its gradient and Hessian in
/// `(γ, e)`.
fn perspective(k: f64, gc: f64, e: f64) -> (f64, [f64; 2], [f64; 3]) {
    if gc <= 0.0 {
        return if gc == 0.0 && e >= 0.0 { (0.0, [0.0, 0.0], [0.0; 3]) } else { (f64::NAN, [0.0; 2], [0.0; 3]) };
    }
    let t = e / gc;
    let q = 1.0 + k * t;
    if !(q > 0.0) {
        return (f64::NAN, [0.0; 2], [0.0; 3]);
    }
    let v = gc * q.log2();
    let de = k / (q * LN_2);
    let dg = q.log2() - t * de;
    // φ''(t)/γ · w wᵀ with w = (-t, 1)
    let c = -k * k / (q * q * LN_2) / gc;
    (v, [dg, de], [c * t * t, -c * t, c])
}

/// Objective: average perspective rate over served slots.
struct RateObjective {
    /// Per slot: (γ_c index, e index, SNR per mW-share).
    slots: Vec<(usize, usize, f64)>,
    scale: f64,
}

impl ConcaveObjective for RateObjective {
    fn value(&self, x: &[f64]) -> f64 {
        self.slots.iter().map(|&(c, e, k)| perspective(k, x[c], x[e]).0).sum::<f64>() * self.scale
    }
    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        for &(c, e, k) in &self.slots {
            let (_, d, _) = perspective(k, x[c], x[e]);
            g[c] += d[0] * self.scale;
            g[e] += d[1] * self.scale;
        }
    }
    fn hessian(&self, x: &[f64], scale: f64, h: &mut dyn HessianSink) {
        for &(c, e, k) in &self.slots {
            let (_, _, hh) = perspective(k, x[c], x[e]);
            let s = scale * self.scale;
            h.add(c, c, s * hh[0]);
            h.add(e.max(c), e.min(c), s * hh[1]);
            h.add(e, e, s * hh[2]);
        }
    }
}

/// Per-buoy rate requirement `N·Γ_c - Σ rate <= 0`, scaled by `1/N`.
struct BuoyRate {
    slots: Vec<(usize, usize, f64)>,
    need: f64,
    scale: f64,
}

impl ConvexConstraint for BuoyRate {
    fn value(&self, x: &[f64]) -> f64 {
        self.need - self.slots.iter().map(|&(c, e, k)| perspective(k, x[c], x[e]).0).sum::<f64>() * self.scale
    }
    fn gradient(&self, x: &[f64], out: &mut Sparse) {
        for &(c, e, k) in &self.slots {
            let (_, d, _) = perspective(k, x[c], x[e]);
            out.push((c, -d[0] * self.scale));
            out.push((e, -d[1] * self.scale));
        }
    }
    fn hessian(&self, x: &[f64], scale: f64, h: &mut dyn HessianSink) {
        for &(c, e, k) in &self.slots {
            let (_, _, hh) = perspective(k, x[c], x[e]);
            let s = -scale * self.scale;
            h.add(c, c, s * hh[0]);
            h.add(e.max(c), e.min(c), s * hh[1]);
            h.add(e, e, s * hh[2]);
        }
    }
}

const MW: f64 = 1e-3;
const REFINE_ITERS: usize = 30;

/// Joint refinement of shares and power at fixed positions. Variables per
/// served slot are `(γ_s, γ_p, γ_c, e)` with `e = γ_c·p` in mW; the rate is
/// the perspective of the uplink rate, the energy constraint is linear in
/// `e`, and the backhaul constraint uses the tangent of its concave side,
/// which keeps every iterate feasible. Returns whether the plan improved.
pub fn refine_time_power(
    model: &LinkModel,
    cfg: &ScenarioConfig,
    plan: &mut Plan,
    enforce_c5: bool,
) -> Result<bool, SolverError> {
    let terms = slot_terms(model, cfg, plan);
    if terms.is_empty() || terms.iter().any(|t| t.s_min > 1.0) {
        return Ok(false);
    }
    let ns = plan.num_slots() as f64;
    let mut improved = false;
    let mut current = evaluate(model, cfg, plan);
    for _ in 0..REFINE_ITERS {
        let dim = 4 * terms.len();
        let idx = |i: usize, j: usize| 4 * i + j;
        // Slot of e is the γ_b slot of the share vector; γ_b is implied.
        let e_of = |i: usize| idx(i, STAGE_B);
        let mut start = vec![0.0; dim];
        let mut slots = Vec::with_capacity(terms.len());
        for (i, t) in terms.iter().enumerate() {
            let g = plan.gamma[t.n];
            start[idx(i, STAGE_S)] = g[STAGE_S];
            start[idx(i, STAGE_P)] = g[STAGE_P];
            start[idx(i, STAGE_C)] = g[STAGE_C];
            start[e_of(i)] = g[STAGE_C] * plan.power[t.n] / MW;
            slots.push((idx(i, STAGE_C), e_of(i), t.snr_per_w * MW));
        }
        let mut prog = ConvexProgram::new(dim, RateObjective { slots: slots.clone(), scale: 1.0 / ns }).banded(3);
        for (i, t) in terms.iter().enumerate() {
            let (s, p, c, e) = (idx(i, STAGE_S), idx(i, STAGE_P), idx(i, STAGE_C), e_of(i));
            prog.add_affine(vec![(s, -1.0)], -t.s_min);
            prog.add_affine(vec![(p, -1.0)], 0.0);
            prog.add_affine(vec![(c, -1.0)], 0.0);
            prog.add_affine(vec![(e, -1.0)], 0.0);
            prog.add_affine(vec![(s, 1.0), (p, 1.0), (c, 1.0)], 1.0);
            // e·mW <= γ_p·P_unit
            prog.add_affine(vec![(e, MW), (p, -t.p_unit)], 0.0);
            // χ·(h0 + ∇h·Δ) <= L_b·(1 - γ_s - γ_p - γ_c)
            let (gc0, e0) = (start[c], start[e]);
            let (h0, dh, _) = perspective(slots[i].2, gc0, e0);
            let (dg, de) = if gc0 > 0.0 {
                (dh[0], dh[1])
            } else {
                // Tangent at the origin of the perspective is unbounded in
                // e; use the secant slope at a small share instead.
                let (_, d, _) = perspective(slots[i].2, 1e-9, 0.0);
                (d[0], d[1])
            };
            let chi = model.chi[t.u];
            let rhs = t.l_b - chi * (h0 - dg * gc0 - de * e0);
            prog.add_affine(
                vec![(c, chi * dg + t.l_b), (e, chi * de), (s, t.l_b), (p, t.l_b)],
                rhs,
            );
        }
        if enforce_c5 && model.gamma_c_th > 0.0 {
            for u in 0..cfg.num_buoys() {
                let mine: Vec<_> = terms.iter().zip(&slots).filter(|(t, _)| t.u == u).map(|(_, s)| *s).collect();
                if mine.is_empty() {
                    continue;
                }
                prog.add_constraint(BuoyRate { slots: mine, need: model.gamma_c_th, scale: 1.0 / ns });
            }
        }
        let prog = prog.with_start(start);
        let res = match solve_concave(&prog) {
            Ok(r) => r,
            Err(_) => break,
        };
        if res.status == SolveStatus::Infeasible {
            break;
        }
        let mut cand = plan.clone();
        for (i, t) in terms.iter().enumerate() {
            let x = &res.x;
            let gs = x[idx(i, STAGE_S)].max(t.s_min).min(1.0);
            let gp = x[idx(i, STAGE_P)].max(0.0);
            let gc = x[idx(i, STAGE_C)].max(0.0);
            let e = x[e_of(i)].max(0.0);
            let gb = (1.0 - gs - gp - gc).max(0.0);
            cand.gamma[t.n] = [gs, gp, gc, gb];
            cand.power[t.n] = if gc > 0.0 { e * MW / gc } else { 0.0 };
            // Clip round-off against the exact constraints.
            let b = cfg.buoy_position(t.u, t.n);
            cand.power[t.n] = cand.power[t.n].min(model.max_power(t.u, cand.pos[t.n], &b, &cand.gamma[t.n]));
        }
        let ev = evaluate(model, cfg, &cand);
        let ok_c5 = !enforce_c5 || ev.violation[2] <= 1e-6 || ev.violation[2] <= current.violation[2];
        let ok = ev.violation[0] <= current.violation[0].max(1e-6) && ev.violation[1] <= 1e-6 && ev.violation[3] <= 1e-6 && ok_c5;
        if !ok || ev.objective <= current.objective * (1.0 + 1e-9) {
            break;
        }
        let gain = (ev.objective - current.objective) / current.objective.abs().max(1e-12);
        *plan = cand;
        current = ev;
        improved = true;
        if gain < 1e-7 {
            break;
        }
    }
    Ok(improved)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::default_scenario;

    fn hover_plan(cfg: &ScenarioConfig) -> Plan {
        // Every slot hovers 6.5 m from its buoy, blocks of equal length.
        let ns = cfg.num_slots;
        let nu = cfg.num_buoys();
        let mut plan = Plan { pos: vec![[0.0; 2]; ns], serve: vec![None; ns], gamma: vec![[0.25; 4]; ns], power: vec![0.0; ns] };
        let model = LinkModel::new(cfg);
        for n in 0..ns {
            let u = (n * nu / ns).min(nu - 1);
            let b = cfg.buoy_position(u, n);
            plan.pos[n] = [b[0] + 6.5, b[1]];
            plan.serve[n] = Some(u);
            plan.power[n] = model.max_power(u, plan.pos[n], &b, &plan.gamma[n]);
        }
        plan
    }

    #[test]
    fn perspective_derivatives() {
        let k = 3.0;
        let (gc, e) = (0.4, 0.7);
        let (_, d, h) = perspective(k, gc, e);
        let f = |a: f64, b: f64| perspective(k, a, b).0;
        let eps = 1e-5;
        let dg = (f(gc + eps, e) - f(gc - eps, e)) / (2.0 * eps);
        let de = (f(gc, e + eps) - f(gc, e - eps)) / (2.0 * eps);
        assert!((dg - d[0]).abs() < 1e-8 && (de - d[1]).abs() < 1e-8);
        let dge = (perspective(k, gc, e + eps).1[0] - perspective(k, gc, e - eps).1[0]) / (2.0 * eps);
        assert!((dge - h[1]).abs() < 1e-7);
        assert!(h[0] <= 0.0 && h[2] <= 0.0 && h[0] * h[2] - h[1] * h[1] > -1e-12);
    }

    #[test]
    fn lp_keeps_feasibility_and_improves() {
        let mut cfg = default_scenario();
        cfg.gamma_c_th = 0.5;
        let model = LinkModel::new(&cfg);
        let mut plan = hover_plan(&cfg);
        let before = evaluate(&model, &cfg, &plan);
        assert!(before.violation[0] <= 1e-9 && before.violation[1] <= 1e-9 && before.violation[3] <= 1e-9);
        let gamma = time_allocation_lp(&model, &cfg, &plan, true).unwrap().unwrap();
        plan.gamma = gamma;
        let after = evaluate(&model, &cfg, &plan);
        assert!(after.feasible(1e-7), "{:?}", after.violation);
        assert!(after.objective >= before.objective);
        for n in 0..plan.num_slots() {
            assert!((plan.gamma[n].iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn refinement_moves_the_power_ratio() {
        let cfg = default_scenario();
        let model = LinkModel::new(&cfg);
        let mut plan = hover_plan(&cfg);
        let gamma = time_allocation_lp(&model, &cfg, &plan, false).unwrap().unwrap();
        plan.gamma = gamma;
        let lp_eval = evaluate(&model, &cfg, &plan);
        let changed = refine_time_power(&model, &cfg, &mut plan, true).unwrap();
        let ev = evaluate(&model, &cfg, &plan);
        assert!(changed);
        assert!(ev.feasible(1e-6), "{:?}", ev.violation);
        assert!(ev.objective > lp_eval.objective);
        // Against the per-slot optimum at the same positions.
        let n = 45;
        let u = plan.serve[n].unwrap();
        let b = cfg.buoy_position(u, n);
        let s = model.min_sensing_share(u, plan.pos[n], &b);
        let (best, _) = model.slot_rate_optimum(u, plan.pos[n], &b, s);
        assert!((ev.rate[n] - best).abs() < 2e-3 * best, "{} vs {best}", ev.rate[n]);
    }
}
