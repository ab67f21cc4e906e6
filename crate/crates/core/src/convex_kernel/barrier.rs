//! Log-barrier interior-point method with a slack-variable phase 1.

use nalgebra::{DMatrix, DVector};

use super::linalg::{HessianSink, KktMatrix};
use super::{
    AffineRow, ConvexProgram, KktResidual, SolveResult, SolveStatus, SolverError, SolverOptions, Sparse, Structure,
};

/// Phase 1 stops early once every constraint holds with this margin.
const PHASE1_MARGIN: f64 = 1e-4;
const NEWTON_TOL: f64 = 1e-10;
const ARMIJO: f64 = 0.01;

/// The problem the barrier loop sees: either the user program, or its
/// phase-1 form `min s  s.t.  g_i(x) <= s, s >= -1` with `s` appended.
struct View<'p, 'a> {
    prog: &'p ConvexProgram<'a>,
    phase1: bool,
    /// Constraints are enforced as `g_i(x) <= shift`.
    shift: f64,
}

impl View<'_, '_> {
    fn n(&self) -> usize {
        self.prog.dim + usize::from(self.phase1)
    }

    fn m(&self) -> usize {
        self.prog.constraints.len() + usize::from(self.phase1)
    }

    fn slack(&self, x: &[f64]) -> f64 {
        if self.phase1 {
            x[self.prog.dim]
        } else {
            0.0
        }
    }

    fn objective(&self, x: &[f64]) -> f64 {
        if self.phase1 {
            -self.slack(x)
        } else {
            self.prog.objective.value(x)
        }
    }

    fn objective_grad(&self, x: &[f64], g: &mut [f64]) {
        g.iter_mut().for_each(|v| *v = 0.0);
        if self.phase1 {
            g[self.prog.dim] = -1.0;
        } else {
            self.prog.objective.gradient(x, g);
        }
    }

    fn constraint(&self, i: usize, x: &[f64]) -> f64 {
        let nc = self.prog.constraints.len();
        if i == nc {
            return -x[self.prog.dim] - 1.0;
        }
        self.prog.constraints[i].value(x) - self.shift - self.slack(x)
    }

    fn constraint_grad(&self, i: usize, x: &[f64], out: &mut Sparse) {
        out.clear();
        let nc = self.prog.constraints.len();
        if i == nc {
            out.push((self.prog.dim, -1.0));
            return;
        }
        self.prog.constraints[i].gradient(x, out);
        if self.phase1 {
            out.push((self.prog.dim, -1.0));
        }
    }

    fn constraint_hess(&self, i: usize, x: &[f64], scale: f64, h: &mut dyn HessianSink) {
        if i < self.prog.constraints.len() {
            self.prog.constraints[i].hessian(x, scale, h);
        }
    }

    fn values(&self, x: &[f64]) -> Vec<f64> {
        (0..self.m()).map(|i| self.constraint(i, x)).collect()
    }

    /// Barrier merit `-t f(x) - Σ log(-g_i(x))`; infinite outside the domain.
    fn merit(&self, x: &[f64], t: f64) -> f64 {
        let mut v = -t * self.objective(x);
        for i in 0..self.m() {
            let g = self.constraint(i, x);
            if !(g < 0.0) {
                return f64::INFINITY;
            }
            v -= (-g).ln();
        }
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    }
}

fn project_equalities(x: &mut [f64], eqs: &[AffineRow]) -> Result<(), SolverError> {
    if eqs.is_empty() {
        return Ok(());
    }
    let n = x.len();
    let mut a = DMatrix::<f64>::zeros(eqs.len(), n);
    let mut r = DVector::<f64>::zeros(eqs.len());
    for (k, e) in eqs.iter().enumerate() {
        for &(i, v) in &e.coeffs {
            a[(k, i)] += v;
        }
        r[k] = e.rhs - e.coeffs.iter().map(|&(i, v)| v * x[i]).sum::<f64>();
    }
    let svd = a.clone().svd(true, true);
    let corr = svd.solve(&r, 1e-12).map_err(|_| SolverError::Singular)?;
    for i in 0..n {
        x[i] += corr[i];
    }
    Ok(())
}

struct Outcome {
    x: Vec<f64>,
    t: f64,
    steps: usize,
    status: SolveStatus,
}

/// Runs barrier centering + path following from a strictly feasible `x`.
fn barrier_loop(view: &View, mut x: Vec<f64>, budget: usize, opts: &SolverOptions) -> Result<Outcome, SolverError> {
    let n = view.n();
    let m = view.m() as f64;
    let eqs = &view.prog.equalities;
    let dense = !eqs.is_empty() || view.prog.structure == Structure::Dense;
    let bw = match view.prog.structure {
        Structure::Banded(b) => b,
        Structure::Dense => 0,
    };
    let f0 = view.objective(&x);
    if !f0.is_finite() {
        return Err(SolverError::NonFinite("objective at the starting point"));
    }
    let mut t = if m > 0.0 { (m / (1.0 + f0.abs())).max(1e-3) } else { 1.0 };
    let mut steps = 0;
    let mut grad = vec![0.0; n];
    let mut gbuf: Sparse = Vec::new();
    loop {
        // Centering.
        loop {
            if view.phase1 && view.slack(&x) < -PHASE1_MARGIN {
                return Ok(Outcome { x, t, steps, status: SolveStatus::Optimal });
            }
            let gvals = view.values(&x);
            view.objective_grad(&x, &mut grad);
            let mut rhs: Vec<f64> = grad.iter().map(|g| t * g).collect();
            let mut h = if dense { KktMatrix::dense(n) } else { KktMatrix::banded(n, bw, view.phase1) };
            if !view.phase1 {
                view.prog.objective.hessian(&x, -t, &mut h);
            }
            for (i, &gi) in gvals.iter().enumerate() {
                let inv = 1.0 / (-gi);
                view.constraint_grad(i, &x, &mut gbuf);
                for &(j, v) in &gbuf {
                    rhs[j] -= v * inv;
                }
                h.add_outer(&gbuf, inv * inv);
                view.constraint_hess(i, &x, inv, &mut h);
            }
            // rhs = -(gradient of the merit)
            let reg = 1e-13;
            let dx = if eqs.is_empty() {
                h.solve(&rhs, reg).ok_or(SolverError::Singular)?
            } else {
                solve_with_equalities(&h, &rhs, eqs, reg)?
            };
            if dx.iter().any(|v| !v.is_finite()) {
                return Err(SolverError::Singular);
            }
            let dec2: f64 = rhs.iter().zip(&dx).map(|(a, b)| a * b).sum();
            if dec2 / 2.0 <= NEWTON_TOL {
                break;
            }
            let phi0 = view.merit(&x, t);
            let mut step = 1.0;
            let mut trial = vec![0.0; n];
            let accepted = loop {
                for i in 0..n {
                    trial[i] = x[i] + step * dx[i];
                }
                let phi = view.merit(&trial, t);
                if phi.is_finite() && phi <= phi0 - ARMIJO * step * dec2 {
                    break Some(phi);
                }
                step *= 0.5;
                if step < 1e-14 {
                    break None;
                }
            };
            steps += 1;
            // No further progress possible at this t (or only at roundoff
            // level of the merit); treat as centered.
            let Some(phi) = accepted else { break };
            std::mem::swap(&mut x, &mut trial);
            if phi0 - phi <= 1e-13 * phi0.abs().max(1.0) {
                break;
            }
            if steps >= budget {
                return Ok(Outcome { x, t, steps, status: SolveStatus::MaxIters });
            }
        }
        let f = view.objective(&x);
        if m == 0.0 || m / t <= opts.gap_tol * f.abs().max(1.0) {
            return Ok(Outcome { x, t, steps, status: SolveStatus::Optimal });
        }
        t *= opts.mu;
    }
}

fn solve_with_equalities(h: &KktMatrix, rhs: &[f64], eqs: &[AffineRow], reg: f64) -> Result<Vec<f64>, SolverError> {
    let n = rhs.len();
    let k = eqs.len();
    let mut kkt = DMatrix::<f64>::zeros(n + k, n + k);
    let hm = match h {
        KktMatrix::Dense(m) => m,
        _ => return Err(SolverError::Structure("equalities need the dense layout".into())),
    };
    for i in 0..n {
        for j in 0..=i {
            kkt[(i, j)] = hm[(i, j)];
            kkt[(j, i)] = hm[(i, j)];
        }
        kkt[(i, i)] += reg * hm[(i, i)].abs().max(1e-300);
    }
    for (r, e) in eqs.iter().enumerate() {
        for &(i, v) in &e.coeffs {
            kkt[(n + r, i)] += v;
            kkt[(i, n + r)] += v;
        }
    }
    let mut b = DVector::<f64>::zeros(n + k);
    for i in 0..n {
        b[i] = rhs[i];
    }
    let sol = kkt.lu().solve(&b).ok_or(SolverError::Singular)?;
    Ok(sol.as_slice()[..n].to_vec())
}

fn kkt_report(prog: &ConvexProgram, x: &[f64], t: f64, shift: f64) -> (KktResidual, Vec<f64>) {
    let n = prog.dim;
    let mut r = vec![0.0; n];
    prog.objective.gradient(x, &mut r);
    let gnorm = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut duals = Vec::with_capacity(prog.constraints.len());
    let mut primal: f64 = 0.0;
    let mut buf = Vec::new();
    for c in &prog.constraints {
        let g = c.value(x);
        primal = primal.max(g);
        let lam = if g - shift < 0.0 { 1.0 / (t * (shift - g)) } else { 0.0 };
        duals.push(lam);
        buf.clear();
        c.gradient(x, &mut buf);
        for &(i, v) in &buf {
            r[i] -= lam * v;
        }
    }
    for e in &prog.equalities {
        let v = e.coeffs.iter().map(|&(i, a)| a * x[i]).sum::<f64>() - e.rhs;
        primal = primal.max(v.abs());
    }
    if !prog.equalities.is_empty() {
        let mut a = DMatrix::<f64>::zeros(n, prog.equalities.len());
        for (k, e) in prog.equalities.iter().enumerate() {
            for &(i, v) in &e.coeffs {
                a[(i, k)] += v;
            }
        }
        let rv = DVector::from_column_slice(&r);
        if let Ok(nu) = a.clone().svd(true, true).solve(&rv, 1e-12) {
            let fit = &a * nu;
            for i in 0..n {
                r[i] -= fit[i];
            }
        }
    }
    let stat = r.iter().fold(0.0f64, |a, v| a.max(v.abs())) / gnorm.max(1.0);
    let gap = if prog.constraints.is_empty() { 0.0 } else { prog.constraints.len() as f64 / t };
    (KktResidual { stationarity: stat, primal: primal.max(0.0), gap }, duals)
}

/// Maximizes the program's concave objective. Runs a slack phase 1 when the
/// start point is not strictly feasible; reports `Infeasible` when the
/// phase-1 optimum exceeds `options.infeasible_threshold`.
pub fn solve_concave(prog: &ConvexProgram) -> Result<SolveResult, SolverError> {
    let n = prog.dim;
    let opts = prog.options;
    let mut x = match &prog.start {
        Some(s) if s.len() != n => {
            return Err(SolverError::DimensionMismatch(format!("start has {} entries, program {}", s.len(), n)))
        }
        Some(s) => s.clone(),
        None => vec![0.0; n],
    };
    if !prog.equalities.is_empty() && prog.structure != Structure::Dense {
        return Err(SolverError::Structure("equalities need the dense layout".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::NonFinite("starting point"));
    }
    project_equalities(&mut x, &prog.equalities)?;

    let gmax = prog.constraints.iter().map(|c| c.value(&x)).fold(f64::NEG_INFINITY, f64::max);
    if gmax.is_nan() {
        return Err(SolverError::NonFinite("constraint at the starting point"));
    }
    let mut steps = 0;
    let mut phase1_slack = None;
    let mut shift = 0.0;
    if gmax >= -1e-12 {
        let view = View { prog, phase1: true, shift: 0.0 };
        let mut z = x.clone();
        z.push(gmax.max(0.0) + 1.0);
        let out = barrier_loop(&view, z, opts.max_newton, &opts)?;
        steps += out.steps;
        let xs = out.x;
        let s_star = prog.constraints.iter().map(|c| c.value(&xs[..n])).fold(f64::NEG_INFINITY, f64::max);
        phase1_slack = Some(s_star);
        x = xs[..n].to_vec();
        if s_star > opts.infeasible_threshold {
            let objective = prog.objective.value(&x);
            let (kkt, duals) = kkt_report(prog, &x, out.t, 0.0);
            return Ok(SolveResult {
                x,
                objective,
                status: SolveStatus::Infeasible,
                kkt,
                newton_steps: steps,
                phase1_slack,
                duals,
            });
        }
        if s_star > -1e-10 {
            // No strict interior to speak of: allow the tolerated violation.
            shift = s_star.max(0.0) + 0.1 * opts.feas_tol;
        }
        if out.status == SolveStatus::MaxIters && s_star >= 0.0 && shift == 0.0 {
            return Err(SolverError::Singular);
        }
    }
    let view = View { prog, phase1: false, shift };
    let budget = opts.max_newton.saturating_sub(steps).max(1);
    let out = barrier_loop(&view, x, budget, &opts)?;
    steps += out.steps;
    let objective = prog.objective.value(&out.x);
    if !objective.is_finite() {
        return Err(SolverError::NonFinite("objective"));
    }
    let (kkt, duals) = kkt_report(prog, &out.x, out.t, shift);
    Ok(SolveResult { x: out.x, objective, status: out.status, kkt, newton_steps: steps, phase1_slack, duals })
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;

    #[test]
    fn interior_optimum_of_negative_norm() {
        let obj = SeparableQuadratic { quad: vec![-1.0, -1.0], lin: vec![0.0, 0.0] };
        let mut p = ConvexProgram::new(2, obj);
        p.add_box(0, -1.0, 1.0);
        p.add_box(1, -1.0, 1.0);
        let r = solve_concave(&p).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!(r.x.iter().all(|v| v.abs() < 1e-6), "{:?}", r.x);
    }

    #[test]
    fn lp_vertex_through_phase_one() {
        let mut p = ConvexProgram::new(2, LinearObjective(vec![1.0, 1.0])).with_start(vec![5.0, 5.0]);
        p.add_affine(vec![(0, 1.0), (1, 1.0)], 1.0);
        p.add_box(0, 0.0, f64::INFINITY);
        p.add_box(1, 0.0, f64::INFINITY);
        let r = solve_concave(&p).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective - 1.0).abs() < 1e-6);
        assert!(r.phase1_slack.unwrap() < 0.0);
        assert!(r.kkt.stationarity < 1e-6, "{:?}", r.kkt);
    }

    #[test]
    fn infeasible_certificate() {
        let mut p = ConvexProgram::new(1, LinearObjective(vec![1.0]));
        p.add_box(0, 2.0, 1.0);
        let r = solve_concave(&p).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert!(r.phase1_slack.unwrap() > p.options.infeasible_threshold);
    }

    #[test]
    fn equality_constrained_quadratic() {
        // max -(x² + y² + z²) s.t. x + y + z = 3 → (1,1,1)
        let obj = SeparableQuadratic { quad: vec![-1.0; 3], lin: vec![0.0; 3] };
        let mut p = ConvexProgram::new(3, obj);
        p.add_equality(vec![(0, 1.0), (1, 1.0), (2, 1.0)], 3.0);
        p.add_box(0, -10.0, 10.0);
        let r = solve_concave(&p).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        for v in &r.x {
            assert!((v - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn ball_constraint_banded_matches_dense() {
        let build = |banded: bool| {
            let obj = LinearObjective(vec![1.0, 2.0, 0.5, -1.0, 0.3, 0.7]);
            let mut p = ConvexProgram::new(6, obj);
            if banded {
                p = p.banded(2);
            }
            for k in 0..3 {
                p.add_quadratic(QuadraticConstraint::ball(&[2 * k, 2 * k + 1], &[k as f64, 0.0], 1.0));
            }
            // a wide row that cannot live in the band
            p.add_affine(vec![(0, 1.0), (5, 1.0)], 0.5);
            solve_concave(&p).unwrap()
        };
        let a = build(false);
        let b = build(true);
        assert_eq!(a.status, SolveStatus::Optimal);
        assert_eq!(b.status, SolveStatus::Optimal);
        assert!((a.objective - b.objective).abs() < 1e-7, "{} {}", a.objective, b.objective);
    }

    #[test]
    fn deterministic() {
        let build = || {
            let obj = SeparableQuadratic { quad: vec![-0.5, -2.0], lin: vec![1.0, 3.0] };
            let mut p = ConvexProgram::new(2, obj).with_start(vec![3.0, -2.0]);
            p.add_affine(vec![(0, 1.0), (1, 2.0)], 1.0);
            p.add_box(0, -1.0, 1.0);
            solve_concave(&p).unwrap()
        };
        let (a, b) = (build(), build());
        assert_eq!(a.x, b.x);
        assert_eq!(a.newton_steps, b.newton_steps);
    }
}
