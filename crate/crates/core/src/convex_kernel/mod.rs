//! A small self-contained convex solver for the subproblems the planner
//! generates: a log-barrier interior-point method for concave maximization,
//! a tableau simplex for linear programs and a water-filling solver for
//! separable quadratics over the simplex.

mod barrier;
pub mod linalg;
mod lp;
mod simplex_qp;

pub use barrier::solve_concave;
pub use linalg::HessianSink;
pub use lp::{solve_lp, LinearProgram};
pub use simplex_qp::{simplex_qp_kkt_violation, solve_simplex_qp};

use thiserror::Error;

/// Sparse vector as `(index, value)` pairs; repeated indices add up.
pub type Sparse = Vec<(usize, f64)>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value from {0}")]
    NonFinite(&'static str),
    #[error("Newton system could not be factorized")]
    Singular,
    #[error("unsupported structure: {0}")]
    Structure(String),
}

/// Concave function to maximize.
pub trait ConcaveObjective {
    fn value(&self, x: &[f64]) -> f64;
    /// Writes the dense gradient into `g` (already zeroed).
    fn gradient(&self, x: &[f64], g: &mut [f64]);
    /// Adds `scale · ∇²f(x)` (lower triangle) to `h`.
    fn hessian(&self, x: &[f64], scale: f64, h: &mut dyn HessianSink);
}

/// Convex function `g` defining the constraint `g(x) <= 0`.
pub trait ConvexConstraint {
    fn value(&self, x: &[f64]) -> f64;
    /// Appends the sparse gradient to `out` (already cleared).
    fn gradient(&self, x: &[f64], out: &mut Sparse);
    /// Adds `scale · ∇²g(x)` (lower triangle) to `h`. Affine rows add nothing.
    fn hessian(&self, _x: &[f64], _scale: f64, _h: &mut dyn HessianSink) {}
}

/// `a·x - b <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineRow {
    pub coeffs: Sparse,
    pub rhs: f64,
}

impl AffineRow {
    /// Rescales to unit infinity-norm so rows in mixed units weigh alike.
    pub fn normalized(mut self) -> Self {
        let m = self.coeffs.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);
        if m > 0.0 && m.is_finite() {
            for c in &mut self.coeffs {
                c.1 /= m;
            }
            self.rhs /= m;
        }
        self
    }
}

impl ConvexConstraint for AffineRow {
    fn value(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(i, a)| a * x[i]).sum::<f64>() - self.rhs
    }
    fn gradient(&self, _x: &[f64], out: &mut Sparse) {
        out.extend_from_slice(&self.coeffs);
    }
}

/// `Σ_r (a_r·x + b_r)² + l·x - c <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticConstraint {
    pub rows: Vec<(Sparse, f64)>,
    pub linear: Sparse,
    pub c: f64,
}

impl QuadraticConstraint {
    /// `‖x[idx] - center‖² <= radius²`.
    pub fn ball(idx: &[usize], center: &[f64], radius: f64) -> Self {
        Self {
            rows: idx.iter().zip(center).map(|(&i, &c)| (vec![(i, 1.0)], -c)).collect(),
            linear: Vec::new(),
            c: radius * radius,
        }
    }
}

impl ConvexConstraint for QuadraticConstraint {
    fn value(&self, x: &[f64]) -> f64 {
        let q: f64 = self
            .rows
            .iter()
            .map(|(a, b)| {
                let r = a.iter().map(|&(i, v)| v * x[i]).sum::<f64>() + b;
                r * r
            })
            .sum();
        q + self.linear.iter().map(|&(i, a)| a * x[i]).sum::<f64>() - self.c
    }
    fn gradient(&self, x: &[f64], out: &mut Sparse) {
        for (a, b) in &self.rows {
            let r = a.iter().map(|&(i, v)| v * x[i]).sum::<f64>() + b;
            out.extend(a.iter().map(|&(i, v)| (i, 2.0 * r * v)));
        }
        out.extend_from_slice(&self.linear);
    }
    fn hessian(&self, _x: &[f64], scale: f64, h: &mut dyn HessianSink) {
        for (a, _) in &self.rows {
            for &(i, u) in a {
                for &(j, v) in a {
                    if j <= i {
                        h.add(i, j, 2.0 * scale * u * v);
                    }
                }
            }
        }
    }
}

/// Separable concave quadratic `Σ (q_i x_i² + l_i x_i)` with `q_i <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableQuadratic {
    pub quad: Vec<f64>,
    pub lin: Vec<f64>,
}

impl ConcaveObjective for SeparableQuadratic {
    fn value(&self, x: &[f64]) -> f64 {
        x.iter().enumerate().map(|(i, &v)| self.quad[i] * v * v + self.lin[i] * v).sum()
    }
    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        for (i, &v) in x.iter().enumerate() {
            g[i] = 2.0 * self.quad[i] * v + self.lin[i];
        }
    }
    fn hessian(&self, _x: &[f64], scale: f64, h: &mut dyn HessianSink) {
        for (i, &q) in self.quad.iter().enumerate() {
            if q != 0.0 {
                h.add(i, i, 2.0 * scale * q);
            }
        }
    }
}

/// Concave quadratic `-½ xᵀ Q x + cᵀ x` with dense PSD `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseQuadratic {
    pub q: Vec<Vec<f64>>,
    pub c: Vec<f64>,
}

impl ConcaveObjective for DenseQuadratic {
    fn value(&self, x: &[f64]) -> f64 {
        let mut v = 0.0;
        for i in 0..x.len() {
            v += self.c[i] * x[i];
            for j in 0..x.len() {
                v -= 0.5 * x[i] * self.q[i][j] * x[j];
            }
        }
        v
    }
    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        for i in 0..x.len() {
            g[i] = self.c[i] - (0..x.len()).map(|j| self.q[i][j] * x[j]).sum::<f64>();
        }
    }
    fn hessian(&self, _x: &[f64], scale: f64, h: &mut dyn HessianSink) {
        for i in 0..self.c.len() {
            for j in 0..=i {
                h.add(i, j, -scale * self.q[i][j]);
            }
        }
    }
}

/// Linear objective `cᵀ x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearObjective(pub Vec<f64>);

impl ConcaveObjective for LinearObjective {
    fn value(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(a, b)| a * b).sum()
    }
    fn gradient(&self, _x: &[f64], g: &mut [f64]) {
        g.copy_from_slice(&self.0);
    }
    fn hessian(&self, _x: &[f64], _scale: f64, _h: &mut dyn HessianSink) {}
}

/// How the Newton matrix is stored and factorized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    Dense,
    /// Band half-width; constraint gradients that spread wider are kept
    /// as low-rank terms.
    Banded(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub kkt_tol: f64,
    pub max_newton: usize,
    pub mu: f64,
    /// Phase-1 optimum above this certifies infeasibility.
    pub infeasible_threshold: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { feas_tol: 1e-7, gap_tol: 1e-7, kkt_tol: 1e-6, max_newton: 200, mu: 20.0, infeasible_threshold: 1e-7 }
    }
}

/// Maximize a concave objective subject to convex inequalities and affine
/// equalities.
pub struct ConvexProgram<'a> {
    pub dim: usize,
    pub objective: Box<dyn ConcaveObjective + 'a>,
    pub constraints: Vec<Box<dyn ConvexConstraint + 'a>>,
    pub equalities: Vec<AffineRow>,
    pub structure: Structure,
    pub options: SolverOptions,
    pub start: Option<Vec<f64>>,
}

impl<'a> ConvexProgram<'a> {
    pub fn new(dim: usize, objective: impl ConcaveObjective + 'a) -> Self {
        Self {
            dim,
            objective: Box::new(objective),
            constraints: Vec::new(),
            equalities: Vec::new(),
            structure: Structure::Dense,
            options: SolverOptions::default(),
            start: None,
        }
    }

    pub fn banded(mut self, bw: usize) -> Self {
        self.structure = Structure::Banded(bw);
        self
    }

    pub fn with_start(mut self, x0: Vec<f64>) -> Self {
        self.start = Some(x0);
        self
    }

    pub fn with_options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }

    /// Adds `a·x <= b`, normalized to unit infinity-norm.
    pub fn add_affine(&mut self, coeffs: Sparse, rhs: f64) {
        self.constraints.push(Box::new(AffineRow { coeffs, rhs }.normalized()));
    }

    pub fn add_box(&mut self, i: usize, lo: f64, hi: f64) {
        if lo.is_finite() {
            self.add_affine(vec![(i, -1.0)], -lo);
        }
        if hi.is_finite() {
            self.add_affine(vec![(i, 1.0)], hi);
        }
    }

    pub fn add_quadratic(&mut self, q: QuadraticConstraint) {
        self.constraints.push(Box::new(q));
    }

    pub fn add_constraint(&mut self, g: impl ConvexConstraint + 'a) {
        self.constraints.push(Box::new(g));
    }

    /// Adds `a·x = b`; dense structure only.
    pub fn add_equality(&mut self, coeffs: Sparse, rhs: f64) {
        self.equalities.push(AffineRow { coeffs, rhs }.normalized());
    }

    /// Largest relative mismatch between the objective gradient and central
    /// differences at `x`.
    pub fn objective_gradient_error(&self, x: &[f64], step: f64) -> f64 {
        let mut g = vec![0.0; self.dim];
        self.objective.gradient(x, &mut g);
        let mut worst: f64 = 0.0;
        let mut xp = x.to_vec();
        for i in 0..self.dim {
            let h = step * x[i].abs().max(1.0);
            xp[i] = x[i] + h;
            let fp = self.objective.value(&xp);
            xp[i] = x[i] - h;
            let fm = self.objective.value(&xp);
            xp[i] = x[i];
            let fd = (fp - fm) / (2.0 * h);
            worst = worst.max((fd - g[i]).abs() / g[i].abs().max(fd.abs()).max(1e-8));
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIters,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResidual {
    /// Infinity norm of `∇f - Σ λ_i ∇g_i - Aᵀν`.
    pub stationarity: f64,
    /// Largest constraint violation.
    pub primal: f64,
    /// Duality-gap proxy `m / t`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub kkt: KktResidual,
    pub newton_steps: usize,
    /// Optimal phase-1 slack when phase 1 ran.
    pub phase1_slack: Option<f64>,
    /// Inequality multipliers at the returned point.
    pub duals: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_normalization() {
        let r = AffineRow { coeffs: vec![(0, 1e-3), (1, -4e-3)], rhs: 2e-3 }.normalized();
        assert_eq!(r.coeffs, vec![(0, 0.25), (1, -1.0)]);
        assert!((r.rhs - 0.5).abs() < 1e-15);
    }

    #[test]
    fn quadratic_gradient_matches_differences() {
        let q = QuadraticConstraint {
            rows: vec![(vec![(0, 1.0), (1, 2.0)], -1.0), (vec![(2, 3.0)], 0.5)],
            linear: vec![(1, 0.3)],
            c: 4.0,
        };
        let x = [0.3, -0.7, 1.1];
        let mut g = Vec::new();
        q.gradient(&x, &mut g);
        let mut dense = [0.0; 3];
        for (i, v) in g {
            dense[i] += v;
        }
        for i in 0..3 {
            let mut p = x;
            let mut m = x;
            p[i] += 1e-6;
            m[i] -= 1e-6;
            let fd = (q.value(&p) - q.value(&m)) / 2e-6;
            assert!((fd - dense[i]).abs() < 1e-6);
        }
    }
}
