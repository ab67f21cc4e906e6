//! Dense two-phase tableau simplex with Bland's rule (deterministic, no
//! cycling). Variables are shifted to their lower bounds; finite upper
//! bounds become explicit rows.

use super::{KktResidual, SolveResult, SolveStatus, SolverError, Sparse};

/// `maximize cᵀx  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  lo <= x <= hi`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub ub_rows: Vec<(Sparse, f64)>,
    pub eq_rows: Vec<(Sparse, f64)>,
    /// Per-variable bounds; lower bounds must be finite.
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    pub fn new(c: Vec<f64>) -> Self {
        let n = c.len();
        Self { c, ub_rows: Vec::new(), eq_rows: Vec::new(), bounds: vec![(0.0, f64::INFINITY); n] }
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }
}

const EPS: f64 = 1e-10;

struct Tableau {
    /// `rows x (cols + 1)`; last column is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let pr = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i != r {
                let f = row[c];
                if f != 0.0 {
                    for (v, &q) in row.iter_mut().zip(&pr) {
                        *v -= f * q;
                    }
                }
            }
        }
        self.basis[r] = c;
    }

    /// Maximizes `obj·x` over the current basis, entering only columns with
    /// `allowed[j]`. Returns false when unbounded.
    fn optimize(&mut self, obj: &[f64], allowed: &[bool], max_pivots: usize) -> Result<bool, SolverError> {
        for _ in 0..max_pivots {
            // Reduced costs d_j = obj_j - Σ obj_B(i) t[i][j]
            let mut enter = None;
            for j in 0..self.cols {
                if !allowed[j] || self.basis.contains(&j) {
                    continue;
                }
                let mut d = obj[j];
                for (i, &b) in self.basis.iter().enumerate() {
                    d -= obj[b] * self.t[i][j];
                }
                if d > EPS {
                    enter = Some(j);
                    break;
                }
            }
            let Some(j) = enter else { return Ok(true) };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.t.len() {
                let a = self.t[i][j];
                if a > EPS {
                    let ratio = self.t[i][self.cols] / a;
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => ratio < lr - EPS || (ratio <= lr + EPS && self.basis[i] < self.basis[li]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            match leave {
                None => return Ok(false),
                Some((i, _)) => self.pivot(i, j),
            }
        }
        Err(SolverError::Structure("simplex pivot limit reached".into()))
    }
}

/// Solves the LP exactly (up to round-off) at a vertex.
pub fn solve_lp(lp: &LinearProgram) -> Result<SolveResult, SolverError> {
    let n = lp.dim();
    if lp.bounds.len() != n {
        return Err(SolverError::DimensionMismatch("bounds length".into()));
    }
    for &(lo, hi) in &lp.bounds {
        if !lo.is_finite() {
            return Err(SolverError::Structure("lower bounds must be finite".into()));
        }
        if hi < lo {
            return Ok(infeasible(lp));
        }
    }
    // Rows in shifted variables y = x - lo, y >= 0.
    let mut rows: Vec<(Vec<f64>, f64, bool)> = Vec::new(); // (coeffs, rhs, is_eq)
    let shift = |coeffs: &Sparse, rhs: f64| {
        let mut dense = vec![0.0; n];
        let mut r = rhs;
        for &(i, a) in coeffs {
            dense[i] += a;
            r -= a * lp.bounds[i].0;
        }
        (dense, r)
    };
    for (c, b) in &lp.ub_rows {
        let (d, r) = shift(c, *b);
        rows.push((d, r, false));
    }
    for (i, &(lo, hi)) in lp.bounds.iter().enumerate() {
        if hi.is_finite() {
            let mut d = vec![0.0; n];
            d[i] = 1.0;
            rows.push((d, hi - lo, false));
        }
    }
    for (c, b) in &lp.eq_rows {
        let (d, r) = shift(c, *b);
        rows.push((d, r, true));
    }
    let m = rows.len();
    let n_slack = rows.iter().filter(|r| !r.2).count();
    // Columns: y (n), slacks (n_slack), artificials (m).
    let cols = n + n_slack + m;
    let mut t = vec![vec![0.0; cols + 1]; m];
    let mut basis = vec![0; m];
    let mut slack_col = n;
    for (i, (d, r, is_eq)) in rows.iter().enumerate() {
        let sign = if *r < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = sign * d[j];
        }
        if !is_eq {
            t[i][slack_col] = sign;
            slack_col += 1;
        }
        t[i][n + n_slack + i] = 1.0;
        t[i][cols] = sign * r;
        basis[i] = n + n_slack + i;
    }
    let mut tab = Tableau { t, basis, cols };
    let max_pivots = 50 * (cols + m).max(10);

    // Phase 1: maximize -Σ artificials.
    let mut obj1 = vec![0.0; cols];
    for j in (n + n_slack)..cols {
        obj1[j] = -1.0;
    }
    let all = vec![true; cols];
    tab.optimize(&obj1, &all, max_pivots)?;
    let infeas: f64 = tab.basis.iter().enumerate().filter(|(_, &b)| b >= n + n_slack).map(|(i, _)| tab.t[i][cols]).sum();
    let scale = 1.0 + rows.iter().map(|r| r.1.abs()).fold(0.0, f64::max);
    if infeas > 1e-9 * scale {
        return Ok(infeasible(lp));
    }
    // Drive remaining (zero-level) artificials out of the basis.
    for i in 0..m {
        if tab.basis[i] >= n + n_slack {
            if let Some(j) = (0..n + n_slack).find(|&j| tab.t[i][j].abs() > 1e-9 && !tab.basis.contains(&j)) {
                tab.pivot(i, j);
            }
        }
    }
    // Phase 2.
    let mut obj2 = vec![0.0; cols];
    obj2[..n].copy_from_slice(&lp.c);
    let mut allowed = vec![true; cols];
    for a in allowed.iter_mut().skip(n + n_slack) {
        *a = false;
    }
    let bounded = tab.optimize(&obj2, &allowed, max_pivots)?;
    let mut x: Vec<f64> = lp.bounds.iter().map(|b| b.0).collect();
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] += tab.t[i][cols];
        }
    }
    let objective = lp.c.iter().zip(&x).map(|(a, b)| a * b).sum();
    let primal = primal_violation(lp, &x);
    Ok(SolveResult {
        x,
        objective,
        status: if bounded { SolveStatus::Optimal } else { SolveStatus::Unbounded },
        kkt: KktResidual { stationarity: 0.0, primal, gap: 0.0 },
        newton_steps: 0,
        phase1_slack: Some(infeas),
        duals: Vec::new(),
    })
}

fn infeasible(lp: &LinearProgram) -> SolveResult {
    SolveResult {
        x: lp.bounds.iter().map(|b| b.0).collect(),
        objective: f64::NAN,
        status: SolveStatus::Infeasible,
        kkt: KktResidual::default(),
        newton_steps: 0,
        phase1_slack: None,
        duals: Vec::new(),
    }
}

pub(crate) fn primal_violation(lp: &LinearProgram, x: &[f64]) -> f64 {
    let dot = |c: &Sparse| c.iter().map(|&(i, a)| a * x[i]).sum::<f64>();
    let mut v: f64 = 0.0;
    for (c, b) in &lp.ub_rows {
        v = v.max(dot(c) - b);
    }
    for (c, b) in &lp.eq_rows {
        v = v.max((dot(c) - b).abs());
    }
    for (xi, &(lo, hi)) in x.iter().zip(&lp.bounds) {
        v = v.max(lo - xi).max(xi - hi);
    }
    v.max(0.0)
}
