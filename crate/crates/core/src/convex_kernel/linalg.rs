//! Symmetric positive-definite Newton systems in two layouts: a dense matrix,
//! or a band plus low-rank outer products plus one optional border
//! variable (the phase-1 slack), solved by banded Cholesky and Woodbury.

use nalgebra::{DMatrix, DVector};

/// Receives Hessian contributions. Only the lower triangle (`i >= j`) is
/// passed; the off-diagonal value is the single symmetric entry.
pub trait HessianSink {
    fn add(&mut self, i: usize, j: usize, v: f64);
}

/// Lower band of an `n x n` symmetric matrix: `rows[i][k] = A[i][i-k]`.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    rows: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, rows: vec![0.0; n * (bw + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, k: usize) -> usize {
        i * (self.bw + 1) + k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.rows[self.idx(i, i - j)]
        }
    }

    /// Adds `v` at `(i, j)`; returns false if the entry lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) -> bool {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            return false;
        }
        let id = self.idx(i, i - j);
        self.rows[id] += v;
        true
    }

    pub fn max_diag(&self) -> f64 {
        (0..self.n).map(|i| self.rows[self.idx(i, 0)].abs()).fold(0.0, f64::max)
    }

    /// In-place Cholesky `A = L Lᵀ`. Pivots below `floor` are lifted to it.
    pub fn cholesky(mut self, floor: f64) -> BandCholesky {
        let (n, bw) = (self.n, self.bw);
        for j in 0..n {
            let lo = j.saturating_sub(bw);
            let mut d = self.rows[self.idx(j, 0)];
            for k in lo..j {
                let l = self.rows[self.idx(j, j - k)];
                d -= l * l;
            }
            let d = if d > floor { d.sqrt() } else { floor.sqrt() };
            let id = self.idx(j, 0);
            self.rows[id] = d;
            for i in (j + 1)..n.min(j + bw + 1) {
                let lo_i = i.saturating_sub(bw);
                let mut s = self.rows[self.idx(i, i - j)];
                for k in lo_i.max(lo)..j {
                    s -= self.rows[self.idx(i, i - k)] * self.rows[self.idx(j, j - k)];
                }
                let id = self.idx(i, i - j);
                self.rows[id] = s / d;
            }
        }
        BandCholesky { l: self }
    }
}

pub struct BandCholesky {
    l: BandMatrix,
}

impl BandCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.l.n, self.l.bw);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l.rows[self.l.idx(i, i - k)] * y[k];
            }
            y[i] = s / self.l.rows[self.l.idx(i, 0)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n.min(i + bw + 1) {
                s -= self.l.rows[self.l.idx(k, k - i)] * y[k];
            }
            y[i] = s / self.l.rows[self.l.idx(i, 0)];
        }
        y
    }
}

/// Newton-system matrix in one of the two layouts.
#[derive(Debug, Clone)]
pub enum KktMatrix {
    Dense(DMatrix<f64>),
    Banded {
        band: BandMatrix,
        /// Columns `u` with the matrix including `u uᵀ`.
        lowrank: Vec<Vec<f64>>,
        /// Coupling column and diagonal of a trailing border variable.
        border: Option<(Vec<f64>, f64)>,
    },
}

impl KktMatrix {
    pub fn dense(n: usize) -> Self {
        KktMatrix::Dense(DMatrix::zeros(n, n))
    }

    /// `n` counts the border variable when `with_border` is set.
    pub fn banded(n: usize, bw: usize, with_border: bool) -> Self {
        let core = if with_border { n - 1 } else { n };
        KktMatrix::Banded {
            band: BandMatrix::zeros(core, bw),
            lowrank: Vec::new(),
            border: with_border.then(|| (vec![0.0; core], 0.0)),
        }
    }

    fn core_dim(&self) -> usize {
        match self {
            KktMatrix::Dense(m) => m.nrows(),
            KktMatrix::Banded { band, .. } => band.dim(),
        }
    }

    /// Adds `w · g gᵀ` for a sparse vector `g` (`w >= 0`).
    pub fn add_outer(&mut self, g: &[(usize, f64)], w: f64) {
        match self {
            KktMatrix::Dense(m) => {
                for &(i, a) in g {
                    for &(j, b) in g {
                        m[(i, j)] += w * a * b;
                    }
                }
            }
            KktMatrix::Banded { band, lowrank, border } => {
                let core = band.dim();
                let (mut lo, mut hi) = (usize::MAX, 0);
                for &(i, _) in g {
                    if i < core {
                        lo = lo.min(i);
                        hi = hi.max(i);
                    }
                }
                let fits = lo == usize::MAX || hi - lo <= band.bandwidth();
                if fits {
                    for &(i, a) in g {
                        if i >= core {
                            continue;
                        }
                        for &(j, b) in g {
                            if j < core && j <= i {
                                band.add(i, j, w * a * b);
                            }
                        }
                    }
                } else {
                    let s = w.sqrt();
                    let mut col = vec![0.0; core];
                    for &(i, a) in g {
                        if i < core {
                            col[i] += s * a;
                        }
                    }
                    lowrank.push(col);
                }
                if let Some((col, diag)) = border {
                    let bi = g.iter().filter(|(i, _)| *i == core).map(|(_, v)| v).sum::<f64>();
                    if bi != 0.0 {
                        for &(i, a) in g {
                            if i < core {
                                col[i] += w * a * bi;
                            }
                        }
                        *diag += w * bi * bi;
                    }
                }
            }
        }
    }

    pub fn add_diag(&mut self, i: usize, v: f64) {
        HessianSink::add(self, i, i, v);
    }

    /// Solves `M x = b` after symmetric diagonal (Jacobi) scaling, adding
    /// `reg` to the unit diagonal of the scaled matrix for robustness.
    pub fn solve(&self, b: &[f64], reg: f64) -> Option<Vec<f64>> {
        let s: Vec<f64> = self
            .diagonal()
            .iter()
            .map(|&v| if v > 0.0 && v.is_finite() { 1.0 / v.sqrt() } else { 1.0 })
            .collect();
        let bs: Vec<f64> = b.iter().zip(&s).map(|(a, c)| a * c).collect();
        let y = self.scaled(&s).solve_unscaled(&bs, reg)?;
        Some(y.iter().zip(&s).map(|(a, c)| a * c).collect())
    }

    /// Full diagonal, including low-rank and border contributions.
    pub fn diagonal(&self) -> Vec<f64> {
        match self {
            KktMatrix::Dense(m) => (0..m.nrows()).map(|i| m[(i, i)]).collect(),
            KktMatrix::Banded { band, lowrank, border } => {
                let mut d: Vec<f64> = (0..band.dim()).map(|i| band.get(i, i)).collect();
                for col in lowrank {
                    for (di, c) in d.iter_mut().zip(col) {
                        *di += c * c;
                    }
                }
                if let Some((_, b)) = border {
                    d.push(*b);
                }
                d
            }
        }
    }

    /// `S M S` for the diagonal `S = diag(s)`.
    fn scaled(&self, s: &[f64]) -> KktMatrix {
        match self {
            KktMatrix::Dense(m) => {
                let mut out = m.clone();
                for i in 0..m.nrows() {
                    for j in 0..=i {
                        out[(i, j)] *= s[i] * s[j];
                    }
                }
                KktMatrix::Dense(out)
            }
            KktMatrix::Banded { band, lowrank, border } => {
                let core = band.dim();
                let bw = band.bandwidth();
                let mut nb = band.clone();
                for i in 0..core {
                    for j in i.saturating_sub(bw)..=i {
                        let id = nb.idx(i, i - j);
                        nb.rows[id] *= s[i] * s[j];
                    }
                }
                let lr = lowrank.iter().map(|c| c.iter().zip(s).map(|(a, b)| a * b).collect()).collect();
                let bd = border.as_ref().map(|(col, d)| {
                    let sc = s[core];
                    (col.iter().zip(s).map(|(a, b)| a * b * sc).collect(), d * sc * sc)
                });
                KktMatrix::Banded { band: nb, lowrank: lr, border: bd }
            }
        }
    }

    fn solve_unscaled(&self, b: &[f64], reg: f64) -> Option<Vec<f64>> {
        match self {
            KktMatrix::Dense(m) => {
                let n = m.nrows();
                let mut full = m.clone();
                for i in 0..n {
                    for j in 0..i {
                        // Only the lower triangle is filled.
                        full[(j, i)] = full[(i, j)];
                    }
                    full[(i, i)] += reg;
                }
                let chol = nalgebra::Cholesky::new(full.clone());
                let rhs = DVector::from_column_slice(b);
                match chol {
                    Some(c) => Some(c.solve(&rhs).as_slice().to_vec()),
                    None => full.lu().solve(&rhs).map(|v| v.as_slice().to_vec()),
                }
            }
            KktMatrix::Banded { band, lowrank, border } => {
                let core = band.dim();
                let mut shifted = band.clone();
                for i in 0..core {
                    shifted.add(i, i, reg);
                }
                let floor = 1e-14 * (1.0 + shifted.max_diag());
                let chol = shifted.cholesky(floor);
                let solve_a = woodbury(&chol, lowrank, core)?;
                match border {
                    None => Some(solve_a(&b[..core])),
                    Some((col, diag)) => {
                        let y1 = solve_a(&b[..core]);
                        let y2 = solve_a(col);
                        let schur = diag + reg - dot(col, &y2);
                        if !(schur > 0.0) {
                            return None;
                        }
                        let z = (b[core] - dot(col, &y1)) / schur;
                        let mut x: Vec<f64> = y1.iter().zip(&y2).map(|(a, c)| a - c * z).collect();
                        x.push(z);
                        Some(x)
                    }
                }
            }
        }
    }

    /// `M v` using the stored (lower-triangle) data.
    pub fn mul(&self, v: &[f64]) -> Vec<f64> {
        match self {
            KktMatrix::Dense(m) => {
                let n = m.nrows();
                let mut out = vec![0.0; n];
                for i in 0..n {
                    for j in 0..=i {
                        let a = m[(i, j)];
                        out[i] += a * v[j];
                        if i != j {
                            out[j] += a * v[i];
                        }
                    }
                }
                out
            }
            KktMatrix::Banded { band, lowrank, border } => {
                let core = band.dim();
                let mut out = vec![0.0; v.len()];
                for i in 0..core {
                    for j in i.saturating_sub(band.bandwidth())..=i {
                        let a = band.get(i, j);
                        out[i] += a * v[j];
                        if i != j {
                            out[j] += a * v[i];
                        }
                    }
                }
                for col in lowrank {
                    let s = dot(col, &v[..core]);
                    for i in 0..core {
                        out[i] += col[i] * s;
                    }
                }
                if let Some((col, diag)) = border {
                    let z = v[core];
                    for i in 0..core {
                        out[i] += col[i] * z;
                    }
                    out[core] = dot(col, &v[..core]) + diag * z;
                }
                out
            }
        }
    }

    pub fn max_diag(&self) -> f64 {
        match self {
            KktMatrix::Dense(m) => (0..m.nrows()).map(|i| m[(i, i)].abs()).fold(0.0, f64::max),
            KktMatrix::Banded { band, lowrank, border } => {
                let mut d = band.max_diag();
                for col in lowrank {
                    d = d.max(col.iter().map(|v| v * v).fold(0.0, f64::max));
                }
                if let Some((_, b)) = border {
                    d = d.max(b.abs());
                }
                d
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            KktMatrix::Dense(m) => m.nrows(),
            KktMatrix::Banded { border, .. } => self.core_dim() + usize::from(border.is_some()),
        }
    }
}

impl HessianSink for KktMatrix {
    fn add(&mut self, i: usize, j: usize, v: f64) {
        match self {
            KktMatrix::Dense(m) => {
                let (i, j) = if i >= j { (i, j) } else { (j, i) };
                m[(i, j)] += v;
            }
            KktMatrix::Banded { band, border, .. } => {
                let core = band.dim();
                let (i, j) = if i >= j { (i, j) } else { (j, i) };
                if i == core {
                    let (col, diag) = border.as_mut().expect("border entry without border variable");
                    if j == core {
                        *diag += v;
                    } else {
                        col[j] += v;
                    }
                } else {
                    assert!(band.add(i, j, v), "Hessian entry ({i},{j}) outside the declared band");
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Returns a solver for `(B + U Uᵀ) x = r` given the factor of `B`.
fn woodbury<'a>(
    chol: &'a BandCholesky,
    lowrank: &'a [Vec<f64>],
    core: usize,
) -> Option<impl Fn(&[f64]) -> Vec<f64> + 'a> {
    let k = lowrank.len();
    let binv_u: Vec<Vec<f64>> = lowrank.iter().map(|u| chol.solve(u)).collect();
    let mut cap = DMatrix::<f64>::identity(k, k);
    for a in 0..k {
        for b in 0..k {
            cap[(a, b)] += dot(&lowrank[a], &binv_u[b]);
        }
    }
    let lu = cap.lu();
    if k > 0 && !lu.is_invertible() {
        return None;
    }
    Some(move |r: &[f64]| {
        let y = chol.solve(r);
        if k == 0 {
            return y;
        }
        let t = DVector::from_iterator(k, lowrank.iter().map(|u| dot(u, &y)));
        let z = lu.solve(&t).unwrap_or_else(|| DVector::zeros(k));
        let mut x = y;
        for (c, col) in binv_u.iter().enumerate() {
            for i in 0..core {
                x[i] -= col[i] * z[c];
            }
        }
        x
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn residual(m: &KktMatrix, x: &[f64], b: &[f64]) -> f64 {
        m.mul(x).iter().zip(b).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn banded_with_lowrank_and_border_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 40;
        let bw = 3;
        let mut banded = KktMatrix::banded(n + 1, bw, true);
        let mut dense = KktMatrix::dense(n + 1);
        for i in 0..n {
            let v = 2.0 + rng.gen::<f64>();
            banded.add(i, i, v);
            dense.add(i, i, v);
        }
        for _ in 0..60 {
            let i = rng.gen_range(0..n);
            let j = i + rng.gen_range(0..=bw).min(n - 1 - i);
            let g = vec![(i, rng.gen::<f64>()), (j, rng.gen::<f64>()), (n, -1.0)];
            let g: Vec<_> = if i == j { vec![(i, g[0].1 + g[1].1), (n, -1.0)] } else { g };
            banded.add_outer(&g, 0.7);
            dense.add_outer(&g, 0.7);
        }
        for _ in 0..3 {
            let g: Vec<_> = (0..n).step_by(5).map(|i| (i, rng.gen::<f64>() - 0.5)).collect();
            banded.add_outer(&g, 1.3);
            dense.add_outer(&g, 1.3);
        }
        banded.add(n, n, 0.5);
        dense.add(n, n, 0.5);
        let b: Vec<f64> = (0..=n).map(|_| rng.gen::<f64>()).collect();
        let xb = banded.solve(&b, 0.0).unwrap();
        let xd = dense.solve(&b, 0.0).unwrap();
        assert!(residual(&dense, &xb, &b) < 1e-9);
        for (a, c) in xb.iter().zip(&xd) {
            assert!((a - c).abs() < 1e-9);
        }
    }

    #[test]
    fn band_cholesky_tridiagonal() {
        let n = 6;
        let mut m = BandMatrix::zeros(n, 1);
        for i in 0..n {
            m.add(i, i, 2.0);
            if i > 0 {
                m.add(i, i - 1, -1.0);
            }
        }
        let b = vec![1.0; n];
        let x = m.clone().cholesky(1e-300).solve(&b);
        for i in 0..n {
            let mut r = 2.0 * x[i];
            if i > 0 {
                r -= x[i - 1];
            }
            if i + 1 < n {
                r -= x[i + 1];
            }
            assert!((r - 1.0).abs() < 1e-12);
        }
    }
}
