//! Separable concave quadratic over the capped simplex
//! `{0 <= α_i <= cap_i, Σ α_i <= 1}` by water-filling on the multiplier of
//! the sum constraint.

/// Maximizes `Σ (lin_i α_i + quad_i α_i²)` with `quad_i <= 0`.
///
/// For a multiplier `μ >= 0` each coordinate takes
/// `clamp((lin_i - μ) / (-2 quad_i), 0, cap_i)`; linear coordinates take
/// their cap when `lin_i > μ`. The smallest `μ` meeting `Σ α <= 1` is found
/// among the exact breakpoints; at a breakpoint shared by linear
/// coordinates, the remaining budget goes to them in index order.
pub fn solve_simplex_qp(lin: &[f64], quad: &[f64], cap: &[f64]) -> Vec<f64> {
    let n = lin.len();
    assert!(quad.len() == n && cap.len() == n, "coefficient lengths differ");
    let at = |mu: f64| -> Vec<f64> {
        (0..n)
            .map(|i| {
                if quad[i] < 0.0 {
                    ((lin[i] - mu) / (-2.0 * quad[i])).clamp(0.0, cap[i])
                } else if lin[i] > mu {
                    cap[i]
                } else {
                    0.0
                }
            })
            .collect()
    };
    let total = |a: &[f64]| a.iter().sum::<f64>();

    let free = at(0.0);
    if total(&free) <= 1.0 {
        return free;
    }
    // Breakpoints of the piecewise-linear total in μ.
    let mut bps: Vec<f64> = Vec::new();
    for i in 0..n {
        if quad[i] < 0.0 {
            bps.push(lin[i]);
            bps.push(lin[i] + 2.0 * quad[i] * cap[i]);
        } else {
            bps.push(lin[i]);
        }
    }
    bps.retain(|&b| b > 0.0);
    bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bps.dedup();
    // Find the bracket [lo, hi] with total(lo) >= 1 >= total(hi).
    let mut lo = 0.0;
    let mut hi = f64::NAN;
    for &b in &bps {
        let s = total(&at(b));
        if s <= 1.0 {
            hi = b;
            break;
        }
        lo = b;
    }
    if hi.is_nan() {
        hi = lo;
    }
    let a_lo = at(lo);
    let a_hi = at(hi);
    // Linear coordinates that switch exactly at `hi` (lin_i == hi).
    let jump: Vec<usize> = (0..n).filter(|&i| quad[i] >= 0.0 && lin[i] == hi && cap[i] > 0.0).collect();
    let s_hi = total(&a_hi);
    // Total just below `hi` (jump coordinates still at cap).
    let s_below_hi = s_hi + jump.iter().map(|&i| cap[i]).sum::<f64>();
    if !jump.is_empty() && s_below_hi >= 1.0 && s_hi <= 1.0 {
        let mut out = a_hi;
        let mut left = 1.0 - s_hi;
        for i in jump {
            let v = cap[i].min(left);
            out[i] = v;
            left -= v;
        }
        return out;
    }
    // Otherwise the total is continuous on [lo, hi]: interpolate μ.
    let s_lo = total(&a_lo);
    let mu = if (s_lo - s_hi).abs() < 1e-300 { hi } else { lo + (s_lo - 1.0) / (s_lo - s_hi) * (hi - lo) };
    let mut out = at(mu);
    // Remove round-off so the sum lands on the simplex.
    let s = total(&out);
    if s > 1.0 {
        let k = 1.0 / s;
        out.iter_mut().for_each(|v| *v *= k);
    }
    out
}

/// Largest KKT violation of a candidate solution: stationarity against the
/// best multiplier, bound and sum feasibility.
pub fn simplex_qp_kkt_violation(lin: &[f64], quad: &[f64], cap: &[f64], a: &[f64]) -> f64 {
    let n = lin.len();
    let sum: f64 = a.iter().sum();
    let mut viol: f64 = (sum - 1.0).max(0.0);
    for i in 0..n {
        viol = viol.max(-a[i]).max(a[i] - cap[i]);
    }
    let grad: Vec<f64> = (0..n).map(|i| lin[i] + 2.0 * quad[i] * a[i]).collect();
    // μ = 0 unless the sum constraint is active; then μ is the gradient of
    // any interior coordinate, or bracketed by the active bounds.
    let tol = 1e-9;
    let mu = if sum < 1.0 - tol {
        0.0
    } else {
        let interior: Vec<f64> = (0..n).filter(|&i| a[i] > tol && a[i] < cap[i] - tol).map(|i| grad[i]).collect();
        if let Some(&g) = interior.first() {
            g
        } else {
            let at_cap = (0..n).filter(|&i| a[i] >= cap[i] - tol && cap[i] > 0.0).map(|i| grad[i]);
            at_cap.fold(f64::INFINITY, f64::min).max(0.0).min(
                (0..n).filter(|&i| a[i] <= tol).map(|i| grad[i]).fold(f64::NEG_INFINITY, f64::max).max(0.0),
            )
        }
    };
    if mu < 0.0 {
        viol = viol.max(-mu);
    }
    for i in 0..n {
        let r = grad[i] - mu;
        if a[i] <= tol {
            viol = viol.max(r);
        } else if a[i] >= cap[i] - tol {
            viol = viol.max(-r);
        } else {
            viol = viol.max(r.abs());
        }
    }
    viol
}
