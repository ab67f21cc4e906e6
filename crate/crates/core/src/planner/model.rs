//! Slot-level model used by the planner: the constraint functions written
//! in the forms the successive convex approximation linearizes, their
//! analytic gradients, the quadratic-transform surrogate and the inner
//! approximation of the energy constraint.

use std::f64::consts::{LN_2, PI};

use crate::channel::{sea_state_constant, LinkGeometry, SPEED_OF_LIGHT};
use crate::metrics::RfModel;
use crate::scenario::{Point3, ScenarioConfig, STAGE_B, STAGE_C, STAGE_P, STAGE_S};

/// Constants shared by every slot, derived once from a scenario.
#[derive(Debug, Clone)]
pub struct LinkModel {
    pub rf: RfModel<f64>,
    pub n_slots: usize,
    pub z_uav: f64,
    pub ship: Point3,
    pub gamma_sea: f64,
    /// Clutter coefficient `0.886·c·G^s·λ²·Γ_s`.
    pub c1: f64,
    /// Noise coefficient `N0·R·B·4π³`.
    pub c2: f64,
    /// Uplink SNR coefficient `G^c·λ² / (N0·4π²)`.
    pub c3: f64,
    /// Backhaul SNR coefficient `G^b·λ² / (N0·4π²)`.
    pub c4: f64,
    /// `G^s·λ²·R·B` (times ψ_u gives the sensing numerator).
    pub sense_num: f64,
    /// `ξ_u·G^p·λ² / (4π²)` per buoy: harvested power at unit share is this
    /// over `d²`.
    pub harvest: Vec<f64>,
    pub gamma_s_th: f64,
    pub gamma_c_th: f64,
    pub chi: Vec<f64>,
    pub rcs: Vec<f64>,
    /// Optional scaling of `c1` inside the analytic Λ gradient only; used as
    /// a negative control by the verification suite.
    pub gradient_mutation: f64,
    /// Fixed-path strategies keep the equal-split sensing share in slots
    /// where no share can meet the threshold, instead of declaring the slot
    /// unusable.
    pub best_effort_sensing: bool,
}

impl LinkModel {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        let rf = RfModel::<f64>::from_config(cfg);
        let lam2 = rf.lambda * rf.lambda;
        let r = cfg.antennas_per_side as f64;
        let b = cfg.bandwidth_hz;
        let gamma_sea = sea_state_constant::<f64>(cfg.sea_state);
        let four_pi2 = 4.0 * PI * PI;
        Self {
            n_slots: cfg.num_slots,
            z_uav: cfg.uav_height,
            ship: cfg.ship_position,
            gamma_sea,
            c1: 0.886 * SPEED_OF_LIGHT * rf.gains.s * lam2 * gamma_sea,
            c2: rf.noise_w * r * b * 4.0 * PI.powi(3),
            c3: rf.gains.c * lam2 / (rf.noise_w * four_pi2),
            c4: rf.gains.b * lam2 / (rf.noise_w * four_pi2),
            sense_num: rf.gains.s * lam2 * r * b,
            harvest: cfg.xi.iter().map(|xi| xi * rf.gains.p * lam2 / four_pi2).collect(),
            gamma_s_th: cfg.gamma_s_th,
            gamma_c_th: cfg.gamma_c_th,
            chi: cfg.chi.clone(),
            rcs: cfg.rcs_m2.clone(),
            gradient_mutation: 1.0,
            best_effort_sensing: false,
            rf,
        }
    }

    /// Right-hand side `C_u` of the sensing constraint for share `gamma_s`.
    pub fn c_u(&self, u: usize, gamma_s: f64) -> f64 {
        if gamma_s <= 0.0 {
            return 0.0;
        }
        let t = (self.gamma_s_th / gamma_s).exp2() - 1.0;
        if t <= 0.0 {
            f64::INFINITY
        } else {
            self.sense_num * self.rcs[u] / t
        }
    }

    /// Sensing constraint function Λ and its `(x, y)` gradient at a UAV
    /// position relative to buoy `b`.
    pub fn lambda(&self, uav: [f64; 2], b: &Point3) -> (f64, [f64; 2]) {
        let (dx, dy) = (uav[0] - b[0], uav[1] - b[1]);
        let z = (self.z_uav - b[2]).powi(2);
        let db2 = dx * dx + dy * dy;
        let db = db2.sqrt();
        if db == 0.0 {
            return (f64::INFINITY, [0.0, 0.0]);
        }
        let e = (-self.gamma_sea * db2 / z).exp();
        let d2 = db2 + z;
        let value = self.c1 * e * d2 / db + self.c2 * d2 * d2;
        let c1 = self.c1 * self.gradient_mutation;
        let radial =
            c1 * e * (-2.0 * self.gamma_sea * d2 / z + (db2 - z) / db2) + 4.0 * self.c2 * db * d2;
        (value, [radial * dx / db, radial * dy / db])
    }

    /// Backhaul constraint function Π and its `(x, y, p)` gradient, with
    /// `r = γ_c·χ/γ_b`.
    pub fn pi(&self, uav: [f64; 2], b: &Point3, p: f64, r: f64) -> (f64, [f64; 3]) {
        let (dx, dy) = (uav[0] - b[0], uav[1] - b[1]);
        let d2 = dx * dx + dy * dy + (self.z_uav - b[2]).powi(2);
        let (sx, sy) = (uav[0] - self.ship[0], uav[1] - self.ship[1]);
        let db2 = sx * sx + sy * sy + (self.z_uav - self.ship[2]).powi(2);
        let base = 1.0 + self.c3 * p / d2;
        let pow_r1 = base.powf(r - 1.0);
        let value = base * pow_r1 - (1.0 + self.c4 / db2);
        let common = -2.0 * r * pow_r1 * self.c3 * p / (d2 * d2);
        let ship = 2.0 * self.c4 / (db2 * db2);
        let gp = r * pow_r1 * self.c3 / d2;
        (value, [common * dx + ship * sx, common * dy + ship * sy, gp])
    }

    /// The two terms of Π separately, `((1 + C3·p/d²)^r, 1 + C4/d_b²)`;
    /// they are of similar size, so differences of Π lose digits.
    pub fn pi_terms(&self, uav: [f64; 2], b: &Point3, p: f64, r: f64) -> (f64, f64) {
        let d2 = self.dist2(uav, b);
        ((1.0 + self.c3 * p / d2).powf(r), 1.0 + self.c4 / self.ship_dist2(uav))
    }

    /// Uplink rate `γ_c·log2(1 + C3·p/d²)` and its `(x, y, p)` gradient.
    pub fn rate(&self, uav: [f64; 2], b: &Point3, p: f64, gamma_c: f64) -> (f64, [f64; 3]) {
        let (dx, dy) = (uav[0] - b[0], uav[1] - b[1]);
        let d2 = dx * dx + dy * dy + (self.z_uav - b[2]).powi(2);
        let value = gamma_c * (1.0 + self.c3 * p / d2).log2();
        let gx = -2.0 * gamma_c * self.c3 * p / (LN_2 * (d2 * d2 + self.c3 * p * d2));
        let gp = gamma_c * self.c3 / (LN_2 * (d2 + self.c3 * p));
        (value, [gx * dx, gx * dy, gp])
    }

    /// `J = γ_p·ξ·G^p·λ² / (γ_c·4π²)`; the energy constraint reads `d² <= J/p`.
    pub fn energy_j(&self, u: usize, gamma_p: f64, gamma_c: f64) -> f64 {
        self.harvest[u] * gamma_p / gamma_c
    }

    pub fn dist2(&self, uav: [f64; 2], b: &Point3) -> f64 {
        (uav[0] - b[0]).powi(2) + (uav[1] - b[1]).powi(2) + (self.z_uav - b[2]).powi(2)
    }

    pub fn ship_dist2(&self, uav: [f64; 2]) -> f64 {
        self.dist2(uav, &self.ship)
    }

    /// Spectral efficiency of the backhaul link at full share.
    pub fn backhaul_se(&self, uav: [f64; 2]) -> f64 {
        (1.0 + self.c4 / self.ship_dist2(uav)).log2()
    }

    /// Spectral efficiency of the uplink at full share.
    pub fn uplink_se(&self, uav: [f64; 2], b: &Point3, p: f64) -> f64 {
        (1.0 + self.c3 * p / self.dist2(uav, b)).log2()
    }

    /// Sensing spectral efficiency `log2(1 + SINR)` at full share.
    pub fn sensing_se(&self, u: usize, uav: [f64; 2], b: &Point3) -> f64 {
        let g = LinkGeometry::new(&[uav[0], uav[1], self.z_uav], b, &self.ship).expect("UAV above buoy");
        (1.0 + self.rf.sensing_sinr_closed(u, &g, true)).log2()
    }

    /// Largest uplink power meeting both the energy and the backhaul
    /// constraints for shares `g` at this position.
    pub fn max_power(&self, u: usize, uav: [f64; 2], b: &Point3, g: &[f64; 4]) -> f64 {
        if g[STAGE_C] <= 0.0 {
            return 0.0;
        }
        let d2 = self.dist2(uav, b);
        let energy = self.harvest[u] * g[STAGE_P] / (g[STAGE_C] * d2);
        let lb = self.backhaul_se(uav);
        // χ·γ_c·log2(1 + C3 p/d²) <= γ_b·L_b
        let cap_se = g[STAGE_B] * lb / (self.chi[u] * g[STAGE_C]);
        let backhaul = if cap_se > 600.0 { f64::INFINITY } else { (cap_se.exp2() - 1.0) * d2 / self.c3 };
        energy.min(backhaul).max(0.0)
    }

    /// Smallest sensing share meeting the sensing QoS at this position
    /// (infinite when unreachable).
    pub fn min_sensing_share(&self, u: usize, uav: [f64; 2], b: &Point3) -> f64 {
        let se = self.sensing_se(u, uav, b);
        if self.gamma_s_th <= 0.0 {
            0.0
        } else if se > 0.0 {
            self.gamma_s_th / se
        } else {
            f64::INFINITY
        }
    }

    /// Lower bound on the sensing share under the sensing policy: the
    /// minimum share, or the equal split where the threshold is out of reach.
    pub fn sensing_floor(&self, u: usize, uav: [f64; 2], b: &Point3) -> f64 {
        let s = self.min_sensing_share(u, uav, b);
        if self.best_effort_sensing && !(s < 1.0) {
            0.25
        } else {
            s
        }
    }

    /// Best per-slot rate at a fixed position with sensing share `s`, over
    /// the power-transfer/uplink ratio `ρ = γ_p/γ_c`, with the energy and
    /// backhaul constraints tight. Returns `(rate, ρ)`.
    pub fn slot_rate_optimum(&self, u: usize, uav: [f64; 2], b: &Point3, s: f64) -> (f64, f64) {
        if !(s < 1.0) {
            return (0.0, 0.0);
        }
        let d2 = self.dist2(uav, b);
        let k = self.c3 * self.harvest[u] / (d2 * d2);
        let lb = self.backhaul_se(uav);
        let chi = self.chi[u];
        let rate = |rho: f64| {
            let l = (1.0 + k * rho).log2();
            (1.0 - s) * l / (1.0 + rho + chi * l / lb)
        };
        // Coarse log grid, then golden section around the best cell.
        let (lo_e, hi_e) = (-8.0f64, 3.0f64);
        let steps = 220;
        let mut best = (f64::NEG_INFINITY, 0usize);
        for i in 0..=steps {
            let e = lo_e + (hi_e - lo_e) * i as f64 / steps as f64;
            let v = rate(10f64.powf(e));
            if v > best.0 {
                best = (v, i);
            }
        }
        let h = (hi_e - lo_e) / steps as f64;
        let mut a = lo_e + h * (best.1 as f64 - 1.0);
        let mut c = lo_e + h * (best.1 as f64 + 1.0);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let f = |e: f64| rate(10f64.powf(e));
        let mut x1 = c - g * (c - a);
        let mut x2 = a + g * (c - a);
        let (mut f1, mut f2) = (f(x1), f(x2));
        for _ in 0..80 {
            if f1 < f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (c - a);
                f2 = f(x2);
            } else {
                c = x2;
                x2 = x1;
                f2 = f1;
                x1 = c - g * (c - a);
                f1 = f(x1);
            }
        }
        let e = 0.5 * (a + c);
        let rho = 10f64.powf(e);
        (rate(rho).max(best.0), rho)
    }

    /// Shares and power realizing [`LinkModel::slot_rate_optimum`].
    pub fn slot_allocation(&self, u: usize, uav: [f64; 2], b: &Point3, s: f64, rho: f64) -> ([f64; 4], f64) {
        let d2 = self.dist2(uav, b);
        let p_unit = self.harvest[u] / d2;
        let p = rho * p_unit;
        let l = (1.0 + self.c3 * p / d2).log2();
        let lb = self.backhaul_se(uav);
        let gc = (1.0 - s) / (1.0 + rho + self.chi[u] * l / lb);
        let mut g = [0.0; 4];
        g[STAGE_S] = s;
        g[STAGE_C] = gc;
        g[STAGE_P] = rho * gc;
        g[STAGE_B] = (1.0 - s - gc - rho * gc).max(0.0);
        (g, p)
    }
}

/// Quadratic-transform surrogate `log2(1 + 2ϖ√A - ϖ²B)`.
pub fn qt_surrogate(varpi: f64, a: f64, b: f64) -> f64 {
    (1.0 + 2.0 * varpi * a.sqrt() - varpi * varpi * b).log2()
}

/// Auxiliary variable making the surrogate tight at `(a, b)`.
pub fn qt_varpi(a: f64, b: f64) -> f64 {
    a.sqrt() / b
}

/// Concave lower bound of `J/p` around `p0`: `2J/p0 - p·J/p0²`.
pub fn inner_bound(j: f64, p: f64, p0: f64) -> f64 {
    2.0 * j / p0 - p * j / (p0 * p0)
}

/// Penalty slack update `ᾱ = (α + α²) / (1 + α²)`.
pub fn alpha_bar(alpha: f64) -> f64 {
    (alpha + alpha * alpha) / (1.0 + alpha * alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::default_scenario;

    fn model() -> LinkModel {
        LinkModel::new(&default_scenario())
    }

    /// Central difference with one Richardson step.
    fn fd<F: Fn([f64; 3]) -> f64>(f: F, x: [f64; 3], i: usize) -> f64 {
        let central = |h: f64| {
            let mut p = x;
            let mut m = x;
            p[i] += h;
            m[i] -= h;
            (f(p) - f(m)) / (2.0 * h)
        };
        let h = 1e-3 * x[i].abs().max(1e-9);
        (4.0 * central(h / 2.0) - central(h)) / 3.0
    }

    fn position_fd<F: Fn([f64; 3]) -> f64>(f: F, x: [f64; 3], i: usize) -> f64 {
        let central = |h: f64| {
            let mut p = x;
            let mut m = x;
            p[i] += h;
            m[i] -= h;
            (f(p) - f(m)) / (2.0 * h)
        };
        (4.0 * central(5e-4) - central(1e-3)) / 3.0
    }

    #[test]
    fn lambda_gradient_matches_differences() {
        let m = model();
        let b = [100.0, 200.0, 0.0];
        for &(x, y) in &[(104.0, 203.0), (95.0, 190.0), (100.5, 207.0), (130.0, 170.0)] {
            let (_, g) = m.lambda([x, y], &b);
            for i in 0..2 {
                let num = position_fd(|v| m.lambda([v[0], v[1]], &b).0, [x, y, 0.0], i);
                assert!((num - g[i]).abs() <= 1e-6 * num.abs().max(g[i].abs()), "{i}: {num} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn pi_gradient_matches_differences() {
        let m = model();
        let b = [100.0, 200.0, 0.0];
        for &(x, y, p, r) in &[(104.0, 203.0, 2e-3, 0.6), (60.0, 150.0, 5e-4, 0.3), (300.0, 10.0, 1e-2, 1.4)] {
            let (_, g) = m.pi([x, y], &b, p, r);
            let t1 = |v: [f64; 3]| m.pi_terms([v[0], v[1]], &b, v[2], r).0;
            let t2 = |v: [f64; 3]| m.pi_terms([v[0], v[1]], &b, v[2], r).1;
            for i in 0..3 {
                let num = if i < 2 {
                    position_fd(t1, [x, y, p], i) - position_fd(t2, [x, y, p], i)
                } else {
                    fd(t1, [x, y, p], i)
                };
                assert!((num - g[i]).abs() <= 1e-6 * num.abs().max(g[i].abs()), "{i}: {num} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn rate_gradient_and_value() {
        let m = model();
        let b = [10.0, 20.0, 0.0];
        let (v, g) = m.rate([14.0, 26.0], &b, 3e-3, 0.6);
        let d = ((16.0f64 + 36.0 + 100.0) as f64).sqrt();
        assert!((v - m.rf.uplink_rate(d, 0.6, 1.0, 3e-3)).abs() < 1e-12);
        for i in 0..3 {
            let num = fd(|x| m.rate([x[0], x[1]], &b, x[2], 0.6).0, [14.0, 26.0, 3e-3], i);
            assert!((num - g[i]).abs() <= 1e-5 * num.abs().max(g[i].abs()));
        }
    }

    #[test]
    fn lambda_matches_sensing_threshold() {
        let m = model();
        let b = [0.0, 0.0, 0.0];
        for &gs in &[0.1, 0.25, 0.6] {
            for &db in &[3.0, 6.5, 12.0, 40.0] {
                let uav = [db, 0.0];
                let g = LinkGeometry::new(&[db, 0.0, 10.0], &b, &m.ship).unwrap();
                let ok_rate = m.rf.sensing_mi_closed(0, &g, gs, 1.0) >= m.gamma_s_th;
                let ok_lambda = m.lambda(uav, &b).0 <= m.c_u(0, gs);
                assert_eq!(ok_rate, ok_lambda, "γ_s={gs}, d̄={db}");
            }
        }
    }

    #[test]
    fn quadratic_transform_tight_at_optimum() {
        for &(a, b) in &[(1.0, 2.0), (1e-3, 5e-9), (40.0, 0.3)] {
            let w = qt_varpi(a, b);
            assert!((qt_surrogate(w, a, b) - (1.0 + a / b).log2()).abs() < 1e-12);
            assert!(qt_surrogate(0.7 * w, a, b) <= (1.0 + a / b).log2());
        }
    }

    #[test]
    fn inner_bound_properties() {
        let j = 0.3;
        for &p0 in &[1e-4, 1e-3, 0.1] {
            assert!((inner_bound(j, p0, p0) - j / p0).abs() <= 1e-12 * j / p0);
            for k in 1..50 {
                let p = p0 * k as f64 / 10.0;
                assert!(inner_bound(j, p, p0) <= j / p * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn alpha_bar_fixed_points() {
        assert_eq!(alpha_bar(0.0), 0.0);
        assert_eq!(alpha_bar(1.0), 1.0);
        assert!((alpha_bar(0.5) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn max_power_makes_constraints_tight() {
        let m = model();
        let b = [0.0, 0.0, 0.0];
        let uav = [6.0, 1.0];
        let g = [0.1, 0.05, 0.6, 0.25];
        let p = m.max_power(0, uav, &b, &g);
        let d2 = m.dist2(uav, &b);
        let energy_gap = m.harvest[0] * g[1] / d2 - g[2] * p;
        let backhaul_gap = g[3] * m.backhaul_se(uav) - m.chi[0] * g[2] * m.uplink_se(uav, &b, p);
        assert!(energy_gap >= -1e-15 && backhaul_gap >= -1e-9);
        assert!(energy_gap.abs() < 1e-12 || backhaul_gap.abs() < 1e-9);
    }

    #[test]
    fn slot_optimum_beats_equal_split() {
        let m = model();
        let b = [0.0, 0.0, 0.0];
        let uav = [6.5, 0.0];
        let s = m.min_sensing_share(0, uav, &b);
        let (best, rho) = m.slot_rate_optimum(0, uav, &b, s);
        let eq = [0.25; 4];
        let p = m.max_power(0, uav, &b, &eq);
        let r_eq = m.rate(uav, &b, p, 0.25).0;
        assert!(best > r_eq);
        let (g, p) = m.slot_allocation(0, uav, &b, s, rho);
        assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((m.rate(uav, &b, p, g[STAGE_C]).0 - best).abs() < 1e-9 * best);
        assert!(best > 15.0 && best < 30.0, "{best}");
    }
}
