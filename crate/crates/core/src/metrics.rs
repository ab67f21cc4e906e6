//! Per-slot performance quantities: sensing MI, harvested power, uplink and
//! backhaul rates, the displaced-buoy misalignment check, and the
//! per-(buoy, slot) metric report with constraint slacks.

use serde::Serialize;

use crate::channel::{
    array_response, clutter_patch_area_capped, distance, inner, sea_state_constant, sigma_sc2, ChannelError,
    LinkGeometry, SPEED_OF_LIGHT,
};
use crate::scalar::Scalar;
use crate::scenario::{DecisionState, ScenarioConfig, STAGE_B, STAGE_C, STAGE_P, STAGE_S};

/// Composite linear gains; power-bearing terms include `P_UAV` in watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainBundle<T> {
    /// `P·G_uav^tx·G_uav^rx`
    pub s: T,
    /// `G_u^tx·G_uav^rx`
    pub c: T,
    /// `P·G_uav^tx·G_u^rx`
    pub p: T,
    /// `P·G_uav^tx·G_ship^rx`
    pub b: T,
}

/// Everything the metric formulas read from a scenario, in scalar type `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct RfModel<T> {
    pub gains: GainBundle<T>,
    pub lambda: T,
    pub noise_w: T,
    pub p_uav_w: T,
    pub bandwidth: T,
    pub antennas_per_side: usize,
    pub spacing: T,
    pub sea_state: u8,
    pub gamma_sea: T,
    pub xi: Vec<T>,
    pub rcs: Vec<T>,
    pub chi: Vec<T>,
}

fn lit<T: Scalar>(v: f64) -> T {
    T::lit(v)
}

impl<T: Scalar> RfModel<T> {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        let p = cfg.p_uav_w();
        let gu = cfg.gain_uav();
        let gains = GainBundle {
            s: lit(p * gu * gu),
            c: lit(cfg.gain_buoy() * gu),
            p: lit(p * gu * cfg.gain_buoy()),
            b: lit(p * gu * cfg.gain_ship()),
        };
        Self {
            gains,
            lambda: lit(cfg.wavelength()),
            noise_w: lit(cfg.noise_w()),
            p_uav_w: lit(p),
            bandwidth: lit(cfg.bandwidth_hz),
            antennas_per_side: cfg.antennas_per_side,
            spacing: lit(cfg.antenna_spacing_m),
            sea_state: cfg.sea_state,
            gamma_sea: sea_state_constant(cfg.sea_state),
            xi: cfg.xi.iter().map(|&v| lit(v)).collect(),
            rcs: cfg.rcs_m2.iter().map(|&v| lit(v)).collect(),
            chi: cfg.chi.iter().map(|&v| lit(v)).collect(),
        }
    }

    fn four_pi2(&self) -> T {
        lit::<T>(4.0) * T::PI() * T::PI()
    }

    /// Sensing SINR of the closed form. Returns zero when the UAV is
    /// directly overhead (`d̄ = 0`), the vertical-geometry limit.
    pub fn sensing_sinr_closed(&self, u: usize, g: &LinkGeometry<T>, with_clutter: bool) -> T {
        let r = T::from_usize(self.antennas_per_side).unwrap();
        let gl = self.gains.s * self.lambda * self.lambda;
        let num = gl * self.rcs[u] * r * self.bandwidth * g.d_bar;
        let clutter = if with_clutter {
            let ratio2 = g.d_bar * g.d_bar / g.z_bar;
            lit::<T>(0.886) * lit(SPEED_OF_LIGHT) * gl * self.gamma_sea * (-self.gamma_sea * ratio2).exp() * g.d_u * g.d_u
        } else {
            T::zero()
        };
        let noise = self.noise_w * r * self.bandwidth * lit(4.0) * T::PI().powi(3) * g.d_u.powi(4) * g.d_bar;
        let den = clutter + noise;
        if den <= T::zero() {
            return T::zero();
        }
        num / den
    }

    pub fn sensing_mi_closed(&self, u: usize, g: &LinkGeometry<T>, gamma_s: T, alpha: T) -> T {
        gamma_s * alpha * (T::one() + self.sensing_sinr_closed(u, g, true)).log2()
    }

    pub fn sensing_mi_closed_clutter_free(&self, u: usize, g: &LinkGeometry<T>, gamma_s: T, alpha: T) -> T {
        gamma_s * alpha * (T::one() + self.sensing_sinr_closed(u, g, false)).log2()
    }

    /// Sensing SINR built from explicit steering vectors with matched-filter
    /// precoder `√P·a` and combiner `a`; clutter uses `σ_sc2` and the capped
    /// patch area.
    pub fn sensing_sinr_vector(
        &self,
        u: usize,
        uav: &[T; 3],
        buoy: &[T; 3],
        with_clutter: bool,
    ) -> Result<T, ChannelError> {
        let g = LinkGeometry::new(uav, buoy, uav)?;
        let a = array_response(uav, buoy, self.antennas_per_side, self.spacing, self.lambda)?;
        let f: Vec<_> = a.iter().map(|z| z.scale(self.p_uav_w.sqrt())).collect();
        let w = &a;
        let gu2 = self.gains.s / self.p_uav_w;
        let path = gu2 * self.lambda * self.lambda / (lit::<T>(64.0) * T::PI().powi(3) * g.d_u.powi(4));
        // wᴴ (c·a aᴴ)ᴴ f = conj(c)·(wᴴa)(aᴴf); phases drop out of |·|².
        let aa = inner(w, &a) * inner(&a, &f);
        let beam = aa.norm_sqr();
        let signal = path * self.rcs[u] * beam;
        let clutter = if with_clutter {
            let area = clutter_patch_area_capped(
                g.d_u,
                g.grazing,
                self.bandwidth,
                self.antennas_per_side,
                self.spacing,
                self.lambda,
            );
            path * sigma_sc2(self.gamma_sea, g.grazing) * area * beam
        } else {
            T::zero()
        };
        let noise = self.noise_w * inner(w, w).re;
        Ok(signal / (clutter + noise))
    }

    pub fn sensing_mi_vector(
        &self,
        u: usize,
        uav: &[T; 3],
        buoy: &[T; 3],
        gamma_s: T,
        alpha: T,
    ) -> Result<T, ChannelError> {
        if alpha == T::zero() || gamma_s == T::zero() {
            return Ok(T::zero());
        }
        Ok(gamma_s * alpha * (T::one() + self.sensing_sinr_vector(u, uav, buoy, true)?).log2())
    }

    /// Slot-averaged harvested RF power, watts.
    pub fn harvested_power(&self, u: usize, d_u: T, gamma_p: T, alpha: T) -> T {
        alpha * gamma_p * self.xi[u] * self.gains.p * self.lambda * self.lambda / (self.four_pi2() * d_u * d_u)
    }

    pub fn uplink_snr(&self, d_u: T, p: T) -> T {
        p * self.gains.c * self.lambda * self.lambda / (self.noise_w * self.four_pi2() * d_u * d_u)
    }

    pub fn uplink_rate(&self, d_u: T, gamma_c: T, alpha: T, p: T) -> T {
        gamma_c * alpha * (T::one() + self.uplink_snr(d_u, p)).log2()
    }

    pub fn backhaul_snr(&self, d_b: T) -> T {
        self.gains.b * self.lambda * self.lambda / (self.noise_w * self.four_pi2() * d_b * d_b)
    }

    pub fn backhaul_rate(&self, d_b: T, gamma_b: T, alpha: T) -> T {
        gamma_b * alpha * (T::one() + self.backhaul_snr(d_b)).log2()
    }

    /// Uplink rate with the combiner steered at `buoy` while the buoy sits at
    /// `buoy + e`: true displaced distance and steering mismatch.
    pub fn uplink_rate_vector(
        &self,
        uav: &[T; 3],
        buoy: &[T; 3],
        e: &[T; 3],
        gamma_c: T,
        alpha: T,
        p: T,
    ) -> Result<T, ChannelError> {
        let moved = [buoy[0] + e[0], buoy[1] + e[1], buoy[2] + e[2]];
        let a = array_response(uav, buoy, self.antennas_per_side, self.spacing, self.lambda)?;
        let b = array_response(uav, &moved, self.antennas_per_side, self.spacing, self.lambda)?;
        let mismatch = inner(&a, &b).norm_sqr();
        let snr = alpha * self.uplink_snr(distance(uav, &moved), p) * mismatch;
        Ok(gamma_c * (T::one() + snr).log2())
    }
}

/// Outcome of the displaced-buoy comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Misalignment {
    pub exact: f64,
    pub approx: f64,
    pub relative_error: f64,
}

/// Compares the beamformed uplink rate for a buoy displaced by `e` against
/// the undisplaced closed form, at full time share and power `p` watts.
pub fn misalignment_check(
    model: &RfModel<f64>,
    uav: &[f64; 3],
    buoy: &[f64; 3],
    e: &[f64; 3],
    p: f64,
) -> Result<Misalignment, ChannelError> {
    let exact = model.uplink_rate_vector(uav, buoy, e, 1.0, 1.0, p)?;
    let approx = model.uplink_rate(distance(uav, buoy), 1.0, 1.0, p);
    let relative_error = if approx > 0.0 { (exact - approx).abs() / approx } else { (exact - approx).abs() };
    Ok(Misalignment { exact, approx, relative_error })
}

/// One (slot, buoy) row of a metric report. Power is in watts here and
/// written as milliwatts to CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricRow {
    pub n: usize,
    pub u: usize,
    pub alpha: f64,
    pub gamma: [f64; 4],
    pub r_s: f64,
    pub p_p: f64,
    pub r_c: f64,
    pub r_b: f64,
    pub slack_c3: f64,
    pub slack_c4: f64,
    pub slack_c5_running: f64,
    pub slack_c6: f64,
    /// UAV directly above the buoy: sensing MI is its vertical limit (0).
    pub vertical: bool,
}

/// Metrics for every (slot, buoy) pair, slot-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub num_slots: usize,
    pub num_buoys: usize,
    pub rows: Vec<MetricRow>,
    pub gamma_c_th: f64,
}

impl MetricReport {
    pub fn row(&self, n: usize, u: usize) -> &MetricRow {
        &self.rows[n * self.num_buoys + u]
    }

    pub fn total_uplink(&self) -> f64 {
        self.rows.iter().map(|r| r.r_c).sum()
    }

    /// `(1/N)·Σ_n Σ_u R_c`.
    pub fn avg_rate_per_slot(&self) -> f64 {
        self.total_uplink() / self.num_slots as f64
    }

    /// `(1/N)·Σ_n R_c` for one buoy.
    pub fn buoy_average_rate(&self, u: usize) -> f64 {
        (0..self.num_slots).map(|n| self.row(n, u).r_c).sum::<f64>() / self.num_slots as f64
    }

    pub fn active_rows(&self) -> impl Iterator<Item = &MetricRow> {
        self.rows.iter().filter(|r| r.alpha > 0.5)
    }

    /// Most negative slack of each constraint family `[c3, c4, c5, c6]`
    /// over active rows (c5 uses the final per-buoy average).
    pub fn worst_slacks(&self) -> [f64; 4] {
        let mut w = [f64::INFINITY; 4];
        for r in self.active_rows() {
            w[0] = w[0].min(r.slack_c3);
            w[1] = w[1].min(r.slack_c4);
            w[3] = w[3].min(r.slack_c6);
        }
        for u in 0..self.num_buoys {
            w[2] = w[2].min(self.row(self.num_slots - 1, u).slack_c5_running);
        }
        w.map(|v| if v.is_finite() { v } else { 0.0 })
    }

    /// Whether all of c3–c6 hold; c3/c6 slacks are compared relative to
    /// their scale.
    pub fn feasible(&self, tol: f64) -> bool {
        let mut ok = true;
        for r in self.active_rows() {
            ok &= r.slack_c3 >= -tol;
            ok &= r.slack_c4 >= -tol * r.p_p.max(1e-6);
            ok &= r.slack_c6 >= -tol * r.r_c.max(1.0);
        }
        for u in 0..self.num_buoys {
            ok &= self.row(self.num_slots - 1, u).slack_c5_running >= -tol;
        }
        ok
    }
}

/// Evaluates every metric and slack for a decision state.
pub fn evaluate_report(cfg: &ScenarioConfig, state: &DecisionState) -> Result<MetricReport, ChannelError> {
    let model = RfModel::<f64>::from_config(cfg);
    let (nu, ns) = (cfg.num_buoys(), cfg.num_slots);
    let mut rows = Vec::with_capacity(nu * ns);
    let mut running = vec![0.0; nu];
    for n in 0..ns {
        let uav = state.uav_positions[n];
        for u in 0..nu {
            let g = LinkGeometry::new(&uav, &cfg.buoy_position(u, n), &cfg.ship_position)?;
            let a = state.assoc[u][n];
            let gm = state.time_fracs[u][n];
            let p = state.uplink_power[u][n];
            let r_s = model.sensing_mi_closed(u, &g, gm[STAGE_S], a);
            let p_p = model.harvested_power(u, g.d_u, gm[STAGE_P], a);
            let r_c = model.uplink_rate(g.d_u, gm[STAGE_C], a, p);
            let r_b = model.backhaul_rate(g.d_b, gm[STAGE_B], a);
            running[u] += r_c;
            rows.push(MetricRow {
                n,
                u,
                alpha: a,
                gamma: gm,
                r_s,
                p_p,
                r_c,
                r_b,
                slack_c3: r_s - a * cfg.gamma_s_th,
                slack_c4: p_p - gm[STAGE_C] * a * p,
                slack_c5_running: running[u] / ns as f64 - cfg.gamma_c_th,
                slack_c6: r_b - cfg.chi[u] * r_c,
                vertical: a > 0.0 && g.d_bar == 0.0,
            });
        }
    }
    Ok(MetricReport { num_slots: ns, num_buoys: nu, rows, gamma_c_th: cfg.gamma_c_th })
}

/// Per-active-slot averages used by the summaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActiveAverages {
    pub rate: f64,
    pub harvested_mw: f64,
    pub sensing_mi: f64,
    pub active_slots: usize,
}

pub fn active_averages(report: &MetricReport) -> ActiveAverages {
    let mut acc = ActiveAverages { rate: 0.0, harvested_mw: 0.0, sensing_mi: 0.0, active_slots: 0 };
    for r in report.active_rows() {
        acc.rate += r.r_c;
        acc.harvested_mw += r.p_p * 1e3;
        acc.sensing_mi += r.r_s;
        acc.active_slots += 1;
    }
    if acc.active_slots > 0 {
        let k = acc.active_slots as f64;
        acc.rate /= k;
        acc.harvested_mw /= k;
        acc.sensing_mi /= k;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::default_scenario;
    use std::f64::consts::PI;

    fn model() -> RfModel<f64> {
        RfModel::from_config(&default_scenario())
    }

    fn geom(d_bar: f64, h: f64) -> LinkGeometry<f64> {
        LinkGeometry::new(&[d_bar, 0.0, h], &[0.0, 0.0, 0.0], &[500.0, -20.0, 0.0]).unwrap()
    }

    #[test]
    fn gain_bundle_values() {
        let m = model();
        let p = 10f64.powf(0.6);
        assert!((m.gains.s - p * 10f64.powf(5.2)).abs() < 1e-9 * m.gains.s);
        assert!((m.gains.c - 10f64.powf(4.6)).abs() < 1e-9 * m.gains.c);
        assert!((m.gains.p - p * 10f64.powf(4.6)).abs() < 1e-9 * m.gains.p);
        assert!((m.gains.b - p * 10f64.powf(5.6)).abs() < 1e-9 * m.gains.b);
    }

    #[test]
    fn zero_inputs_give_zero() {
        let m = model();
        let g = geom(5.0, 10.0);
        assert_eq!(m.sensing_mi_closed(0, &g, 0.5, 0.0), 0.0);
        assert_eq!(m.sensing_mi_closed(0, &g, 0.0, 1.0), 0.0);
        assert_eq!(m.harvested_power(0, 12.0, 0.0, 1.0), 0.0);
        assert_eq!(m.uplink_rate(12.0, 1.0, 1.0, 0.0), 0.0);
        assert_eq!(m.backhaul_rate(100.0, 0.0, 1.0), 0.0);
        assert_eq!(m.sensing_mi_closed(0, &geom(0.0, 10.0), 1.0, 1.0), 0.0);
    }

    #[test]
    fn unit_snr_gives_one_bit() {
        let m = model();
        let d = 30.0;
        let p = 1.0 / m.uplink_snr(d, 1.0);
        assert!((m.uplink_rate(d, 1.0, 1.0, p) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_square_harvesting() {
        let m = model();
        let a = m.harvested_power(0, 12.0, 0.3, 1.0);
        let b = m.harvested_power(0, 24.0, 0.3, 1.0);
        assert!((a / b - 4.0).abs() < 1e-12);
        let expected = 0.3 * 0.8 * m.gains.p * 0.0036 / (4.0 * PI * PI * 144.0);
        assert!((a - expected).abs() < 1e-15);
    }

    #[test]
    fn backhaul_halving_distance() {
        let m = model();
        let r1 = m.backhaul_rate(400.0, 1.0, 1.0);
        let r2 = m.backhaul_rate(200.0, 1.0, 1.0);
        let exact = ((1.0 + 4.0 * m.backhaul_snr(400.0)) / (1.0 + m.backhaul_snr(400.0))).log2();
        assert!((r2 - r1 - exact).abs() < 1e-12);
        assert!((r2 - r1 - 2.0).abs() < 1e-6);
    }

    #[test]
    fn closed_form_independent_evaluation() {
        let m = model();
        let g = geom(5.2, 10.0);
        let lam: f64 = 0.06;
        let gs = 10f64.powf(0.6) * 10f64.powf(5.2);
        let gam = sea_state_constant::<f64>(3);
        let d2 = 5.2f64.powi(2) + 100.0;
        let num = gs * lam * lam * 1.0 * 8.0 * 1e7 * 5.2;
        let den = 0.886 * 3e8 * gs * lam * lam * gam * (-gam * 0.052f64.powi(2) * 100.0).exp() * d2
            + 10f64.powf(-13.7) * 8.0 * 1e7 * 4.0 * PI.powi(3) * d2 * d2 * 5.2;
        let expected = (1.0 + num / den).log2();
        assert!((m.sensing_mi_closed(0, &g, 1.0, 1.0) - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn clutter_lowers_mi() {
        let m = model();
        for d in [1.0, 3.0, 6.5, 10.0] {
            let g = geom(d, 10.0);
            assert!(m.sensing_mi_closed(0, &g, 0.5, 1.0) < m.sensing_mi_closed_clutter_free(0, &g, 0.5, 1.0));
        }
        // Far out the clutter term underflows relative to noise.
        let g = geom(30.0, 10.0);
        assert!(m.sensing_mi_closed(0, &g, 0.5, 1.0) <= m.sensing_mi_closed_clutter_free(0, &g, 0.5, 1.0));
    }

    #[test]
    fn vector_and_closed_sensing_agree_up_to_noise_constant() {
        let m = model();
        let uav = [6.0, 2.0, 10.0];
        let buoy = [0.0, 0.0, 0.0];
        let g = LinkGeometry::new(&uav, &buoy, &uav).unwrap();
        let v = m.sensing_sinr_vector(0, &uav, &buoy, true).unwrap();
        // Rescale the closed form's noise term by the (4π)³ / 4π³ = 16 ratio.
        let r = 8.0;
        let gl = m.gains.s * 0.0036;
        let num = gl * r * 1e7 * g.d_bar;
        let clutter = 0.886 * 3e8 * gl * m.gamma_sea * (-m.gamma_sea * g.d_bar.powi(2) / g.z_bar).exp() * g.d_u.powi(2);
        let noise = 16.0 * m.noise_w * r * 1e7 * 4.0 * PI.powi(3) * g.d_u.powi(4) * g.d_bar;
        let closed16 = num / (clutter + noise);
        assert!((v - closed16).abs() < 1e-9 * closed16);
        let free = m.sensing_sinr_vector(0, &uav, &buoy, false).unwrap();
        let snr = m.gains.s * 0.0036 / (64.0 * PI.powi(3) * g.d_u.powi(4) * m.noise_w);
        assert!((free - snr).abs() < 1e-9 * snr);
    }

    #[test]
    fn vector_uplink_matches_closed_without_displacement() {
        let m = model();
        let uav = [40.0, 10.0, 10.0];
        let buoy = [20.0, 30.0, 0.0];
        let p = 2e-3;
        let v = m.uplink_rate_vector(&uav, &buoy, &[0.0; 3], 0.4, 1.0, p).unwrap();
        let c = m.uplink_rate(distance(&uav, &buoy), 0.4, 1.0, p);
        assert!((v - c).abs() < 1e-9);
    }

    #[test]
    fn misalignment_regimes() {
        let m = model();
        let buoy = [0.0, 0.0, 0.0];
        let z = 10.0;
        let uav = [(2500.0f64 - z * z).sqrt(), 0.0, z];
        let none = misalignment_check(&m, &uav, &buoy, &[0.0; 3], 1e-3).unwrap();
        assert!(none.relative_error < 1e-12);
        let e = 0.1 / 3f64.sqrt();
        let small = misalignment_check(&m, &uav, &buoy, &[e, e, e], 1e-3).unwrap();
        assert!(small.relative_error < 1e-3, "{small:?}");
        let near = [8.0, 0.0, 6.0];
        let big = misalignment_check(&m, &near, &buoy, &[3.0, 4.0, 0.0], 1e-3).unwrap();
        assert!(big.relative_error > 0.05, "{big:?}");
    }

    #[test]
    fn harvested_two_milliwatt_scale() {
        let m = model();
        // About 2 mW at 12 m needs a power-transfer share near 0.025.
        let gp = 2e-3 / m.harvested_power(0, 12.0, 1.0, 1.0);
        assert!(gp > 0.01 && gp < 0.05, "{gp}");
    }

    #[test]
    fn monotone_in_distance() {
        let m = model();
        let mut prev = [f64::INFINITY; 3];
        for k in 1..200 {
            let d = 10.0 + k as f64;
            let cur = [
                m.sensing_mi_closed_clutter_free(0, &geom((d * d - 100.0).sqrt(), 10.0), 0.3, 1.0),
                m.harvested_power(0, d, 0.3, 1.0),
                m.uplink_rate(d, 0.3, 1.0, 1e-3),
            ];
            for i in 1..3 {
                assert!(cur[i] <= prev[i]);
            }
            prev = cur;
        }
    }

    #[test]
    fn f32_model_tracks_f64() {
        let cfg = default_scenario();
        let m32 = RfModel::<f32>::from_config(&cfg);
        let m64 = RfModel::<f64>::from_config(&cfg);
        let a = m32.uplink_rate(20.0f32, 0.5, 1.0, 1e-3) as f64;
        let b = m64.uplink_rate(20.0, 0.5, 1.0, 1e-3);
        assert!((a - b).abs() < 1e-4 * b);
    }
}
