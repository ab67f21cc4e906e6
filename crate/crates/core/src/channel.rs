//! Geometry and propagation primitives: UPA array response, link geometry,
//! Morchin sea-clutter backscattering and clutter patch area.

use num_complex::Complex;
use serde::Serialize;
use thiserror::Error;

use crate::scalar::Scalar;

/// Propagation speed used for wavelength and range-resolution terms.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Grazing angle above which the clutter patch area is held constant.
pub const GRAZING_CAP_DEG: f64 = 89.9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("array response requested between coincident points")]
    CoincidentPoints,
    #[error("grazing angle {0} rad outside the valid range")]
    GrazingOutOfRange(f64),
    #[error("sea state {0} outside 0..=9")]
    SeaStateOutOfRange(u8),
    #[error("UAV must be strictly above the buoy")]
    NotAbove,
}

pub fn distance<T: Scalar>(a: &[T; 3], b: &[T; 3]) -> T {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

pub fn horizontal_distance<T: Scalar>(a: &[T; 3], b: &[T; 3]) -> T {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Direction cosines `(sinθcosφ, sinθsinφ)` of the ray from `from` to `to`
/// as seen by a horizontal array at `from`.
pub fn direction_cosines<T: Scalar>(from: &[T; 3], to: &[T; 3]) -> Result<(T, T), ChannelError> {
    let d = distance(from, to);
    if d <= T::zero() {
        return Err(ChannelError::CoincidentPoints);
    }
    Ok(((from[0] - to[0]) / d, (from[1] - to[1]) / d))
}

/// Response of an `r x r` uniform planar array with element spacing
/// `spacing`, steered from `from` towards `to`. Entry `i * r + j` is
/// `exp(-j 2π (d/λ) (i·ux + j·uy)) / r`, so the vector has unit norm.
pub fn array_response<T: Scalar>(
    from: &[T; 3],
    to: &[T; 3],
    r: usize,
    spacing: T,
    lambda: T,
) -> Result<Vec<Complex<T>>, ChannelError> {
    let (ux, uy) = direction_cosines(from, to)?;
    Ok(array_response_from_cosines(ux, uy, r, spacing, lambda))
}

pub fn array_response_from_cosines<T: Scalar>(ux: T, uy: T, r: usize, spacing: T, lambda: T) -> Vec<Complex<T>> {
    let k = T::lit(2.0) * T::PI() * spacing / lambda;
    let norm = T::one() / T::from_usize(r).unwrap();
    let mut out = Vec::with_capacity(r * r);
    for i in 0..r {
        let fi = T::from_usize(i).unwrap();
        for j in 0..r {
            let fj = T::from_usize(j).unwrap();
            let phase = -k * (fi * ux + fj * uy);
            out.push(Complex::from_polar(norm, phase));
        }
    }
    out
}

/// `aᴴ b` for two complex vectors.
pub fn inner<T: Scalar>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter().zip(b).fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y)
}

/// Closed-form magnitude of the inner product between two unit array
/// responses whose direction cosines differ by `(dux, duy)`:
/// the product of two normalized Dirichlet kernels.
pub fn dirichlet_gain<T: Scalar>(r: usize, spacing_over_lambda: T, dux: T, duy: T) -> T {
    let rr = T::from_usize(r).unwrap();
    let kernel = |delta: T| {
        let x = T::PI() * spacing_over_lambda * delta;
        if x.abs() < T::lit(1e-300).max(T::min_positive_value()) {
            T::one()
        } else {
            ((rr * x).sin() / (rr * x.sin())).abs()
        }
    };
    kernel(dux) * kernel(duy)
}

/// Per-link geometry between the UAV, one buoy and the ship.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry<T> {
    pub d_u: T,
    pub d_bar: T,
    /// Squared altitude difference `(z_UAV - z_u)^2`.
    pub z_bar: T,
    pub grazing: T,
    pub d_b: T,
    pub cos_x: T,
    pub cos_y: T,
    /// atan2 of the horizontal offset; zero when directly overhead.
    pub azimuth: T,
}

impl<T: Scalar> LinkGeometry<T> {
    pub fn new(uav: &[T; 3], buoy: &[T; 3], ship: &[T; 3]) -> Result<Self, ChannelError> {
        let dz = uav[2] - buoy[2];
        if dz <= T::zero() {
            return Err(ChannelError::NotAbove);
        }
        let dx = uav[0] - buoy[0];
        let dy = uav[1] - buoy[1];
        let d_bar = (dx * dx + dy * dy).sqrt();
        let z_bar = dz * dz;
        let d_u = (d_bar * d_bar + z_bar).sqrt();
        let azimuth = if d_bar > T::zero() { dy.atan2(dx) } else { T::zero() };
        Ok(Self {
            d_u,
            d_bar,
            z_bar,
            grazing: (dz / d_u).asin(),
            d_b: distance(uav, ship),
            cos_x: dx / d_u,
            cos_y: dy / d_u,
            azimuth,
        })
    }
}

/// Morchin model terms for one (sea state, grazing angle) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClutterParams<T> {
    pub gamma_s: T,
    pub phi_0: T,
    pub sigma_0: T,
    pub sigma_sc1: T,
    pub sigma_sc2: T,
    pub sigma_sc: T,
}

/// Sea-state constant `cot²(2.44 (κ+1)^1.08 / 57.29)`.
pub fn sea_state_constant<T: Scalar>(sea_state: u8) -> T {
    let k = T::from_u8(sea_state).unwrap() + T::one();
    let arg = T::lit(2.44) * k.powf(T::lit(1.08)) / T::lit(57.29);
    let cot = T::one() / arg.tan();
    cot * cot
}

/// Transition grazing angle `asin(λ / (0.1π + 0.184π κ))`.
pub fn transition_grazing<T: Scalar>(sea_state: u8, lambda: T) -> T {
    let k = T::from_u8(sea_state).unwrap();
    (lambda / (T::lit(0.1) * T::PI() + T::lit(0.184) * T::PI() * k)).asin()
}

pub fn morchin_sigma<T: Scalar>(sea_state: u8, grazing: T, lambda: T) -> Result<ClutterParams<T>, ChannelError> {
    if sea_state > 9 {
        return Err(ChannelError::SeaStateOutOfRange(sea_state));
    }
    if !(grazing > T::zero() && grazing <= T::FRAC_PI_2()) {
        return Err(ChannelError::GrazingOutOfRange(grazing.to_f64_lossy()));
    }
    let gamma_s = sea_state_constant::<T>(sea_state);
    let phi_0 = transition_grazing(sea_state, lambda);
    let sigma_0 = if grazing <= phi_0 { (grazing / phi_0).powf(T::lit(1.9)) } else { T::one() };
    let k = T::from_u8(sea_state).unwrap();
    let sigma_sc1 = T::lit(4.0)
        * T::lit(10.0).powf(T::lit(0.6) * (k + T::one()) - T::lit(7.0))
        * sigma_0
        * grazing.sin()
        / lambda;
    Ok(ClutterParams {
        gamma_s,
        phi_0,
        sigma_0,
        sigma_sc1,
        sigma_sc2: sigma_sc2(gamma_s, grazing),
        sigma_sc: sigma_sc1 + sigma_sc2(gamma_s, grazing),
    })
}

/// Dominant clutter term `Γ_s exp(-tan²(π/2 - φ) Γ_s)`.
pub fn sigma_sc2<T: Scalar>(gamma_s: T, grazing: T) -> T {
    let t = (T::FRAC_PI_2() - grazing).tan();
    gamma_s * (-t * t * gamma_s).exp()
}

pub fn half_power_beamwidth<T: Scalar>(r: usize, spacing: T, lambda: T) -> T {
    T::lit(0.886) * lambda / (T::from_usize(r).unwrap() * spacing)
}

/// Clutter patch area `c·d_u·φ3dB / (2B cos φ)`. Fails at normal incidence.
pub fn clutter_patch_area<T: Scalar>(
    d_u: T,
    grazing: T,
    bandwidth: T,
    r: usize,
    spacing: T,
    lambda: T,
) -> Result<T, ChannelError> {
    if !(grazing > T::zero() && grazing < T::FRAC_PI_2()) {
        return Err(ChannelError::GrazingOutOfRange(grazing.to_f64_lossy()));
    }
    let cos = grazing.cos();
    if cos <= T::zero() {
        return Err(ChannelError::GrazingOutOfRange(grazing.to_f64_lossy()));
    }
    Ok(patch_area_with_cos(d_u, cos, bandwidth, r, spacing, lambda))
}

/// Clutter patch area with `cos φ` floored at `cos(89.9°)`.
pub fn clutter_patch_area_capped<T: Scalar>(
    d_u: T,
    grazing: T,
    bandwidth: T,
    r: usize,
    spacing: T,
    lambda: T,
) -> T {
    let floor = T::lit(GRAZING_CAP_DEG.to_radians().cos());
    let cos = grazing.cos().max(floor);
    patch_area_with_cos(d_u, cos, bandwidth, r, spacing, lambda)
}

fn patch_area_with_cos<T: Scalar>(d_u: T, cos: T, bandwidth: T, r: usize, spacing: T, lambda: T) -> T {
    T::lit(SPEED_OF_LIGHT) * d_u * half_power_beamwidth(r, spacing, lambda) / (T::lit(2.0) * bandwidth * cos)
}

/// One row of the clutter-curve table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClutterRow {
    pub sea_state: u8,
    pub grazing_deg: f64,
    pub sigma_sc1: f64,
    pub sigma_sc2: f64,
    pub sigma_sc: f64,
}

/// Cartesian product of sea states and grazing angles (degrees).
pub fn clutter_curve(sea_states: &[u8], grazing_deg: &[f64], lambda: f64) -> Result<Vec<ClutterRow>, ChannelError> {
    let mut rows = Vec::with_capacity(sea_states.len() * grazing_deg.len());
    for &k in sea_states {
        for &g in grazing_deg {
            let p = morchin_sigma(k, g.to_radians(), lambda)?;
            rows.push(ClutterRow {
                sea_state: k,
                grazing_deg: g,
                sigma_sc1: p.sigma_sc1,
                sigma_sc2: p.sigma_sc2,
                sigma_sc: p.sigma_sc,
            });
        }
    }
    Ok(rows)
}
