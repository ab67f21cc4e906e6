//! Scenario definition: geometry, RF constants, QoS thresholds and mission
//! discretization, plus the two built-in layouts and the JSON document format.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::SPEED_OF_LIGHT;
use crate::scalar::{db_to_linear, dbm_to_watts};

pub type Point3 = [f64; 3];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario document is malformed: {0}")]
    Parse(String),
    #[error("{field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { field, reason: reason.into() }
}

/// Complete, validated simulation scenario.
///
/// Powers are stored in dBm and gains in dBi exactly as configured; use the
/// accessor methods for linear values. Buoys are anchored at
/// `buoy_positions` unless `buoy_tracks` gives a per-slot position.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub buoy_positions: Vec<Point3>,
    pub buoy_tracks: Option<Vec<Vec<Point3>>>,
    pub ship_position: Point3,
    pub uav_start: Point3,
    pub uav_end: Point3,
    pub uav_height: f64,

    pub p_uav_dbm: f64,
    pub gain_ship_dbi: f64,
    pub gain_uav_dbi: f64,
    pub gain_buoy_dbi: f64,
    /// Total in-band noise power at every receiver.
    pub noise_dbm: f64,
    pub xi: Vec<f64>,
    pub sea_state: u8,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub antennas_per_side: usize,
    pub antenna_spacing_m: f64,
    pub rcs_m2: Vec<f64>,
    /// Symbol duration of the sensing waveform. Only enters unit-modulus
    /// phase factors, so no magnitude metric reads it.
    pub symbol_duration_s: f64,

    pub gamma_s_th: f64,
    pub gamma_c_th: f64,
    pub chi: Vec<f64>,

    pub v_max: f64,
    pub duration_s: f64,
    pub num_slots: usize,
    pub displacement_sigma_m: f64,
}

impl ScenarioConfig {
    pub fn num_buoys(&self) -> usize {
        self.buoy_positions.len()
    }

    pub fn slot_len(&self) -> f64 {
        self.duration_s / self.num_slots as f64
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn p_uav_w(&self) -> f64 {
        dbm_to_watts(self.p_uav_dbm)
    }

    pub fn noise_w(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }

    pub fn gain_uav(&self) -> f64 {
        db_to_linear(self.gain_uav_dbi)
    }

    pub fn gain_buoy(&self) -> f64 {
        db_to_linear(self.gain_buoy_dbi)
    }

    pub fn gain_ship(&self) -> f64 {
        db_to_linear(self.gain_ship_dbi)
    }

    /// Maximum UAV displacement between consecutive slots.
    pub fn max_step(&self) -> f64 {
        self.v_max * self.slot_len()
    }

    /// Position of buoy `u` during slot `n` (zero based).
    pub fn buoy_position(&self, u: usize, n: usize) -> Point3 {
        match &self.buoy_tracks {
            Some(tracks) => tracks[u][n],
            None => self.buoy_positions[u],
        }
    }

    /// Checks every invariant; the error names the offending field.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let u = self.num_buoys();
        if u == 0 {
            return Err(invalid("geometry.buoys", "at least one buoy required"));
        }
        if self.num_slots == 0 {
            return Err(invalid("mission.num_slots", "must be >= 1"));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(invalid("mission.duration_s", "must be positive"));
        }
        if !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return Err(invalid("mission.v_max_mps", "must be positive"));
        }
        if self.displacement_sigma_m < 0.0 {
            return Err(invalid("mission.displacement_sigma_m", "must be non-negative"));
        }
        if self.sea_state > 9 {
            return Err(invalid("rf.sea_state", "out of 0..=9"));
        }
        for (field, v) in [
            ("rf.carrier_hz", self.carrier_hz),
            ("rf.bandwidth_hz", self.bandwidth_hz),
            ("rf.antenna_spacing_m", self.antenna_spacing_m),
            ("rf.symbol_duration_s", self.symbol_duration_s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(field, "must be positive"));
            }
        }
        for (field, v) in [
            ("rf.p_uav_dbm", self.p_uav_dbm),
            ("rf.gain_ship_dbi", self.gain_ship_dbi),
            ("rf.gain_uav_dbi", self.gain_uav_dbi),
            ("rf.gain_buoy_dbi", self.gain_buoy_dbi),
            ("rf.noise_dbm", self.noise_dbm),
        ] {
            if !v.is_finite() {
                return Err(invalid(field, "must be finite"));
            }
        }
        if self.antennas_per_side == 0 {
            return Err(invalid("rf.antennas_per_side", "must be >= 1"));
        }
        if self.xi.len() != u {
            return Err(invalid("rf.xi", format!("expected {u} entries")));
        }
        if self.xi.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return Err(invalid("rf.xi", "xi out of (0,1)"));
        }
        if self.rcs_m2.len() != u {
            return Err(invalid("rf.rcs_m2", format!("expected {u} entries")));
        }
        if self.rcs_m2.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(invalid("rf.rcs_m2", "must be positive"));
        }
        if self.chi.len() != u {
            return Err(invalid("qos.chi", format!("expected {u} entries")));
        }
        if self.chi.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return Err(invalid("qos.chi", "chi out of (0,1)"));
        }
        if !(self.gamma_s_th >= 0.0 && self.gamma_s_th.is_finite()) {
            return Err(invalid("qos.gamma_s_th", "must be non-negative"));
        }
        if !(self.gamma_c_th >= 0.0 && self.gamma_c_th.is_finite()) {
            return Err(invalid("qos.gamma_c_th", "must be non-negative"));
        }
        if (self.uav_start[2] - self.uav_height).abs() > 1e-9 {
            return Err(invalid("geometry.uav_start", "z must equal uav_height_m"));
        }
        if (self.uav_end[2] - self.uav_height).abs() > 1e-9 {
            return Err(invalid("geometry.uav_end", "z must equal uav_height_m"));
        }
        if let Some(tracks) = &self.buoy_tracks {
            if tracks.len() != u || tracks.iter().any(|t| t.len() != self.num_slots) {
                return Err(invalid("geometry.buoy_tracks", "must be buoys x num_slots"));
            }
        }
        for uu in 0..u {
            for n in 0..self.num_slots {
                if self.buoy_position(uu, n)[2] >= self.uav_height {
                    return Err(invalid("geometry.uav_height_m", "UAV must fly strictly above every buoy"));
                }
                if self.buoy_tracks.is_none() {
                    break;
                }
            }
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self, ScenarioError> {
        let doc: ScenarioDocument =
            serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        doc.into_config()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&ScenarioDocument::from_config(self))
            .expect("scenario document serializes")
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), ScenarioError> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }
}

/// Loads a scenario document; alias of [`ScenarioConfig::from_json_str`].
pub fn load_scenario(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    ScenarioConfig::from_json_str(text)
}

/// Places `count` buoys uniformly (in angle) on a circular arc at sea level.
/// Buoy 0 sits next to `start_angle`.
pub fn arc_layout(center: Point3, radius: f64, count: usize, start_angle: f64, end_angle: f64) -> Vec<Point3> {
    (0..count)
        .map(|k| {
            let th = start_angle + (k as f64 + 0.5) * (end_angle - start_angle) / count as f64;
            [center[0] + radius * th.cos(), center[1] + radius * th.sin(), 0.0]
        })
        .collect()
}

/// The ten-buoy arc scenario with all default RF, QoS and mission values.
pub fn default_scenario() -> ScenarioConfig {
    let u = 10;
    let carrier_hz = 5.0e9;
    ScenarioConfig {
        buoy_positions: arc_layout([500.0, 0.0, 0.0], 500.0, u, PI, 0.0),
        buoy_tracks: None,
        ship_position: [500.0, -20.0, 0.0],
        uav_start: [0.0, -10.0, 10.0],
        uav_end: [1000.0, -10.0, 10.0],
        uav_height: 10.0,
        p_uav_dbm: 36.0,
        gain_ship_dbi: 30.0,
        gain_uav_dbi: 26.0,
        gain_buoy_dbi: 20.0,
        noise_dbm: -107.0,
        xi: vec![0.8; u],
        sea_state: 3,
        carrier_hz,
        bandwidth_hz: 10.0e6,
        antennas_per_side: 8,
        antenna_spacing_m: 0.5 * SPEED_OF_LIGHT / carrier_hz,
        rcs_m2: vec![1.0; u],
        symbol_duration_s: 1.0e-7,
        gamma_s_th: 1.0,
        gamma_c_th: 1.0,
        chi: vec![0.2; u],
        v_max: 30.0,
        duration_s: 100.0,
        num_slots: 100,
        displacement_sigma_m: 0.1,
    }
}

/// Two parallel rows of five buoys each; everything else as the default.
pub fn parallel_rows_scenario() -> ScenarioConfig {
    let mut cfg = default_scenario();
    let xs = [100.0, 300.0, 500.0, 700.0, 900.0];
    cfg.buoy_positions = [80.0, 220.0]
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| [x, y, 0.0]))
        .collect();
    cfg
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
enum PerBuoy {
    Uniform(f64),
    Each(Vec<f64>),
}

impl PerBuoy {
    fn expand(self, count: usize) -> Vec<f64> {
        match self {
            PerBuoy::Uniform(v) => vec![v; count],
            PerBuoy::Each(v) => v,
        }
    }

    fn compact(values: &[f64]) -> Self {
        match values.first() {
            Some(&first) if values.iter().all(|&v| v == first) => PerBuoy::Uniform(first),
            _ => PerBuoy::Each(values.to_vec()),
        }
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDocument {
    #[serde(default)]
    geometry: GeometrySection,
    #[serde(default)]
    rf: RfSection,
    #[serde(default)]
    qos: QosSection,
    #[serde(default)]
    mission: MissionSection,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometrySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    buoys: Option<Vec<Point3>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    buoy_tracks: Option<Vec<Vec<Point3>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ship: Option<Point3>,
    #[serde(skip_serializing_if = "Option::is_none")]
    uav_start: Option<Point3>,
    #[serde(skip_serializing_if = "Option::is_none")]
    uav_end: Option<Point3>,
    #[serde(skip_serializing_if = "Option::is_none")]
    uav_height_m: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RfSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    p_uav_dbm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gain_ship_dbi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gain_uav_dbi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gain_buoy_dbi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_dbm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    xi: Option<PerBuoy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sea_state: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    carrier_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bandwidth_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    antennas_per_side: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    antenna_spacing_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rcs_m2: Option<PerBuoy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    symbol_duration_s: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QosSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_s_th: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_c_th: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    chi: Option<PerBuoy>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MissionSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    v_max_mps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    duration_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    num_slots: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    displacement_sigma_m: Option<f64>,
}

impl ScenarioDocument {
    fn into_config(self) -> Result<ScenarioConfig, ScenarioError> {
        let mut cfg = default_scenario();
        let g = self.geometry;
        if let Some(b) = g.buoys {
            cfg.buoy_positions = b;
        }
        let u = cfg.num_buoys();
        cfg.buoy_tracks = g.buoy_tracks;
        if let Some(v) = g.ship {
            cfg.ship_position = v;
        }
        if let Some(v) = g.uav_start {
            cfg.uav_start = v;
        }
        if let Some(v) = g.uav_end {
            cfg.uav_end = v;
        }
        if let Some(v) = g.uav_height_m {
            cfg.uav_height = v;
        }

        let rf = self.rf;
        if let Some(v) = rf.p_uav_dbm {
            cfg.p_uav_dbm = v;
        }
        if let Some(v) = rf.gain_ship_dbi {
            cfg.gain_ship_dbi = v;
        }
        if let Some(v) = rf.gain_uav_dbi {
            cfg.gain_uav_dbi = v;
        }
        if let Some(v) = rf.gain_buoy_dbi {
            cfg.gain_buoy_dbi = v;
        }
        if let Some(v) = rf.noise_dbm {
            cfg.noise_dbm = v;
        }
        cfg.xi = rf.xi.map_or_else(|| vec![0.8; u], |v| v.expand(u));
        if let Some(v) = rf.sea_state {
            if !(0..=9).contains(&v) {
                return Err(invalid("rf.sea_state", "out of 0..=9"));
            }
            cfg.sea_state = v as u8;
        }
        if let Some(v) = rf.carrier_hz {
            cfg.carrier_hz = v;
        }
        if let Some(v) = rf.bandwidth_hz {
            cfg.bandwidth_hz = v;
        }
        if let Some(v) = rf.antennas_per_side {
            cfg.antennas_per_side = v;
        }
        cfg.antenna_spacing_m = rf.antenna_spacing_m.unwrap_or(0.5 * cfg.wavelength());
        cfg.rcs_m2 = rf.rcs_m2.map_or_else(|| vec![1.0; u], |v| v.expand(u));
        if let Some(v) = rf.symbol_duration_s {
            cfg.symbol_duration_s = v;
        }

        let q = self.qos;
        if let Some(v) = q.gamma_s_th {
            cfg.gamma_s_th = v;
        }
        if let Some(v) = q.gamma_c_th {
            cfg.gamma_c_th = v;
        }
        cfg.chi = q.chi.map_or_else(|| vec![0.2; u], |v| v.expand(u));

        let m = self.mission;
        if let Some(v) = m.v_max_mps {
            cfg.v_max = v;
        }
        if let Some(v) = m.duration_s {
            cfg.duration_s = v;
        }
        if let Some(v) = m.num_slots {
            cfg.num_slots = v;
        }
        if let Some(v) = m.displacement_sigma_m {
            cfg.displacement_sigma_m = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_config(cfg: &ScenarioConfig) -> Self {
        ScenarioDocument {
            geometry: GeometrySection {
                buoys: Some(cfg.buoy_positions.clone()),
                buoy_tracks: cfg.buoy_tracks.clone(),
                ship: Some(cfg.ship_position),
                uav_start: Some(cfg.uav_start),
                uav_end: Some(cfg.uav_end),
                uav_height_m: Some(cfg.uav_height),
            },
            rf: RfSection {
                p_uav_dbm: Some(cfg.p_uav_dbm),
                gain_ship_dbi: Some(cfg.gain_ship_dbi),
                gain_uav_dbi: Some(cfg.gain_uav_dbi),
                gain_buoy_dbi: Some(cfg.gain_buoy_dbi),
                noise_dbm: Some(cfg.noise_dbm),
                xi: Some(PerBuoy::compact(&cfg.xi)),
                sea_state: Some(cfg.sea_state as i64),
                carrier_hz: Some(cfg.carrier_hz),
                bandwidth_hz: Some(cfg.bandwidth_hz),
                antennas_per_side: Some(cfg.antennas_per_side),
                antenna_spacing_m: Some(cfg.antenna_spacing_m),
                rcs_m2: Some(PerBuoy::compact(&cfg.rcs_m2)),
                symbol_duration_s: Some(cfg.symbol_duration_s),
            },
            qos: QosSection {
                gamma_s_th: Some(cfg.gamma_s_th),
                gamma_c_th: Some(cfg.gamma_c_th),
                chi: Some(PerBuoy::compact(&cfg.chi)),
            },
            mission: MissionSection {
                v_max_mps: Some(cfg.v_max),
                duration_s: Some(cfg.duration_s),
                num_slots: Some(cfg.num_slots),
                displacement_sigma_m: Some(cfg.displacement_sigma_m),
            },
        }
    }
}

/// Index of each stage inside a `[f64; 4]` time-fraction array.
pub const STAGE_S: usize = 0;
pub const STAGE_P: usize = 1;
pub const STAGE_C: usize = 2;
pub const STAGE_B: usize = 3;

/// Optimization variables for one mission: UAV waypoints, association,
/// per-stage time fractions `[s, p, c, b]` and uplink power (watts).
/// Per-buoy arrays are indexed `[u][n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionState {
    pub uav_positions: Vec<Point3>,
    pub assoc: Vec<Vec<f64>>,
    pub time_fracs: Vec<Vec<[f64; 4]>>,
    pub uplink_power: Vec<Vec<f64>>,
}

impl DecisionState {
    /// All-zero decisions with the UAV parked at the start point.
    pub fn zeros(cfg: &ScenarioConfig) -> Self {
        let (u, n) = (cfg.num_buoys(), cfg.num_slots);
        Self {
            uav_positions: vec![cfg.uav_start; n],
            assoc: vec![vec![0.0; n]; u],
            time_fracs: vec![vec![[0.0; 4]; n]; u],
            uplink_power: vec![vec![0.0; n]; u],
        }
    }

    pub fn num_slots(&self) -> usize {
        self.uav_positions.len()
    }

    pub fn num_buoys(&self) -> usize {
        self.assoc.len()
    }

    /// Buoy with the largest positive association in slot `n`, lowest
    /// index on ties.
    pub fn serving(&self, n: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (u, a) in self.assoc.iter().enumerate() {
            if a[n] > 0.0 && best.map_or(true, |(_, b)| a[n] > b) {
                best = Some((u, a[n]));
            }
        }
        best.map(|(u, _)| u)
    }

    /// Structural invariant violations (association, fraction coupling,
    /// speed limit, endpoints), each as a human-readable string.
    pub fn violations(&self, cfg: &ScenarioConfig, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        let n_slots = self.num_slots();
        if n_slots != cfg.num_slots || self.num_buoys() != cfg.num_buoys() {
            out.push("dimensions do not match the scenario".to_string());
            return out;
        }
        for n in 0..n_slots {
            let sum: f64 = self.assoc.iter().map(|a| a[n]).sum();
            if sum > 1.0 + tol {
                out.push(format!("slot {n}: association sum {sum}"));
            }
            for u in 0..self.num_buoys() {
                let a = self.assoc[u][n];
                if !(-tol..=1.0 + tol).contains(&a) {
                    out.push(format!("slot {n}, buoy {u}: alpha {a} outside [0,1]"));
                }
                let g = self.time_fracs[u][n];
                if g.iter().any(|&x| x < -tol || x > 1.0 + tol) {
                    out.push(format!("slot {n}, buoy {u}: time fraction outside [0,1]"));
                }
                let total: f64 = g.iter().sum();
                if (total - a).abs() > tol.max(1e-9) && (a == 0.0 || a == 1.0) {
                    out.push(format!("slot {n}, buoy {u}: fractions sum {total} with alpha {a}"));
                }
                if self.uplink_power[u][n] < -tol {
                    out.push(format!("slot {n}, buoy {u}: negative power"));
                }
            }
            if n > 0 {
                let step = crate::channel::distance(&self.uav_positions[n], &self.uav_positions[n - 1]);
                if step > cfg.max_step() * (1.0 + tol) + tol {
                    out.push(format!("slot {n}: step {step} exceeds {}", cfg.max_step()));
                }
            }
        }
        let ends = [(0, cfg.uav_start), (n_slots - 1, cfg.uav_end)];
        for (n, target) in ends {
            if crate::channel::distance(&self.uav_positions[n], &target) > tol.max(1e-9) {
                out.push(format!("slot {n}: endpoint not pinned"));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_matches_table_values() {
        let cfg = default_scenario();
        cfg.validate().unwrap();
        assert_eq!(cfg.p_uav_dbm, 36.0);
        assert_eq!(cfg.sea_state, 3);
        assert_eq!(cfg.chi, vec![0.2; 10]);
        assert_eq!(cfg.uav_start, [0.0, -10.0, 10.0]);
        assert_eq!(cfg.uav_end, [1000.0, -10.0, 10.0]);
        assert_eq!(cfg.num_slots, 100);
        assert_eq!(cfg.slot_len() * cfg.num_slots as f64, cfg.duration_s);
        assert_eq!(cfg.slot_len(), 1.0);
        assert!((cfg.p_uav_w() - 3.981).abs() / 3.981 < 1e-3);
        assert!((cfg.wavelength() - 0.06).abs() < 1e-15);
    }

    #[test]
    fn arc_buoys_on_circle() {
        let cfg = default_scenario();
        for b in &cfg.buoy_positions {
            let r = ((b[0] - 500.0).powi(2) + b[1].powi(2)).sqrt();
            assert!((r - 500.0).abs() < 1e-9);
            assert_eq!(b[2], 0.0);
        }
    }

    #[test]
    fn single_field_override() {
        let cfg = load_scenario(r#"{"rf": {"sea_state": 4}}"#).unwrap();
        let mut expected = default_scenario();
        expected.sea_state = 4;
        assert_eq!(cfg, expected);
    }

    #[test]
    fn xi_out_of_range_is_rejected() {
        let err = load_scenario(r#"{"rf": {"xi": 1.2}}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("xi out of (0,1)"), "{msg}");
    }

    #[test]
    fn unknown_key_is_schema_violation() {
        assert!(matches!(load_scenario(r#"{"rff": {}}"#), Err(ScenarioError::Parse(_))));
        assert!(matches!(load_scenario(r#"{"rf": {"sea_state": 12}}"#), Err(ScenarioError::Invalid { .. })));
    }

    #[test]
    fn uav_must_be_above_buoys() {
        let err = load_scenario(r#"{"geometry": {"buoys": [[0,0,20]]}}"#).unwrap_err();
        assert!(err.to_string().contains("uav_height_m"));
    }

    #[test]
    fn parallel_rows_document_round_trips() {
        let rows = parallel_rows_scenario();
        rows.validate().unwrap();
        assert_eq!(rows.num_buoys(), 10);
        let ys: Vec<f64> = rows.buoy_positions.iter().map(|b| b[1]).collect();
        assert_eq!(ys.iter().filter(|&&y| y == 80.0).count(), 5);
        assert_eq!(ys.iter().filter(|&&y| y == 220.0).count(), 5);
        let def = default_scenario();
        assert_eq!(rows.ship_position, def.ship_position);
        assert_eq!(rows.uav_start, def.uav_start);
        assert_eq!(rows.uav_end, def.uav_end);

        let text = rows.to_json_string();
        assert_eq!(load_scenario(&text).unwrap(), rows);
    }

    #[test]
    fn per_buoy_arrays_accepted() {
        let cfg = load_scenario(
            r#"{"geometry": {"buoys": [[10,20,0],[30,40,0]]}, "qos": {"chi": [0.1, 0.3]}}"#,
        )
        .unwrap();
        assert_eq!(cfg.chi, vec![0.1, 0.3]);
        assert_eq!(cfg.xi, vec![0.8, 0.8]);
        assert!(load_scenario(r#"{"qos": {"chi": [0.1, 0.3]}}"#).is_err());
    }
}
