//! CSV and JSON artifacts. Every number in a summary is recomputed from the
//! decision state through the metrics module, never taken from solver
//! internals. Wall-clock times stay out of the files so identical inputs
//! give byte-identical outputs.

use std::fs;
use std::path::Path;

use iscpb_core::metrics::{active_averages, evaluate_report, MetricReport};
use iscpb_core::planner::SolveTrace;
use iscpb_core::scenario::{DecisionState, STAGE_B, STAGE_C, STAGE_P, STAGE_S};
use iscpb_core::ScenarioConfig;
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub avg_rate_per_ts: f64,
    pub avg_rate_per_active_ts_per_buoy: f64,
    #[serde(rename = "avg_harvested_mW")]
    pub avg_harvested_mw: f64,
    pub avg_mi: f64,
    /// Smallest per-buoy mean sensing MI over that buoy's active slots.
    pub min_buoy_mi: f64,
    /// Smallest per-buoy mission-average uplink rate.
    pub min_buoy_rate: f64,
    pub min_uav_buoy_distance_m: f64,
    pub min_uav_ship_distance_m: f64,
    pub feasible: bool,
    pub outer_iters: Option<usize>,
    pub converged: Option<bool>,
    #[serde(rename = "p_uav_dBm")]
    pub p_uav_dbm: f64,
}

impl Summary {
    /// Re-evaluates `state` and summarizes it.
    pub fn new(cfg: &ScenarioConfig, state: &DecisionState, trace: Option<&SolveTrace>) -> Result<(Self, MetricReport), CliError> {
        let report = evaluate_report(cfg, state).map_err(|e| CliError::Internal(e.to_string()))?;
        Ok((Self::from_report(cfg, state, &report, trace), report))
    }

    fn from_report(cfg: &ScenarioConfig, state: &DecisionState, report: &MetricReport, trace: Option<&SolveTrace>) -> Self {
        let avg = active_averages(report);
        let nu = cfg.num_buoys();
        let mut mi = vec![(0.0, 0usize); nu];
        for r in report.active_rows() {
            mi[r.u].0 += r.r_s;
            mi[r.u].1 += 1;
        }
        let min_buoy_mi = mi.iter().map(|&(s, k)| if k > 0 { s / k as f64 } else { 0.0 }).fold(f64::INFINITY, f64::min);
        let min_buoy_rate = (0..nu).map(|u| report.buoy_average_rate(u)).fold(f64::INFINITY, f64::min);
        let mut min_buoy = f64::INFINITY;
        let mut min_ship = f64::INFINITY;
        for (n, c) in state.uav_positions.iter().enumerate() {
            if let Some(u) = state.serving(n) {
                min_buoy = min_buoy.min(dist(c, &cfg.buoy_position(u, n)));
            }
            min_ship = min_ship.min(dist(c, &cfg.ship_position));
        }
        Self {
            avg_rate_per_ts: report.avg_rate_per_slot(),
            avg_rate_per_active_ts_per_buoy: avg.rate,
            avg_harvested_mw: avg.harvested_mw,
            avg_mi: avg.sensing_mi,
            min_buoy_mi,
            min_buoy_rate,
            min_uav_buoy_distance_m: min_buoy,
            min_uav_ship_distance_m: min_ship,
            feasible: report.feasible(1e-6),
            outer_iters: trace.map(|t| t.outer_iterations),
            converged: trace.map(|t| t.converged),
            p_uav_dbm: cfg.p_uav_dbm,
        }
    }
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

#[derive(Serialize)]
struct StateRow {
    n: usize,
    x: f64,
    y: f64,
    z: f64,
    serving_u: Option<usize>,
    alpha: f64,
    gamma_s: f64,
    gamma_p: f64,
    gamma_c: f64,
    gamma_b: f64,
    #[serde(rename = "p_mW")]
    p_mw: f64,
}

/// One row per slot: position and the serving buoy's decisions.
pub fn write_state(path: &Path, state: &DecisionState) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for (n, c) in state.uav_positions.iter().enumerate() {
        let u = state.serving(n);
        let (alpha, g, p) = match u {
            Some(u) => (state.assoc[u][n], state.time_fracs[u][n], state.uplink_power[u][n]),
            None => (0.0, [0.0; 4], 0.0),
        };
        w.serialize(StateRow {
            n,
            x: c[0],
            y: c[1],
            z: c[2],
            serving_u: u,
            alpha,
            gamma_s: g[STAGE_S],
            gamma_p: g[STAGE_P],
            gamma_c: g[STAGE_C],
            gamma_b: g[STAGE_B],
            p_mw: p * 1e3,
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Serialize)]
struct MetricCsvRow {
    n: usize,
    u: usize,
    alpha: f64,
    sensing_mi: f64,
    #[serde(rename = "harvested_mW")]
    harvested_mw: f64,
    uplink_rate: f64,
    backhaul_rate: f64,
    slack_sensing: f64,
    slack_energy: f64,
    slack_rate_running: f64,
    slack_backhaul: f64,
}

/// Every (slot, buoy) pair, slot-major.
pub fn write_metrics(path: &Path, report: &MetricReport) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in &report.rows {
        w.serialize(MetricCsvRow {
            n: r.n,
            u: r.u,
            alpha: r.alpha,
            sensing_mi: r.r_s,
            harvested_mw: r.p_p * 1e3,
            uplink_rate: r.r_c,
            backhaul_rate: r.r_b,
            slack_sensing: r.slack_c3,
            slack_energy: r.slack_c4,
            slack_rate_running: r.slack_c5_running,
            slack_backhaul: r.slack_c6,
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Serialize)]
struct TraceCsvRow {
    outer: usize,
    inner: usize,
    phase: &'static str,
    total_rate: f64,
    avg_rate: f64,
    eta: f64,
    penalty_residual: f64,
    trust: f64,
    viol_sensing: f64,
    viol_energy: f64,
    viol_rate: f64,
    viol_backhaul: f64,
}

pub fn write_trace(path: &Path, trace: &SolveTrace) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in &trace.rows {
        w.serialize(TraceCsvRow {
            outer: r.outer,
            inner: r.inner,
            phase: r.phase,
            total_rate: r.total_rate,
            avg_rate: r.avg_rate,
            eta: r.eta,
            penalty_residual: r.penalty_residual,
            trust: r.trust,
            viol_sensing: r.viol_sensing,
            viol_energy: r.viol_energy,
            viol_rate: r.viol_rate,
            viol_backhaul: r.viol_backhaul,
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

/// Rows of any serializable table.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| CliError::Io(e.to_string()))
}

/// State, metrics, optional trace and the summary of one solve in `dir`.
pub fn write_solution(
    dir: &Path,
    cfg: &ScenarioConfig,
    state: &DecisionState,
    trace: Option<&SolveTrace>,
) -> Result<Summary, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let (summary, report) = Summary::new(cfg, state, trace)?;
    write_state(&dir.join("state.csv"), state)?;
    write_metrics(&dir.join("metrics.csv"), &report)?;
    if let Some(t) = trace {
        write_trace(&dir.join("trace.csv"), t)?;
    }
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}
