use std::fs;
use std::path::Path;

use iscpb_core::channel::clutter_curve as clutter_table;
use iscpb_core::planner::benchmark::{benchmark, Strategy};
use iscpb_core::planner::{optimize, SolveTrace};
use iscpb_core::scenario::DecisionState;
use iscpb_core::verify::run_all;
use iscpb_core::{default_scenario, parallel_rows_scenario, ScenarioConfig};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::report::{write_json, write_rows, write_solution, Summary};
use crate::CliError;

/// Transmit powers of the bench comparison, dBm.
pub const BENCH_POWERS_DBM: [f64; 5] = [32.0, 34.0, 36.0, 38.0, 40.0];
/// Power at which the per-strategy comparison table is taken.
pub const BENCH_REFERENCE_DBM: f64 = 36.0;
const PROPOSED: &str = "proposed";

pub fn load_scenario(source: &str) -> Result<ScenarioConfig, CliError> {
    let cfg = match source {
        "default" => default_scenario(),
        "parallel-rows" | "parallel_rows" => parallel_rows_scenario(),
        path => ScenarioConfig::load(Path::new(path)).map_err(|e| CliError::Validation(format!("{path}: {e}")))?,
    };
    cfg.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string(value).unwrap_or_default());
}

pub fn run(cfg: &ScenarioConfig, out: &Path) -> Result<(), CliError> {
    create_dir(out)?;
    match optimize(cfg) {
        Ok((state, _, trace)) => {
            let summary = write_solution(out, cfg, &state, Some(&trace))?;
            eprintln!(
                "start {}, {} outer iteration(s), {:.3} bps/Hz per slot",
                trace.start, trace.outer_iterations, summary.avg_rate_per_ts
            );
            print_json(&summary);
            Ok(())
        }
        Err(e) => {
            let err = CliError::from(e);
            if let CliError::Infeasible(cert) = &err {
                write_json(&out.join("certificate.json"), cert)?;
            }
            Err(err)
        }
    }
}

/// Outcome of one solve inside a batch; failures are kept, not propagated.
struct Point {
    state: Option<(DecisionState, Option<SolveTrace>)>,
    error: Option<CliError>,
}

fn solve_point(cfg: &ScenarioConfig, strategy: Option<Strategy>) -> Point {
    let res = match strategy {
        None => optimize(cfg).map(|(s, _, t)| (s, Some(t))),
        Some(k) => benchmark(cfg, k).map(|(s, _)| (s, None)),
    };
    match res {
        Ok(s) => Point { state: Some(s), error: None },
        Err(e) => Point { state: None, error: Some(e.into()) },
    }
}

#[derive(Debug, Serialize)]
struct BatchRow {
    label: String,
    value: f64,
    status: &'static str,
    avg_rate_per_ts: Option<f64>,
    avg_rate_per_active_ts_per_buoy: Option<f64>,
    #[serde(rename = "avg_harvested_mW")]
    avg_harvested_mw: Option<f64>,
    avg_mi: Option<f64>,
    min_buoy_mi: Option<f64>,
    min_uav_buoy_distance_m: Option<f64>,
    min_uav_ship_distance_m: Option<f64>,
    feasible: Option<bool>,
    outer_iters: Option<usize>,
    error: String,
}

impl BatchRow {
    fn new(label: String, value: f64, summary: Option<&Summary>, error: Option<&CliError>) -> Self {
        let s = summary;
        Self {
            label,
            value,
            status: error.map_or("ok", |e| e.status()),
            avg_rate_per_ts: s.map(|s| s.avg_rate_per_ts),
            avg_rate_per_active_ts_per_buoy: s.map(|s| s.avg_rate_per_active_ts_per_buoy),
            avg_harvested_mw: s.map(|s| s.avg_harvested_mw),
            avg_mi: s.map(|s| s.avg_mi),
            min_buoy_mi: s.map(|s| s.min_buoy_mi),
            min_uav_buoy_distance_m: s.map(|s| s.min_uav_buoy_distance_m),
            min_uav_ship_distance_m: s.map(|s| s.min_uav_ship_distance_m),
            feasible: s.map(|s| s.feasible),
            outer_iters: s.and_then(|s| s.outer_iters),
            error: error.map(|e| e.to_string()).unwrap_or_default(),
        }
    }
}

/// Writes a finished point into `dir` and returns its table row.
fn record(dir: &Path, cfg: &ScenarioConfig, label: String, value: f64, point: Point) -> Result<BatchRow, CliError> {
    match point.state {
        Some((state, trace)) => {
            let summary = write_solution(dir, cfg, &state, trace.as_ref())?;
            Ok(BatchRow::new(label, value, Some(&summary), None))
        }
        None => {
            create_dir(dir)?;
            let err = point.error.expect("failed point carries its error");
            write_json(&dir.join("error.json"), &err.to_json())?;
            Ok(BatchRow::new(label, value, None, Some(&err)))
        }
    }
}

pub fn bench(cfg: &ScenarioConfig, out: &Path, only: Option<&str>) -> Result<(), CliError> {
    let strategies: Vec<Strategy> = match only {
        Some(name) => vec![name.parse().map_err(|_| {
            CliError::Validation(format!("unknown strategy `{name}` (expected one of FoB, FHF, TF, SF, FETA)"))
        })?],
        None => Strategy::ALL.to_vec(),
    };
    let dir = out.join("bench");
    create_dir(&dir)?;
    let mut jobs: Vec<(Option<Strategy>, f64)> = Vec::new();
    for s in std::iter::once(None).chain(strategies.iter().copied().map(Some)) {
        for p in BENCH_POWERS_DBM {
            jobs.push((s, p));
        }
    }
    let points: Vec<(Option<Strategy>, f64, ScenarioConfig, Point)> = jobs
        .into_par_iter()
        .map(|(s, p)| {
            let mut c = cfg.clone();
            c.p_uav_dbm = p;
            let point = solve_point(&c, s);
            eprintln!("{} at {p} dBm done", s.map_or(PROPOSED, Strategy::name));
            (s, p, c, point)
        })
        .collect();
    let mut rows = Vec::new();
    for (s, p, c, point) in points {
        let name = s.map_or(PROPOSED, Strategy::name);
        rows.push(record(&dir.join(format!("{name}_{p}dBm")), &c, name.to_string(), p, point)?);
    }
    write_rows(&dir.join("power_sweep.csv"), &rows)?;
    let reference: Vec<&BatchRow> = rows.iter().filter(|r| r.value == BENCH_REFERENCE_DBM).collect();
    write_rows(&dir.join("comparison.csv"), &reference)?;
    let meta = json!({
        "p_uav_dBm": BENCH_POWERS_DBM,
        "comparison_p_uav_dBm": BENCH_REFERENCE_DBM,
        "strategies": std::iter::once(PROPOSED).chain(strategies.iter().map(|s| s.name())).collect::<Vec<_>>(),
        "note": "power range 32-40 dBm around the 36 dBm default, chosen to cover the 40 dBm comparison point",
    });
    write_json(&dir.join("metadata.json"), &meta)?;
    print_json(&reference);
    Ok(())
}

/// Sweepable scenario parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    SeaState,
    GammaSTh,
    Chi,
    PUav,
}

impl Axis {
    fn parse(name: &str) -> Result<Self, CliError> {
        match name {
            "sea_state" => Ok(Axis::SeaState),
            "gamma_s_th" => Ok(Axis::GammaSTh),
            "chi" => Ok(Axis::Chi),
            "p_uav" => Ok(Axis::PUav),
            _ => Err(CliError::Validation(format!(
                "unknown sweep axis `{name}` (expected sea_state, gamma_s_th, chi or p_uav)"
            ))),
        }
    }

    fn apply(self, cfg: &mut ScenarioConfig, v: f64) -> Result<(), CliError> {
        let bad = |why: &str| Err(CliError::Validation(format!("{v}: {why}")));
        match self {
            Axis::SeaState => {
                if !(0.0..=9.0).contains(&v) || v.fract() != 0.0 {
                    return bad("sea state must be an integer in 0..=9");
                }
                cfg.sea_state = v as u8;
            }
            Axis::GammaSTh => {
                if !(v > 0.0 && v.is_finite()) {
                    return bad("sensing threshold must be positive");
                }
                cfg.gamma_s_th = v;
            }
            Axis::Chi => {
                if !(v > 0.0 && v < 1.0) {
                    return bad("backhaul ratio must lie in (0, 1)");
                }
                cfg.chi = vec![v; cfg.num_buoys()];
            }
            Axis::PUav => {
                if !v.is_finite() {
                    return bad("power must be finite");
                }
                cfg.p_uav_dbm = v;
            }
        }
        cfg.validate().map_err(|e| CliError::Validation(e.to_string()))
    }
}

/// Parses `<axis>=<v1,v2,...>`.
pub fn parse_sweep(spec: &str) -> Result<(String, Axis, Vec<f64>), CliError> {
    let (name, values) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("sweep `{spec}` is not of the form axis=v1,v2,...")))?;
    let axis = Axis::parse(name.trim())?;
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::Validation(format!("sweep value `{v}` is not a number"))))
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(CliError::Validation("sweep needs at least one value".into()));
    }
    Ok((name.trim().to_string(), axis, values))
}

pub fn sweep(cfg: &ScenarioConfig, out: &Path, spec: &str) -> Result<(), CliError> {
    let (name, axis, values) = parse_sweep(spec)?;
    let configs = values
        .iter()
        .map(|&v| {
            let mut c = cfg.clone();
            axis.apply(&mut c, v).map(|_| (v, c))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let dir = out.join("sweep");
    create_dir(&dir)?;
    let points: Vec<(f64, ScenarioConfig, Point)> = configs
        .into_par_iter()
        .map(|(v, c)| {
            let point = solve_point(&c, None);
            eprintln!("{name}={v} done");
            (v, c, point)
        })
        .collect();
    let mut rows = Vec::new();
    for (v, c, point) in points {
        rows.push(record(&dir.join(format!("{name}_{v}")), &c, name.clone(), v, point)?);
    }
    write_rows(&dir.join(format!("{name}.csv")), &rows)?;
    print_json(&rows);
    Ok(())
}

pub fn clutter_curve(cfg: &ScenarioConfig, out: &Path) -> Result<(), CliError> {
    let sea_states: Vec<u8> = (0..=9).collect();
    let grazing: Vec<f64> = (1..=90).map(f64::from).collect();
    let rows = clutter_table(&sea_states, &grazing, cfg.wavelength()).map_err(|e| CliError::Internal(e.to_string()))?;
    create_dir(out)?;
    write_rows(&out.join("clutter_curve.csv"), &rows)?;
    print_json(&json!({ "rows": rows.len(), "sea_states": sea_states.len(), "grazing_deg": grazing.len() }));
    Ok(())
}

pub fn verify(out: &Path, seed: u64, mutation: f64) -> Result<(), CliError> {
    let checks = run_all(seed, mutation);
    for c in &checks {
        eprintln!(
            "{} {:<18} measured {:.3e} tolerance {:.1e}  {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.tolerance,
            c.detail
        );
    }
    create_dir(out)?;
    write_rows(&out.join("verify.csv"), &checks)?;
    print_json(&checks);
    match checks.iter().filter(|c| !c.passed).count() {
        0 => Ok(()),
        k => Err(CliError::ChecksFailed(k)),
    }
}
