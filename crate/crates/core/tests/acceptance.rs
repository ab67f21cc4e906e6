//! Acceptance criteria, one PASS/FAIL line each. The test fails if any
//! criterion is red; every line is printed first so the full picture is
//! visible with `--nocapture` or in the failure output.

use std::time::Instant;

use iscpb_core::metrics::{active_averages, MetricReport};
use iscpb_core::planner::benchmark::{benchmark, Strategy};
use iscpb_core::planner::{optimize, SolveTrace};
use iscpb_core::scenario::DecisionState;
use iscpb_core::verify::run_all;
use iscpb_core::{default_scenario, parallel_rows_scenario, ScenarioConfig};

const CONSTRAINT_TOL: f64 = 1e-6;

struct Solved {
    state: DecisionState,
    report: MetricReport,
    trace: SolveTrace,
}

fn solve(cfg: &ScenarioConfig) -> Solved {
    let (state, report, trace) = optimize(cfg).expect("planner run");
    Solved { state, report, trace }
}

fn with(f: impl FnOnce(&mut ScenarioConfig)) -> ScenarioConfig {
    let mut cfg = default_scenario();
    f(&mut cfg);
    cfg
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Mean sensing MI over each buoy's active slots.
fn buoy_mi(report: &MetricReport) -> Vec<f64> {
    let mut acc = vec![(0.0, 0usize); report.num_buoys];
    for r in report.active_rows() {
        acc[r.u].0 += r.r_s;
        acc[r.u].1 += 1;
    }
    acc.into_iter().map(|(s, k)| if k > 0 { s / k as f64 } else { 0.0 }).collect()
}

fn min_buoy_distance(cfg: &ScenarioConfig, state: &DecisionState) -> f64 {
    let mut m = f64::INFINITY;
    for (n, c) in state.uav_positions.iter().enumerate() {
        for u in 0..cfg.num_buoys() {
            m = m.min(dist(c, &cfg.buoy_position(u, n)));
        }
    }
    m
}

fn min_ship_distance(cfg: &ScenarioConfig, state: &DecisionState) -> f64 {
    state.uav_positions.iter().map(|c| dist(c, &cfg.ship_position)).fold(f64::INFINITY, f64::min)
}

fn monotone_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Outer loop converged within six iterations with a nondecreasing objective.
fn convergence_ok(trace: &SolveTrace) -> (bool, String) {
    let obj = trace.outer_objectives();
    let nondecreasing = obj.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12));
    let ok = trace.converged && trace.outer_iterations <= 6 && nondecreasing;
    (ok, format!("{} outer, converged {}, objectives {:?}", trace.outer_iterations, trace.converged, obj))
}

/// Feasible, endpoints pinned, speed limit held, association binary.
fn trajectory_ok(cfg: &ScenarioConfig, s: &Solved) -> bool {
    s.state.violations(cfg, CONSTRAINT_TOL).is_empty() && s.report.feasible(CONSTRAINT_TOL)
}

struct Line {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
}

#[test]
fn acceptance() {
    let mut lines = Vec::new();
    let mut push = |id, name, passed, detail: String| {
        let line = Line { id, name, passed, detail };
        println!("[{}] {} {}: {}", if line.passed { "PASS" } else { "FAIL" }, line.id, line.name, line.detail);
        lines.push(line);
    };

    let cfg = default_scenario();
    let t0 = Instant::now();
    let base = solve(&cfg);
    let runtime = t0.elapsed().as_secs_f64();
    let rate = base.report.avg_rate_per_slot();
    push(
        1,
        "headline rate",
        (20.0..=28.0).contains(&rate) && runtime <= 600.0,
        format!("{rate:.3} bps/Hz per slot (band [20, 28]), {runtime:.1} s (limit 600 s)"),
    );

    let avg = active_averages(&base.report);
    push(
        2,
        "harvested power",
        (1.0..=4.0).contains(&avg.harvested_mw),
        format!("{:.3} mW per active slot (band [1, 4])", avg.harvested_mw),
    );

    let mi = buoy_mi(&base.report);
    let min_mi = mi.iter().cloned().fold(f64::INFINITY, f64::min);
    let min_rate = (0..cfg.num_buoys()).map(|u| base.report.buoy_average_rate(u)).fold(f64::INFINITY, f64::min);
    push(
        3,
        "QoS",
        min_mi >= cfg.gamma_s_th - CONSTRAINT_TOL && min_rate >= cfg.gamma_c_th - CONSTRAINT_TOL,
        format!(
            "min per-buoy MI {min_mi:.7} (>= {}), min per-buoy rate {min_rate:.4} (>= {})",
            cfg.gamma_s_th, cfg.gamma_c_th
        ),
    );

    let rows_cfg = parallel_rows_scenario();
    let rows = solve(&rows_cfg);
    let (ok_a, da) = convergence_ok(&base.trace);
    let (ok_b, db) = convergence_ok(&rows.trace);
    push(4, "convergence", ok_a && ok_b, format!("default: {da}; parallel rows: {db}"));

    let mut bench = Vec::new();
    for k in Strategy::ALL {
        let (_, report) = benchmark(&cfg, k).expect("benchmark run");
        bench.push((k, report));
    }
    let rate_of = |k: Strategy| bench.iter().find(|(s, _)| *s == k).map(|(_, r)| r.avg_rate_per_slot()).unwrap();
    let feta = rate_of(Strategy::Feta);
    let best_fixed = [Strategy::FoB, Strategy::Fhf, Strategy::Tf, Strategy::Sf].into_iter().map(rate_of).fold(f64::NEG_INFINITY, f64::max);
    let fob_mi = bench.iter().find(|(s, _)| *s == Strategy::FoB).map(|(_, r)| active_averages(r).sensing_mi).unwrap();
    let high = solve(&with(|c| c.p_uav_dbm = 40.0));
    let rate40 = high.report.avg_rate_per_slot();
    let ordering = rate >= feta && feta >= best_fixed;
    let fob_ok = fob_mi < 1.0 && (0.2..=0.8).contains(&fob_mi);
    let high_ok = (22.0..=28.0).contains(&rate40);
    let table: Vec<String> = bench.iter().map(|(k, r)| format!("{k} {:.3}", r.avg_rate_per_slot())).collect();
    push(
        5,
        "benchmarks",
        ordering && fob_ok && high_ok,
        format!(
            "proposed {rate:.3} >= FETA {feta:.3} >= max fixed {best_fixed:.3}: {ordering} [{}]; FoB MI {fob_mi:.3} in [0.2, 0.8]: {fob_ok}; 40 dBm {rate40:.3} in [22, 28]: {high_ok}",
            table.join(", ")
        ),
    );

    let mut sea = Vec::new();
    let mut standoff = f64::NAN;
    for k in 1..=4u8 {
        let c = with(|c| c.sea_state = k);
        let s = if k == cfg.sea_state { None } else { Some(solve(&c)) };
        let s = s.as_ref().unwrap_or(&base);
        if k == 3 {
            standoff = min_buoy_distance(&c, &s.state);
        }
        sea.push(s.report.avg_rate_per_slot());
    }
    let thresholds = [0.01, 0.1, 1.0, 2.0, 3.0, 4.0];
    let mut qos = Vec::new();
    for &g in &thresholds {
        let r = if g == cfg.gamma_s_th { rate } else { solve(&with(|c| c.gamma_s_th = g)).report.avg_rate_per_slot() };
        qos.push(r);
    }
    let sea_drop = sea[0] - sea[3];
    let qos_drop = qos[0] - qos[qos.len() - 1];
    let sea_ok = (0.5..=3.0).contains(&sea_drop) && monotone_decreasing(&sea);
    let qos_ok = (2.5..=6.0).contains(&qos_drop) && monotone_decreasing(&qos);
    let standoff_ok = standoff >= 5.0;
    push(
        6,
        "sweep trends",
        sea_ok && qos_ok && standoff_ok,
        format!(
            "sea state 1..4 {sea:.3?} drop {sea_drop:.3} in [0.5, 3]: {sea_ok}; sensing threshold {thresholds:?} {qos:.3?} drop {qos_drop:.3} in [2.5, 6]: {qos_ok}; stand-off at sea state 3 {standoff:.2} m >= 5: {standoff_ok}"
        ),
    );

    let checks = run_all(1, 1.0);
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} {:.3e} > {:.1e}", c.name, c.measured, c.tolerance))
        .collect();
    push(
        7,
        "property suites",
        failed.is_empty(),
        if failed.is_empty() { format!("{} suites pass", checks.len()) } else { format!("failing: {}", failed.join("; ")) },
    );

    let chis = [0.1, 0.2, 0.3, 0.4];
    let mut ship = Vec::new();
    let mut chi_rate = Vec::new();
    let mut chi_ok = true;
    for &x in &chis {
        let c = with(|c| c.chi = vec![x; c.num_buoys()]);
        let s = if x == cfg.chi[0] { None } else { Some(solve(&c)) };
        let s = s.as_ref().unwrap_or(&base);
        chi_ok &= trajectory_ok(&c, s);
        ship.push(min_ship_distance(&c, &s.state));
        chi_rate.push(s.report.avg_rate_per_slot());
    }
    let feasible_all = trajectory_ok(&cfg, &base) && trajectory_ok(&rows_cfg, &rows) && chi_ok;
    let approach = monotone_decreasing(&ship) && monotone_decreasing(&chi_rate);
    push(
        8,
        "trajectory properties",
        feasible_all && approach && standoff_ok,
        format!(
            "feasible/pinned/speed-limited: {feasible_all}; backhaul ratio {chis:?}: min ship distance {ship:.2?}, rate {chi_rate:.3?}, both decreasing: {approach}"
        ),
    );

    let red: Vec<String> = lines.iter().filter(|l| !l.passed).map(|l| format!("{} {}", l.id, l.name)).collect();
    println!("{} of {} criteria pass", lines.len() - red.len(), lines.len());
    assert!(red.is_empty(), "red criteria: {}", red.join(", "));
}
