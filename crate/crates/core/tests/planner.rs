use iscpb_core::planner::{optimize, PlannerError};
use iscpb_core::scenario::STAGE_C;
use iscpb_core::verify::{tiny_grid_oracle, tiny_planner_check, tiny_scenario};
use iscpb_core::default_scenario;

#[test]
fn default_plan_is_feasible_pinned_and_repeatable() {
    let cfg = default_scenario();
    let (state, report, trace) = optimize(&cfg).unwrap();
    assert!(state.violations(&cfg, 1e-6).is_empty(), "{:?}", state.violations(&cfg, 1e-6));
    assert!(report.feasible(1e-6), "worst slacks {:?}", report.worst_slacks());
    assert_eq!(state.uav_positions[0], cfg.uav_start);
    assert_eq!(*state.uav_positions.last().unwrap(), cfg.uav_end);
    for w in state.uav_positions.windows(2) {
        let step = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
        assert!(step <= cfg.max_step() * (1.0 + 1e-6));
    }
    for a in state.assoc.iter().flatten() {
        assert!(a.min(1.0 - a).abs() <= 1e-3, "non-binary association {a}");
    }
    let objectives = trace.outer_objectives();
    assert!(!objectives.is_empty());
    for w in objectives.windows(2) {
        assert!(w[1] >= w[0] * (1.0 - 1e-9), "outer objective dropped: {objectives:?}");
    }
    assert!(report.avg_rate_per_slot() > 20.0);

    let (again, _, _) = optimize(&cfg).unwrap();
    assert_eq!(state, again);
}

#[test]
fn single_slot_matches_exhaustive_search() {
    let check = tiny_planner_check();
    assert!(check.passed, "{check:?}");
    let cfg = tiny_scenario();
    let (state, _, _) = optimize(&cfg).unwrap();
    assert!(state.time_fracs[0][0][STAGE_C] > 0.0);
    assert!(tiny_grid_oracle(&cfg) > 0.0);
}

#[test]
fn single_buoy_two_slots_solves() {
    let mut cfg = tiny_scenario();
    cfg.num_slots = 2;
    cfg.duration_s = 2.0;
    cfg.uav_end = [10.0, -7.0, cfg.uav_height];
    let (state, report, _) = optimize(&cfg).unwrap();
    assert!(report.feasible(1e-6));
    assert_eq!(state.serving(0), Some(0));
    assert_eq!(state.serving(1), Some(0));
}

#[test]
fn unreachable_rate_requirement_gives_certificate() {
    let mut cfg = default_scenario();
    cfg.gamma_c_th = 1e3;
    match optimize(&cfg) {
        Err(PlannerError::Infeasible(cert)) => {
            assert!(cert.slack.rate > 1.0, "{cert:?}");
            assert!(cert.slack.total() > 0.0);
        }
        other => panic!("expected an infeasibility certificate, got {:?}", other.map(|r| r.1.avg_rate_per_slot())),
    }
}

#[test]
fn vacuous_requirements_skip_the_slack_phase() {
    let mut cfg = default_scenario();
    cfg.gamma_s_th = 0.0;
    cfg.gamma_c_th = 0.0;
    let (_, report, trace) = optimize(&cfg).unwrap();
    assert_eq!(trace.feasibility_iterations, 0);
    assert!(report.feasible(1e-6));
}

#[test]
fn more_buoys_than_slots_is_rejected() {
    let mut cfg = default_scenario();
    cfg.num_slots = 9;
    cfg.duration_s = 9.0;
    assert!(matches!(optimize(&cfg), Err(PlannerError::TooManyBuoys(_))));
}
