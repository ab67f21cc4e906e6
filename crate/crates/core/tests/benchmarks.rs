use iscpb_core::metrics::active_averages;
use iscpb_core::planner::benchmark::{benchmark, Strategy};
use iscpb_core::default_scenario;

#[test]
fn fixed_paths_respect_kinematics() {
    let cfg = default_scenario();
    for k in [Strategy::FoB, Strategy::Fhf, Strategy::Tf, Strategy::Sf] {
        let (state, report) = benchmark(&cfg, k).unwrap();
        let structural = state.violations(&cfg, 1e-6);
        assert!(structural.is_empty(), "{k}: {structural:?}");
        assert_eq!(state.uav_positions[0], cfg.uav_start, "{k}");
        assert_eq!(*state.uav_positions.last().unwrap(), cfg.uav_end, "{k}");
        // Every buoy is served somewhere along the path.
        for u in 0..cfg.num_buoys() {
            assert!(state.assoc[u].iter().any(|&a| a > 0.5), "{k}: buoy {u} never served");
        }
        assert!(report.avg_rate_per_slot() > 0.0, "{k}");
    }
}

#[test]
fn flying_over_the_buoys_gives_up_sensing_for_power() {
    let cfg = default_scenario();
    let (_, fob) = benchmark(&cfg, Strategy::FoB).unwrap();
    let (_, fhf) = benchmark(&cfg, Strategy::Fhf).unwrap();
    let (a, b) = (active_averages(&fob), active_averages(&fhf));
    assert!(a.sensing_mi < 1.0, "FoB MI {}", a.sensing_mi);
    assert!(a.harvested_mw > b.harvested_mw, "FoB {} mW vs FHF {} mW", a.harvested_mw, b.harvested_mw);
    assert!(fob.worst_slacks()[0] < 0.0);
}

#[test]
fn straight_and_triangle_paths_trail_hovering() {
    let cfg = default_scenario();
    let rate = |k| benchmark(&cfg, k).unwrap().1.avg_rate_per_slot();
    let fhf = rate(Strategy::Fhf);
    assert!(fhf > rate(Strategy::Tf));
    assert!(fhf > rate(Strategy::Sf));
}
