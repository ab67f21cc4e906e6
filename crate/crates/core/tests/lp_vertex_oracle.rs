//! Time-allocation LP on one buoy and two slots against brute-force vertex
//! enumeration, with every coefficient rebuilt from the metric formulas.

use iscpb_core::metrics::RfModel;
use iscpb_core::planner::time_alloc::time_allocation_lp;
use iscpb_core::planner::{LinkModel, Plan};
use iscpb_core::verify::tiny_scenario;
use iscpb_core::{LinkGeometry, ScenarioConfig};
use nalgebra::{DMatrix, DVector};

const DIM: usize = 8;

fn scenario() -> ScenarioConfig {
    let mut cfg = tiny_scenario();
    cfg.num_slots = 2;
    cfg.duration_s = 2.0;
    cfg.uav_start = [8.0, 6.0, cfg.uav_height];
    cfg.uav_end = [10.0, -7.0, cfg.uav_height];
    cfg.gamma_c_th = 1.0;
    cfg
}

/// Inequalities `a·x <= b` and the objective over `x = [s0,p0,c0,b0,s1,p1,c1,b1]`.
fn oracle_program(cfg: &ScenarioConfig, powers: [f64; 2]) -> (Vec<([f64; DIM], f64)>, [f64; DIM]) {
    let rf = RfModel::from_config(cfg);
    let ends = [cfg.uav_start, cfg.uav_end];
    let mut rows = Vec::new();
    let mut obj = [0.0; DIM];
    let mut c5 = [0.0; DIM];
    for (n, uav) in ends.iter().enumerate() {
        let g = LinkGeometry::new(uav, &cfg.buoy_positions[0], &cfg.ship_position).unwrap();
        let k = 4 * n;
        let s_min = cfg.gamma_s_th / rf.sensing_mi_closed(0, &g, 1.0, 1.0);
        let p_unit = rf.harvested_power(0, g.d_u, 1.0, 1.0);
        let l_c = rf.uplink_rate(g.d_u, 1.0, 1.0, powers[n]);
        let l_b = rf.backhaul_rate(g.d_b, 1.0, 1.0);
        obj[k + 2] = l_c / 2.0;
        c5[k + 2] = -l_c / 2.0;
        for j in 0..4 {
            let mut lo = [0.0; DIM];
            lo[k + j] = -1.0;
            rows.push((lo, if j == 0 { -s_min } else { 0.0 }));
            let mut hi = [0.0; DIM];
            hi[k + j] = 1.0;
            rows.push((hi, 1.0));
        }
        // Energy: γ_c·p <= γ_p·P_unit.
        let mut e = [0.0; DIM];
        e[k + 2] = powers[n];
        e[k + 1] = -p_unit;
        rows.push((e, 0.0));
        // Backhaul: χ·γ_c·L_c <= γ_b·L_b.
        let mut b = [0.0; DIM];
        b[k + 2] = cfg.chi[0] * l_c;
        b[k + 3] = -l_b;
        rows.push((b, 0.0));
    }
    rows.push((c5, -cfg.gamma_c_th));
    (rows, obj)
}

fn combinations(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::with_capacity(k), f);
}

/// Best objective over all basic feasible points.
fn enumerate_vertices(rows: &[([f64; DIM], f64)], obj: &[f64; DIM]) -> Option<(f64, [f64; DIM])> {
    let mut best: Option<(f64, [f64; DIM])> = None;
    combinations(rows.len(), DIM - 2, &mut |act| {
        let mut a = DMatrix::<f64>::zeros(DIM, DIM);
        let mut b = DVector::<f64>::zeros(DIM);
        for slot in 0..2 {
            for j in 0..4 {
                a[(slot, 4 * slot + j)] = 1.0;
            }
            b[slot] = 1.0;
        }
        for (r, &i) in act.iter().enumerate() {
            for j in 0..DIM {
                a[(r + 2, j)] = rows[i].0[j];
            }
            b[r + 2] = rows[i].1;
        }
        let Some(x) = a.lu().solve(&b) else { return };
        let feasible = rows.iter().all(|(row, rhs)| {
            let lhs: f64 = row.iter().zip(x.iter()).map(|(u, v)| u * v).sum();
            lhs <= rhs + 1e-9 * (1.0 + rhs.abs())
        });
        if feasible {
            let v: f64 = obj.iter().zip(x.iter()).map(|(u, v)| u * v).sum();
            if best.map_or(true, |(bv, _)| v > bv) {
                let mut xs = [0.0; DIM];
                xs.copy_from_slice(x.as_slice());
                best = Some((v, xs));
            }
        }
    });
    best
}

#[test]
fn lp_matches_vertex_enumeration() {
    let cfg = scenario();
    let model = LinkModel::new(&cfg);
    let mut compared = 0;
    for powers in [[5e-4, 2e-3], [1e-4, 1e-4], [3e-3, 8e-4]] {
        let plan = Plan {
            pos: vec![[cfg.uav_start[0], cfg.uav_start[1]], [cfg.uav_end[0], cfg.uav_end[1]]],
            serve: vec![Some(0), Some(0)],
            gamma: vec![[0.25; 4]; 2],
            power: powers.to_vec(),
        };
        let (rows, obj) = oracle_program(&cfg, powers);
        let oracle = enumerate_vertices(&rows, &obj);
        let lp = time_allocation_lp(&model, &cfg, &plan, true).unwrap();
        match (oracle, lp) {
            (Some((best, _)), Some(gamma)) => {
                let got: f64 = (0..2).map(|n| gamma[n][2] * obj[4 * n + 2]).sum();
                assert!((got - best).abs() <= 1e-9 * best.abs().max(1.0), "powers {powers:?}: LP {got} vs vertices {best}");
                compared += 1;
            }
            (None, None) => {}
            (o, l) => panic!("powers {powers:?}: oracle {o:?} vs LP {l:?}"),
        }
    }
    assert!(compared >= 2, "only {compared} feasible instances");
}

#[test]
fn unreachable_rate_requirement_is_reported() {
    let mut cfg = scenario();
    cfg.gamma_c_th = 1e3;
    let model = LinkModel::new(&cfg);
    let plan = Plan {
        pos: vec![[cfg.uav_start[0], cfg.uav_start[1]], [cfg.uav_end[0], cfg.uav_end[1]]],
        serve: vec![Some(0), Some(0)],
        gamma: vec![[0.25; 4]; 2],
        power: vec![1e-3, 1e-3],
    };
    let (rows, obj) = oracle_program(&cfg, [1e-3, 1e-3]);
    assert!(enumerate_vertices(&rows, &obj).is_none());
    assert_eq!(time_allocation_lp(&model, &cfg, &plan, true).unwrap(), None);
}
