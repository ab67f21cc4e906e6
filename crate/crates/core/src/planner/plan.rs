//! Compact per-slot plan (one served buoy per slot) and its evaluation
//! against the original constraints.

use super::model::LinkModel;
use crate::scenario::{DecisionState, ScenarioConfig, STAGE_B, STAGE_C, STAGE_P, STAGE_S};

/// Per-slot decisions: horizontal UAV position, served buoy, stage shares
/// and uplink power in watts. The altitude is fixed by the scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub pos: Vec<[f64; 2]>,
    pub serve: Vec<Option<usize>>,
    pub gamma: Vec<[f64; 4]>,
    pub power: Vec<f64>,
}

impl Plan {
    pub fn num_slots(&self) -> usize {
        self.pos.len()
    }

    pub fn to_state(&self, cfg: &ScenarioConfig) -> DecisionState {
        let mut s = DecisionState::zeros(cfg);
        for n in 0..self.num_slots() {
            s.uav_positions[n] = [self.pos[n][0], self.pos[n][1], cfg.uav_height];
            if let Some(u) = self.serve[n] {
                s.assoc[u][n] = 1.0;
                s.time_fracs[u][n] = self.gamma[n];
                s.uplink_power[u][n] = self.power[n];
            }
        }
        s
    }

    /// Reads back a state, taking the serving buoy of each slot.
    pub fn from_state(state: &DecisionState) -> Self {
        let n_slots = state.num_slots();
        let mut plan = Plan {
            pos: state.uav_positions.iter().map(|p| [p[0], p[1]]).collect(),
            serve: vec![None; n_slots],
            gamma: vec![[0.0; 4]; n_slots],
            power: vec![0.0; n_slots],
        };
        for n in 0..n_slots {
            if let Some(u) = state.serving(n) {
                plan.serve[n] = Some(u);
                plan.gamma[n] = state.time_fracs[u][n];
                plan.power[n] = state.uplink_power[u][n];
            }
        }
        plan
    }

    /// Slots served by each buoy.
    pub fn slots_of(&self, num_buoys: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); num_buoys];
        for (n, s) in self.serve.iter().enumerate() {
            if let Some(u) = s {
                out[*u].push(n);
            }
        }
        out
    }
}

/// Per-slot quantities and the worst violation of each constraint family.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanEval {
    pub rate: Vec<f64>,
    /// `(1/N)·Σ_n R_c` per buoy.
    pub buoy_avg: Vec<f64>,
    /// Worst violation `[c3, c4, c5, c6]`, each relative to its scale; zero
    /// when satisfied.
    pub violation: [f64; 4],
    /// Average uplink rate per slot.
    pub objective: f64,
}

impl PlanEval {
    pub fn feasible(&self, tol: f64) -> bool {
        self.violation.iter().all(|&v| v <= tol)
    }

    pub fn worst(&self) -> f64 {
        self.violation.iter().fold(0.0, |a, &b| a.max(b))
    }
}

pub fn evaluate(model: &LinkModel, cfg: &ScenarioConfig, plan: &Plan) -> PlanEval {
    let ns = plan.num_slots();
    let nu = cfg.num_buoys();
    let mut rate = vec![0.0; ns];
    let mut sums = vec![0.0; nu];
    let mut v = [0.0f64; 4];
    for n in 0..ns {
        let Some(u) = plan.serve[n] else { continue };
        let b = cfg.buoy_position(u, n);
        let g = plan.gamma[n];
        let c = plan.pos[n];
        let p = plan.power[n];
        if model.gamma_s_th > 0.0 {
            let r_s = g[STAGE_S] * model.sensing_se(u, c, &b);
            v[0] = v[0].max(model.gamma_s_th - r_s);
        }
        let d2 = model.dist2(c, &b);
        let harvested = g[STAGE_P] * model.harvest[u] / d2;
        let used = g[STAGE_C] * p;
        v[1] = v[1].max((used - harvested) / harvested.max(1e-6));
        let r_c = g[STAGE_C] * model.uplink_se(c, &b, p);
        let r_b = g[STAGE_B] * model.backhaul_se(c);
        v[3] = v[3].max((model.chi[u] * r_c - r_b) / r_c.max(1.0));
        rate[n] = r_c;
        sums[u] += r_c;
    }
    let buoy_avg: Vec<f64> = sums.iter().map(|s| s / ns as f64).collect();
    for &a in &buoy_avg {
        v[2] = v[2].max(model.gamma_c_th - a);
    }
    let objective = rate.iter().sum::<f64>() / ns as f64;
    PlanEval { rate, buoy_avg, violation: v, objective }
}
