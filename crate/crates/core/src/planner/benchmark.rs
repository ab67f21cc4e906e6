//! Reference flight strategies and the hover-path builder they share with
//! the planner's warm start.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::association::{alpha_step, corridor_order, init_association_time, straight_line};
use super::model::LinkModel;
use super::plan::{evaluate, Plan};
use super::solve::{allocate_shares, least_slack_plan, optimize_with, set_max_power, PlannerError, PlannerOptions};
use crate::metrics::{evaluate_report, MetricReport};
use crate::scenario::{DecisionState, ScenarioConfig};

/// Reference strategies compared against the full planner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// Fly over the buoys, dwelling directly above each.
    FoB,
    /// Fly-hover-fly through the per-buoy hover points.
    Fhf,
    /// Triangle through a fixed apex.
    Tf,
    /// Straight flight.
    Sf,
    /// Full planner with the stage shares frozen at the equal split.
    Feta,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [Strategy::FoB, Strategy::Fhf, Strategy::Tf, Strategy::Sf, Strategy::Feta];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::FoB => "FoB",
            Strategy::Fhf => "FHF",
            Strategy::Tf => "TF",
            Strategy::Sf => "SF",
            Strategy::Feta => "FETA",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown strategy `{s}` (expected FoB, FHF, TF, SF or FETA)"))
    }
}

/// Apex of the triangle path.
pub const TRIANGLE_APEX: [f64; 2] = [500.0, 250.0];

/// Runs one reference strategy. Fixed paths keep whatever violations they
/// cannot avoid; those show up in the report.
pub fn benchmark(cfg: &ScenarioConfig, strategy: Strategy) -> Result<(DecisionState, MetricReport), PlannerError> {
    cfg.validate()?;
    let plan = match strategy {
        Strategy::Feta => {
            let opts = PlannerOptions { frozen_gamma: Some([0.25; 4]), ..PlannerOptions::default() };
            match optimize_with(cfg, &opts) {
                Ok((s, r, _)) => return Ok((s, r)),
                Err(PlannerError::Infeasible(_)) => least_slack_plan(&LinkModel::new(cfg), cfg, &opts)?,
                Err(e) => return Err(e),
            }
        }
        _ => {
            let mut model = LinkModel::new(cfg);
            model.best_effort_sensing = true;
            let (pos, serve) = match strategy {
                Strategy::FoB => {
                    let pts: Vec<_> = corridor_order(cfg)
                        .into_iter()
                        .map(|u| {
                            let b = cfg.buoy_position(u, 0);
                            ([b[0], b[1]], u)
                        })
                        .collect();
                    hover_path(cfg, &pts).ok_or_else(|| too_long(strategy))?
                }
                Strategy::Fhf => hover_path(cfg, &hover_points(&model, cfg)).ok_or_else(|| too_long(strategy))?,
                Strategy::Tf => {
                    let pos = polyline(cfg, &[TRIANGLE_APEX]);
                    (pos, init_association_time(&model, cfg)?.serve)
                }
                _ => (straight_line(cfg), init_association_time(&model, cfg)?.serve),
            };
            fixed_path_plan(&model, cfg, pos, serve)?
        }
    };
    let state = plan.to_state(cfg);
    let report = evaluate_report(cfg, &state).map_err(|e| PlannerError::Metrics(e.to_string()))?;
    Ok((state, report))
}

fn too_long(strategy: Strategy) -> PlannerError {
    PlannerError::Metrics(format!("{strategy} path does not fit the speed limit"))
}

/// Association, shares and power on a fixed path: association updates
/// alternate with share/power allocation until the rate settles.
fn fixed_path_plan(
    model: &LinkModel,
    cfg: &ScenarioConfig,
    pos: Vec<[f64; 2]>,
    serve: Vec<Option<usize>>,
) -> Result<Plan, PlannerError> {
    let ns = cfg.num_slots;
    let opts = PlannerOptions::default();
    let mut plan = Plan { pos, serve, gamma: vec![[0.25; 4]; ns], power: vec![0.0; ns] };
    set_max_power(model, cfg, &mut plan);
    shares(model, cfg, &mut plan)?;
    let mut eta = opts.eta0;
    let mut last = evaluate(model, cfg, &plan).objective;
    for _ in 0..opts.max_outer * opts.max_inner {
        let a = alpha_step(model, cfg, &mut plan, eta, None);
        shares(model, cfg, &mut plan)?;
        let now = evaluate(model, cfg, &plan).objective;
        let settled = a.switched == 0 && (now - last) / last.abs().max(1e-12) < opts.outer_tol;
        last = now;
        if settled {
            if a.penalty_residual < opts.penalty_tol {
                break;
            }
            eta *= opts.eta_decay;
        }
    }
    Ok(plan)
}

/// Share allocation honoring the rate requirement when it can be met.
fn shares(model: &LinkModel, cfg: &ScenarioConfig, plan: &mut Plan) -> Result<(), PlannerError> {
    allocate_shares(model, cfg, plan, true)?;
    if evaluate(model, cfg, plan).violation[2] > 1e-6 {
        allocate_shares(model, cfg, plan, false)?;
        set_max_power(model, cfg, plan);
        allocate_shares(model, cfg, plan, false)?;
    }
    Ok(())
}

/// Constant-speed flight from start to end through `via`.
pub fn polyline(cfg: &ScenarioConfig, via: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut way = vec![[cfg.uav_start[0], cfg.uav_start[1]]];
    way.extend_from_slice(via);
    way.push([cfg.uav_end[0], cfg.uav_end[1]]);
    let cum: Vec<f64> = std::iter::once(0.0)
        .chain(way.windows(2).scan(0.0, |acc, w| {
            *acc += dist(w[0], w[1]);
            Some(*acc)
        }))
        .collect();
    let total = *cum.last().unwrap();
    let ns = cfg.num_slots;
    (0..ns)
        .map(|n| {
            let s = if ns > 1 { total * n as f64 / (ns - 1) as f64 } else { 0.0 };
            let k = (1..way.len()).find(|&k| cum[k] >= s).unwrap_or(way.len() - 1);
            let seg = cum[k] - cum[k - 1];
            let t = if seg > 0.0 { (s - cum[k - 1]) / seg } else { 0.0 };
            let (a, b) = (way[k - 1], way[k]);
            [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
        })
        .collect()
}

/// Best single-slot rate when hovering at `c` and serving `u`.
fn hover_rate(model: &LinkModel, cfg: &ScenarioConfig, u: usize, c: [f64; 2]) -> f64 {
    let b = cfg.buoy_position(u, 0);
    let s = model.min_sensing_share(u, c, &b);
    model.slot_rate_optimum(u, c, &b, s).0
}

/// Per-buoy hover point maximizing the single-slot rate, in corridor order:
/// a polar grid around the buoy followed by a shrinking compass search.
pub fn hover_points(model: &LinkModel, cfg: &ScenarioConfig) -> Vec<([f64; 2], usize)> {
    corridor_order(cfg)
        .into_iter()
        .map(|u| {
            let b = cfg.buoy_position(u, 0);
            let f = |c: [f64; 2]| hover_rate(model, cfg, u, c);
            let mut best = ([b[0], b[1]], f([b[0], b[1]]));
            for r in 1..=60 {
                for k in 0..24 {
                    let th = k as f64 * std::f64::consts::TAU / 24.0;
                    let c = [b[0] + r as f64 * th.cos(), b[1] + r as f64 * th.sin()];
                    let v = f(c);
                    if v > best.1 {
                        best = (c, v);
                    }
                }
            }
            let mut h = 1.0;
            while h > 1e-3 {
                let (c, v) = best;
                let moved = [[h, 0.0], [-h, 0.0], [0.0, h], [0.0, -h]]
                    .iter()
                    .map(|d| [c[0] + d[0], c[1] + d[1]])
                    .map(|c| (c, f(c)))
                    .find(|&(_, w)| w > v);
                match moved {
                    Some(m) => best = m,
                    None => h *= 0.5,
                }
            }
            (best.0, u)
        })
        .collect()
}

/// Fly-hover-fly discretization: visit `points` in order at full speed,
/// spreading the spare slots evenly as hovering time at each point. Leg
/// slots are served by the nearer leg endpoint among the hover points; the
/// approach and departure legs go to the first and last point. Returns
/// `None` when the legs alone need more slots than the mission has.
pub fn hover_path(cfg: &ScenarioConfig, points: &[([f64; 2], usize)]) -> Option<(Vec<[f64; 2]>, Vec<Option<usize>>)> {
    let ns = cfg.num_slots;
    if points.is_empty() || ns < 2 {
        return None;
    }
    let step = cfg.max_step();
    let start = [cfg.uav_start[0], cfg.uav_start[1]];
    let end = [cfg.uav_end[0], cfg.uav_end[1]];
    let mut way = vec![start];
    way.extend(points.iter().map(|p| p.0));
    way.push(end);
    // Slots needed per leg, padded slightly so rounding never exceeds the
    // speed limit.
    let legs: Vec<usize> = way.windows(2).map(|w| (dist(w[0], w[1]) / step * (1.0 + 1e-9)).ceil() as usize).collect();
    let travel: usize = legs.iter().sum();
    let spare = (ns - 1).checked_sub(travel)?;
    let np = points.len();
    let hover: Vec<usize> = (0..np).map(|k| spare / np + usize::from(k < spare % np)).collect();

    let mut pos = Vec::with_capacity(ns);
    let mut serve = Vec::with_capacity(ns);
    pos.push(start);
    serve.push(Some(points[0].1));
    for (i, &m) in legs.iter().enumerate() {
        let (a, b) = (way[i], way[i + 1]);
        for k in 1..=m {
            let t = k as f64 / m as f64;
            pos.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            // Way point i is hover point i-1.
            let owner = match (i, i + 1 == legs.len()) {
                (0, _) => 0,
                (_, true) => np - 1,
                _ if t < 0.5 => i - 1,
                _ => i,
            };
            serve.push(Some(points[owner].1));
        }
        if i < np {
            for _ in 0..hover[i] {
                pos.push(b);
                serve.push(Some(points[i].1));
            }
        }
    }
    debug_assert_eq!(pos.len(), ns);
    Some((pos, serve))
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}
