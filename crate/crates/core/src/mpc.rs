//! Rolling-horizon closed loop around the simulator.

use crate::audit::audit;
use crate::baseline::solve_priority;
use crate::model::{
    Anchor, FrozenPassage, HorizonFlight, HorizonProblem, ModelError, StructuredProblem,
};
use crate::scenario::{FlightId, Scenario};
use crate::schedule::{mean, FlightSchedule, Schedule};
use crate::sim::{DisturbanceConfig, SimError, Simulator};
use crate::solver::{solve, SolveLimits, SolveStatus};
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Planner {
    #[default]
    Milp,
    Priority,
}

impl Planner {
    pub fn as_str(self) -> &'static str {
        match self {
            Planner::Milp => "milp",
            Planner::Priority => "dijkstra",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplanTrigger {
    /// At control-horizon boundaries.
    #[default]
    Periodic,
    /// When a flight comes into the look-ahead window.
    OnEntry,
    Both,
}

impl ReplanTrigger {
    pub fn as_str(self) -> &'static str {
        match self {
            ReplanTrigger::Periodic => "periodic",
            ReplanTrigger::OnEntry => "on_entry",
            ReplanTrigger::Both => "both",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpcConfig {
    pub look_ahead: f64,
    pub control_horizon: f64,
    /// Per-cycle solver budget in seconds.
    pub solve_time_limit: f64,
    /// Optional per-cycle branch-and-bound node budget.
    #[serde(default)]
    pub node_limit: Option<u64>,
    pub replan_trigger: ReplanTrigger,
    pub planner: Planner,
}

impl Default for MpcConfig {
    fn default() -> Self {
        MpcConfig {
            look_ahead: 600.0,
            control_horizon: 300.0,
            solve_time_limit: 60.0,
            node_limit: None,
            replan_trigger: ReplanTrigger::Periodic,
            planner: Planner::Milp,
        }
    }
}

impl MpcConfig {
    pub fn limits(&self) -> SolveLimits {
        SolveLimits {
            nodes: self.node_limit,
            ..SolveLimits::seconds(self.solve_time_limit)
        }
    }

    pub fn validate(&self) -> Result<(), MpcError> {
        let ok = self.control_horizon > 0.0
            && self.control_horizon.is_finite()
            && self.look_ahead >= self.control_horizon
            && self.look_ahead.is_finite()
            && self.solve_time_limit > 0.0;
        if ok {
            Ok(())
        } else {
            Err(MpcError::BadConfig(format!(
                "look_ahead {} control_horizon {} time limit {}",
                self.look_ahead, self.control_horizon, self.solve_time_limit
            )))
        }
    }
}

#[derive(Debug, Error)]
pub enum MpcError {
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CycleStatus {
    Optimal,
    /// Time limit hit; the best schedule found is used.
    Timeout,
    /// Priority planner found a schedule.
    Heuristic,
    Infeasible,
}

impl CycleStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CycleStatus::Optimal => "optimal",
            CycleStatus::Timeout => "timeout",
            CycleStatus::Heuristic => "heuristic",
            CycleStatus::Infeasible => "infeasible",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub clock: f64,
    pub flights: usize,
    pub status: CycleStatus,
    /// Planned mean landing time of the flights in view.
    pub planned_objective: Option<f64>,
    pub solve_time: f64,
    pub nodes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Realized mean landing time; absent when the run failed.
    pub objective: Option<f64>,
    pub infeasible: bool,
    pub landed: usize,
    pub cycles: Vec<CycleReport>,
    pub solve_time: f64,
    pub wall_time: f64,
}

/// A planned cycle: what was solved and what came out.
#[derive(Clone, Debug)]
pub struct CyclePlan {
    pub problem: HorizonProblem,
    pub schedule: Schedule,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub plans: Vec<CyclePlan>,
    pub simulator: Simulator,
}

struct Planned {
    schedule: Option<Schedule>,
    status: CycleStatus,
    nodes: u64,
}

fn plan(
    hp: &HorizonProblem,
    planner: Planner,
    limits: &SolveLimits,
    warm: Option<&Schedule>,
) -> Result<Planned, ModelError> {
    let sp = StructuredProblem::new(hp)?;
    Ok(match planner {
        Planner::Milp => {
            let greedy = solve_priority(&sp);
            let mut seeds: Vec<&Schedule> = warm.into_iter().collect();
            if greedy.is_feasible() {
                seeds.push(&greedy.schedule);
            }
            let start = seeds
                .into_iter()
                .filter(|w| w.flights.len() == hp.flights.len() && audit(hp, w).is_empty())
                .min_by(|a, b| a.objective.total_cmp(&b.objective));
            let (s, rep) = solve(&sp, limits, start);
            let status = match (rep.status, &s) {
                (SolveStatus::Optimal, Some(_)) => CycleStatus::Optimal,
                (SolveStatus::Timeout, Some(_)) => CycleStatus::Timeout,
                _ => CycleStatus::Infeasible,
            };
            Planned {
                schedule: s,
                status,
                nodes: rep.nodes,
            }
        }
        Planner::Priority => {
            let r = solve_priority(&sp);
            if r.is_feasible() {
                Planned {
                    schedule: Some(r.schedule),
                    status: CycleStatus::Heuristic,
                    nodes: 0,
                }
            } else {
                Planned {
                    schedule: None,
                    status: CycleStatus::Infeasible,
                    nodes: 0,
                }
            }
        }
    })
}

/// Previous plan cut down to the current anchors; `None` unless it covers every flight.
fn warm_start(prev: &Schedule, hp: &HorizonProblem) -> Option<Schedule> {
    let mut out = Vec::with_capacity(hp.flights.len());
    for f in &hp.flights {
        let fs = prev.flight(f.id)?;
        let p = fs.route.iter().position(|&w| w == f.anchor.waypoint)?;
        out.push(FlightSchedule {
            flight: f.id,
            route: fs.route[p..].to_vec(),
            arrival: fs.arrival[p..].to_vec(),
            departure: fs.departure[p..].to_vec(),
            holding: fs.holding[p..].to_vec(),
            speed_levels: fs.speed_levels[p..].to_vec(),
            landing_time: fs.landing_time,
        });
    }
    Some(Schedule::from_flights(out))
}

/// Snapshot of the flights in view, anchored at their observed positions.
pub fn horizon_problem(scn: &Scenario, sim: &Simulator, look_ahead: f64) -> HorizonProblem {
    let clock = sim.clock();
    let net = &scn.network;
    let gap_max = scn.separation.max_gap();
    let cap = |w| {
        net.ix(w)
            .map_or(0.0, |ix| crate::model::hold_cap(net, scn.max_holding, ix))
    };
    let mut flights = Vec::new();
    for o in sim.observe() {
        if o.landed {
            continue;
        }
        let planned = scn
            .flight(o.flight)
            .map_or(clock, |f| f.planned_entry_time());
        let actual = clock + o.remaining_arrival;
        let wake = sim.flight(o.flight).expect("observed").wake;
        let anchor = if !o.entered {
            if planned.min(actual) > clock + look_ahead {
                continue;
            }
            let t = planned.max(clock);
            Anchor {
                waypoint: o.next_waypoint,
                arrival: t,
                ready: t,
                latest_departure: t + cap(o.next_waypoint),
                exempt: true,
                via: None,
            }
        } else if o.arrived {
            let arrival = o.arrival_clock.unwrap_or(clock);
            let ready = clock + o.remaining_holding.max(0.0);
            Anchor {
                waypoint: o.next_waypoint,
                arrival,
                ready,
                latest_departure: (arrival + cap(o.next_waypoint)).max(ready),
                exempt: false,
                via: None,
            }
        } else {
            let arrival = clock + o.remaining_arrival.max(0.0);
            Anchor {
                waypoint: o.next_waypoint,
                arrival,
                ready: arrival,
                latest_departure: arrival + cap(o.next_waypoint),
                exempt: false,
                via: o.previous,
            }
        };
        flights.push(HorizonFlight {
            id: o.flight,
            wake,
            anchor,
        });
    }
    flights.sort_by_key(|f| f.id);
    let frozen = sim
        .passages()
        .iter()
        .filter(|p| p.departure <= clock && p.departure + gap_max > clock)
        .map(|p| FrozenPassage {
            flight: p.flight,
            wake: p.wake,
            waypoint: p.waypoint,
            arrival: p.arrival,
            departure: p.departure,
        })
        .collect();
    HorizonProblem {
        network: scn.network.clone(),
        separation: scn.separation.clone(),
        max_holding: scn.max_holding,
        clock,
        flights,
        frozen,
    }
}

/// Clock by which every flight should have landed under any sane plan.
fn deadline(scn: &Scenario) -> f64 {
    let hp = HorizonProblem::from_scenario(scn);
    let last = scn
        .flights
        .iter()
        .map(|f| f.entry_time.max(f.planned_entry_time()))
        .fold(0.0, f64::max);
    hp.t_max() + last + 3600.0
}

fn visible_ids(hp: &HorizonProblem) -> Vec<FlightId> {
    hp.flights.iter().map(|f| f.id).collect()
}

/// Plan, command and simulate in a loop until every flight has landed or a plan fails.
pub fn run_closed_loop(
    scn: &Scenario,
    cfg: &MpcConfig,
    disturbance: Option<DisturbanceConfig>,
) -> Result<RunOutput, MpcError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut sim = Simulator::new(scn, disturbance)?;
    let end = deadline(scn);
    let mut cycles = Vec::new();
    let mut plans = Vec::new();
    let mut prev: Option<Schedule> = None;
    let mut solve_time = 0.0;
    let mut infeasible = false;
    while !sim.all_landed() {
        if sim.clock() > end {
            infeasible = true;
            break;
        }
        let hp = horizon_problem(scn, &sim, cfg.look_ahead);
        let next = sim.clock() + cfg.control_horizon;
        if hp.flights.is_empty() {
            sim.run_until(next)?;
            continue;
        }
        let warm = prev.as_ref().and_then(|p| warm_start(p, &hp));
        let t0 = Instant::now();
        let mut out = plan(&hp, cfg.planner, &cfg.limits(), warm.as_ref())?;
        let mut hp = hp;
        if out.schedule.is_none() {
            let wider = horizon_problem(scn, &sim, cfg.look_ahead * 1.5);
            if wider.flights.len() > hp.flights.len() {
                out = plan(&wider, cfg.planner, &cfg.limits(), None)?;
                hp = wider;
            }
        }
        let dt = t0.elapsed().as_secs_f64();
        solve_time += dt;
        cycles.push(CycleReport {
            clock: hp.clock,
            flights: hp.flights.len(),
            status: out.status,
            planned_objective: out.schedule.as_ref().map(|s| s.objective),
            solve_time: dt,
            nodes: out.nodes,
        });
        let Some(sched) = out.schedule else {
            infeasible = true;
            break;
        };
        sim.load_commands(&sched)?;
        let seen = visible_ids(&hp);
        plans.push(CyclePlan {
            problem: hp,
            schedule: sched.clone(),
        });
        prev = Some(sched);
        let (periodic, on_entry) = match cfg.replan_trigger {
            ReplanTrigger::Periodic => (true, false),
            ReplanTrigger::OnEntry => (false, true),
            ReplanTrigger::Both => (true, true),
        };
        if periodic && !on_entry {
            sim.run_until(next)?;
            continue;
        }
        while !sim.all_landed() && (!periodic || sim.clock() < next - 1e-9) && sim.clock() <= end {
            sim.step()?;
            let now = horizon_problem(scn, &sim, cfg.look_ahead);
            if now.flights.iter().any(|f| !seen.contains(&f.id)) {
                break;
            }
        }
    }
    let landings: Vec<f64> = sim
        .flights()
        .iter()
        .filter_map(|f| f.landing_clock)
        .collect();
    let objective = (!infeasible && landings.len() == sim.flights().len())
        .then(|| mean(landings.iter().copied()));
    Ok(RunOutput {
        metrics: RunMetrics {
            objective,
            infeasible,
            landed: landings.len(),
            cycles,
            solve_time,
            wall_time: start.elapsed().as_secs_f64(),
        },
        plans,
        simulator: sim,
    })
}

/// Plan the whole scenario once and execute it without replanning.
pub fn one_shot(
    scn: &Scenario,
    planner: Planner,
    limits: &SolveLimits,
    disturbance: Option<DisturbanceConfig>,
) -> Result<RunOutput, MpcError> {
    let start = Instant::now();
    let mut sim = Simulator::new(scn, disturbance)?;
    let hp = HorizonProblem::from_scenario(scn);
    let t0 = Instant::now();
    let out = plan(&hp, planner, limits, None)?;
    let dt = t0.elapsed().as_secs_f64();
    let report = CycleReport {
        clock: 0.0,
        flights: hp.flights.len(),
        status: out.status,
        planned_objective: out.schedule.as_ref().map(|s| s.objective),
        solve_time: dt,
        nodes: out.nodes,
    };
    let mut plans = Vec::new();
    let infeasible = out.schedule.is_none();
    if let Some(sched) = out.schedule {
        sim.load_commands(&sched)?;
        sim.run_to_completion(deadline(scn))?;
        plans.push(CyclePlan {
            problem: hp,
            schedule: sched,
        });
    }
    let landings: Vec<f64> = sim
        .flights()
        .iter()
        .filter_map(|f| f.landing_clock)
        .collect();
    let done = !infeasible && landings.len() == sim.flights().len();
    Ok(RunOutput {
        metrics: RunMetrics {
            objective: done.then(|| mean(landings.iter().copied())),
            infeasible: !done,
            landed: landings.len(),
            cycles: vec![report],
            solve_time: dt,
            wall_time: start.elapsed().as_secs_f64(),
        },
        plans,
        simulator: sim,
    })
}

/// Every cycle plan checked against its own horizon problem.
pub fn audit_plans(plans: &[CyclePlan]) -> Vec<(f64, crate::audit::Violation)> {
    plans
        .iter()
        .flat_map(|p| {
            audit(&p.problem, &p.schedule)
                .into_iter()
                .map(move |v| (p.problem.clock, v))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{sample_network, WaypointId};
    use crate::scenario::{Flight, SeparationPolicy, WakeCategory};
    use std::sync::Arc;

    fn scenario(times: &[(u32, u32, f64)]) -> Scenario {
        let net = Arc::new(sample_network());
        let flights = times
            .iter()
            .map(|&(id, e, t)| Flight {
                id: FlightId(id),
                entry_waypoint: WaypointId(e),
                entry_time: t,
                predicted_entry_time: None,
                wake: WakeCategory::Medium,
            })
            .collect();
        Scenario::new(net, flights, SeparationPolicy::uniform(60.0), 300.0).unwrap()
    }

    #[test]
    fn config_rejects_control_longer_than_look_ahead() {
        let cfg = MpcConfig {
            look_ahead: 100.0,
            control_horizon: 200.0,
            ..MpcConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn full_look_ahead_matches_one_shot() {
        let scn = scenario(&[(1, 1, 0.0), (2, 2, 20.0), (3, 1, 90.0), (4, 3, 400.0)]);
        let once = one_shot(&scn, Planner::Milp, &SolveLimits::seconds(30.0), None).unwrap();
        let cfg = MpcConfig {
            look_ahead: 1e5,
            control_horizon: 120.0,
            ..MpcConfig::default()
        };
        let roll = run_closed_loop(&scn, &cfg, None).unwrap();
        let (a, b) = (
            once.metrics.objective.unwrap(),
            roll.metrics.objective.unwrap(),
        );
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        assert!(roll.metrics.cycles.len() > 1);
        assert!(audit_plans(&roll.plans).is_empty());
    }

    #[test]
    fn nominal_landings_follow_the_plan() {
        let scn = scenario(&[(1, 1, 0.0), (2, 1, 70.0), (3, 2, 100.0)]);
        let cfg = MpcConfig::default();
        let roll = run_closed_loop(&scn, &cfg, None).unwrap();
        let last = roll.plans.last().unwrap();
        for f in roll.simulator.flights() {
            let planned = roll
                .plans
                .iter()
                .rev()
                .find_map(|p| p.schedule.flight(f.flight))
                .unwrap()
                .landing_time;
            assert!((f.landing_clock.unwrap() - planned).abs() < 1.0);
        }
        assert!(!last.schedule.flights.is_empty());
    }

    #[test]
    fn priority_planner_runs_closed_loop() {
        let scn = scenario(&[(1, 1, 0.0), (2, 2, 10.0), (3, 3, 30.0)]);
        let cfg = MpcConfig {
            planner: Planner::Priority,
            ..MpcConfig::default()
        };
        let roll = run_closed_loop(&scn, &cfg, Some(DisturbanceConfig::uniform(0.05, 1))).unwrap();
        assert_eq!(roll.metrics.landed, 3);
        assert!(roll
            .metrics
            .cycles
            .iter()
            .all(|c| c.status != CycleStatus::Optimal));
    }
}
