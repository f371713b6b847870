//! Conflict-free routing and scheduling of arrivals in a terminal maneuvering area.
//!
//! The crate covers the waypoint network, traffic scenarios, an exact
//! mixed-integer encoding with its own branch-and-bound solver, a greedy
//! priority baseline, a discrete-time closed-loop simulator and a
//! rolling-horizon controller, plus a Monte Carlo harness on top.

pub mod audit;
pub mod baseline;
pub mod harness;
pub mod model;
pub mod mpc;
pub mod network;
pub mod scenario;
pub mod schedule;
pub mod sim;
pub mod solver;
mod temporal;

pub use audit::{audit, Violation, ViolationKind};
pub use baseline::{solve_priority, solve_priority_horizon, PriorityPlanResult};
pub use harness::{
    aggregate, aggregates_csv, run_monte_carlo, runs_csv, Aggregate, MonteCarloSpec, RunRow,
    RunStatus,
};
pub use model::{
    encode, export_milp, Anchor, ExportFormat, FrozenPassage, HorizonFlight, HorizonProblem,
    MilpInstance, ModelError, StructuredProblem,
};
pub use mpc::{
    audit_plans, one_shot, run_closed_loop, CycleReport, CycleStatus, MpcConfig, MpcError, Planner,
    ReplanTrigger, RunMetrics, RunOutput,
};
pub use network::{
    load_network, sample_network, Link, TmaNetwork, Waypoint, WaypointId, WaypointKind,
};
pub use scenario::{
    generate_scenario, load_scenario, Flight, FlightId, Scenario, ScenarioError, SeparationPolicy,
    WakeCategory,
};
pub use schedule::{FlightSchedule, Schedule};
pub use sim::{Distribution, DisturbanceConfig, Simulator};
pub use solver::{brute_force_oracle, solve, OracleError, SolveLimits, SolveReport, SolveStatus};
