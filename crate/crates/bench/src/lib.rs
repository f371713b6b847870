//! Shared inputs for the benchmarks.

use std::sync::Arc;
use tma_core::{generate_scenario, sample_network, HorizonProblem, Scenario, StructuredProblem};

/// Generated scenario on the bundled network.
pub fn scenario(count: usize, window: f64, gap_min: f64, seed: u64) -> Scenario {
    generate_scenario(Arc::new(sample_network()), count, window, gap_min, seed)
        .expect("generator parameters are valid")
}

/// Whole-scenario structured problem.
pub fn problem(count: usize, window: f64, gap_min: f64, seed: u64) -> StructuredProblem {
    StructuredProblem::new(&HorizonProblem::from_scenario(&scenario(
        count, window, gap_min, seed,
    )))
    .expect("generated scenarios encode")
}
