mod common;

use common::{small_scenario, structured};
use tma_core::{audit, brute_force_oracle, solve, SolveLimits, SolveStatus};

#[test]
fn solver_matches_exhaustive_search() {
    let mut feasible = 0;
    for seed in 0..240u64 {
        let scn = small_scenario(seed);
        let (hp, sp) = structured(&scn);
        let oracle = brute_force_oracle(&sp).expect("inside guard");
        let (got, report) = solve(&sp, &SolveLimits::unlimited(), None);
        match (&oracle, &got) {
            (Some(o), Some(s)) => {
                feasible += 1;
                assert_eq!(report.status, SolveStatus::Optimal);
                assert!(
                    audit(&hp, o).is_empty(),
                    "seed {seed}: oracle {:?}",
                    audit(&hp, o)
                );
                assert!(
                    audit(&hp, s).is_empty(),
                    "seed {seed}: solver {:?}",
                    audit(&hp, s)
                );
                assert!(
                    (o.objective - s.objective).abs() <= 1e-6,
                    "seed {seed}: oracle {} solver {}",
                    o.objective,
                    s.objective
                );
            }
            (None, None) => assert_eq!(report.status, SolveStatus::Infeasible),
            _ => panic!(
                "seed {seed}: oracle {:?} solver {:?}",
                oracle.map(|s| s.objective),
                got.map(|s| s.objective)
            ),
        }
    }
    assert!(feasible >= 100, "only {feasible} feasible instances");
}
