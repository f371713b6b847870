use std::sync::Arc;
use tma_core::{
    audit_plans, generate_scenario, one_shot, run_closed_loop, sample_network, DisturbanceConfig,
    Flight, FlightId, MpcConfig, Planner, ReplanTrigger, Scenario, SeparationPolicy, SolveLimits,
    WakeCategory,
};

#[test]
fn lone_flight_lands_at_its_ideal_time() {
    let net = Arc::new(sample_network());
    for (k, entry) in net.entries().into_iter().enumerate() {
        let t = 37.0 * k as f64;
        let scn = Scenario::new(
            net.clone(),
            vec![Flight {
                id: FlightId(1),
                entry_waypoint: entry,
                entry_time: t,
                wake: WakeCategory::Medium,
                predicted_entry_time: None,
            }],
            SeparationPolicy::uniform(60.0),
            300.0,
        )
        .unwrap();
        let ideal = t + net.ideal_travel_time(entry).unwrap();
        let out = run_closed_loop(&scn, &MpcConfig::default(), None).unwrap();
        let j = out.metrics.objective.unwrap();
        assert!((j - ideal).abs() <= 1.0, "entry {entry:?}: {j} vs {ideal}");
    }
}

#[test]
fn disturbed_runs_keep_clean_plans() {
    let net = Arc::new(sample_network());
    let scn = generate_scenario(net, 10, 1800.0, 60.0, 3).unwrap();
    for planner in [Planner::Milp, Planner::Priority] {
        for trigger in [ReplanTrigger::Periodic, ReplanTrigger::Both] {
            let cfg = MpcConfig {
                planner,
                replan_trigger: trigger,
                node_limit: Some(100_000),
                ..MpcConfig::default()
            };
            for seed in 0..4 {
                let out = run_closed_loop(&scn, &cfg, Some(DisturbanceConfig::uniform(0.1, seed)))
                    .unwrap();
                assert!(audit_plans(&out.plans).is_empty());
                if !out.metrics.infeasible {
                    assert_eq!(out.metrics.landed, scn.flights.len());
                }
            }
        }
    }
}

#[test]
fn same_seed_same_run() {
    let net = Arc::new(sample_network());
    let scn = generate_scenario(net, 8, 1200.0, 60.0, 5).unwrap();
    let cfg = MpcConfig {
        node_limit: Some(50_000),
        solve_time_limit: 1e6,
        ..MpcConfig::default()
    };
    let d = Some(DisturbanceConfig::uniform(0.15, 9));
    let a = run_closed_loop(&scn, &cfg, d.clone()).unwrap();
    let b = run_closed_loop(&scn, &cfg, d).unwrap();
    assert_eq!(a.simulator.events_csv(), b.simulator.events_csv());
    assert_eq!(a.metrics.objective, b.metrics.objective);
}

#[test]
fn one_shot_priority_matches_its_plan_without_noise() {
    let net = Arc::new(sample_network());
    let scn = generate_scenario(net, 6, 900.0, 60.0, 2).unwrap();
    let out = one_shot(&scn, Planner::Priority, &SolveLimits::default(), None).unwrap();
    let plan = &out.plans[0].schedule;
    assert!((out.metrics.objective.unwrap() - plan.objective).abs() <= 1.0);
}

#[test]
fn realized_passages_keep_separation_without_noise() {
    let net = Arc::new(sample_network());
    for seed in 0..3 {
        let scn = generate_scenario(net.clone(), 20, 2400.0, 60.0, seed).unwrap();
        let out = run_closed_loop(&scn, &MpcConfig::default(), None).unwrap();
        assert!(!out.metrics.infeasible);
        let mut by_wp = std::collections::BTreeMap::<_, Vec<_>>::new();
        for p in out.simulator.passages() {
            by_wp.entry(p.waypoint).or_default().push(p);
        }
        for ps in by_wp.values_mut() {
            ps.sort_by(|a, b| a.arrival.total_cmp(&b.arrival));
            for w in ps.windows(2) {
                let gap = scn.separation.gap(w[0].wake, w[1].wake);
                assert!(w[1].arrival - w[0].arrival >= gap - 1.0);
                assert!(w[1].departure - w[0].departure >= gap - 1.0);
            }
        }
    }
}

#[test]
fn one_shot_bounds_rolling_from_below() {
    let net = Arc::new(sample_network());
    for (n, seed) in [(12, 0), (16, 1), (20, 2), (24, 3)] {
        let scn = generate_scenario(net.clone(), n, 2400.0, 60.0, seed).unwrap();
        let once = one_shot(&scn, Planner::Milp, &SolveLimits::default(), None).unwrap();
        let rolling = run_closed_loop(&scn, &MpcConfig::default(), None).unwrap();
        let (a, b) = (
            once.metrics.objective.unwrap(),
            rolling.metrics.objective.unwrap(),
        );
        assert!(a <= b + 1e-6, "{n}/{seed}: one-shot {a} rolling {b}");
        assert!((b - a) / a <= 0.05);
    }
}
