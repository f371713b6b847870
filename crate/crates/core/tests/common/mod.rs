#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::sync::Arc;
use tma_core::{
    Flight, FlightId, HorizonProblem, Link, Scenario, SeparationPolicy, StructuredProblem,
    TmaNetwork, WakeCategory, Waypoint, WaypointId, WaypointKind,
};

/// Random layered network within the oracle guard.
pub fn small_network(rng: &mut ChaCha8Rng) -> TmaNetwork {
    let n = rng.gen_range(4..=12usize);
    let entries = if n >= 6 { rng.gen_range(1..=2) } else { 1 };
    let runways = if n >= 8 && rng.gen_bool(0.25) { 2 } else { 1 };
    let waypoints: Vec<Waypoint> = (0..n)
        .map(|i| {
            let kind = if i < entries {
                WaypointKind::Entry
            } else if i >= n - runways {
                WaypointKind::Runway
            } else {
                WaypointKind::Internal
            };
            Waypoint {
                id: WaypointId(i as u32 + 1),
                name: format!("P{i}"),
                x_nm: i as f64,
                y_nm: 0.0,
                kind,
                holding_allowed: kind != WaypointKind::Runway && rng.gen_bool(0.4),
            }
        })
        .collect();
    let mut links = BTreeMap::new();
    for i in 0..n - runways {
        let lo = (i + 1).max(entries);
        let outs = rng.gen_range(1..=2);
        for _ in 0..outs {
            let j = rng.gen_range(lo..n);
            let levels = rng.gen_range(1..=2);
            let base = rng.gen_range(6..=10) as f64 * 0.5;
            let paces: Vec<f64> = (0..levels)
                .map(|l| base + l as f64 * rng.gen_range(1..=4) as f64 * 0.5)
                .collect();
            links.entry((i, j)).or_insert(Link {
                from: WaypointId(i as u32 + 1),
                to: WaypointId(j as u32 + 1),
                distance_nm: rng.gen_range(3..=12) as f64,
                paces_s_per_nm: paces,
            });
        }
    }
    TmaNetwork::new(waypoints, links.into_values().collect()).expect("generated network is valid")
}

pub fn wake(rng: &mut ChaCha8Rng) -> WakeCategory {
    match rng.gen_range(0..10) {
        0 => WakeCategory::Light,
        1 | 2 => WakeCategory::Heavy,
        _ => WakeCategory::Medium,
    }
}

/// Random scenario with at most four flights on a random small network.
pub fn small_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = Arc::new(small_network(&mut rng));
    let entries = net.entries();
    let count = [1, 2, 3, 3, 4, 4, 4][rng.gen_range(0..7)];
    let flights = (1..=count)
        .map(|id| Flight {
            id: FlightId(id),
            entry_waypoint: entries[rng.gen_range(0..entries.len())],
            entry_time: rng.gen_range(0..=100) as f64,
            wake: wake(&mut rng),
            predicted_entry_time: None,
        })
        .collect();
    let mut separation = SeparationPolicy::uniform([30.0, 45.0, 60.0][rng.gen_range(0..3)]);
    if rng.gen_bool(0.3) {
        separation.overrides.insert(
            (WakeCategory::Heavy, WakeCategory::Light),
            separation.default_gap + 30.0,
        );
    }
    let max_holding = [0.0, 60.0, 300.0, 300.0][rng.gen_range(0..4)];
    Scenario::new(net, flights, separation, max_holding).expect("generated scenario is valid")
}

pub fn structured(scn: &Scenario) -> (HorizonProblem, StructuredProblem) {
    let hp = HorizonProblem::from_scenario(scn);
    let sp = StructuredProblem::new(&hp).expect("encodable");
    (hp, sp)
}
