mod common;

use common::small_network;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tma_core::{Link, TmaNetwork, WaypointId, WaypointKind};

/// Fastest entry-to-runway time by enumerating every path over the raw link list.
fn enumerate(net: &TmaNetwork, from: WaypointId) -> Option<f64> {
    let w = net.waypoints().iter().find(|w| w.id == from)?;
    if w.kind == WaypointKind::Runway {
        return Some(0.0);
    }
    net.links()
        .iter()
        .filter(|l| l.from == from)
        .filter_map(|l| {
            let fastest = l
                .paces_s_per_nm
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            enumerate(net, l.to).map(|rest| l.distance_nm * fastest + rest)
        })
        .min_by(f64::total_cmp)
}

fn ideal(net: &TmaNetwork, w: WaypointId) -> Option<f64> {
    net.ideal_travel_time(w).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ideal_time_matches_enumeration(seed in any::<u64>()) {
        let net = small_network(&mut ChaCha8Rng::seed_from_u64(seed));
        for w in net.waypoints() {
            let (a, b) = (ideal(&net, w.id), enumerate(&net, w.id));
            match (a, b) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-9),
                _ => prop_assert_eq!(a.is_some(), b.is_some()),
            }
        }
    }

    #[test]
    fn links_move_ideal_time_one_way(seed in any::<u64>(), pick in any::<prop::sample::Index>(),
                                     a in 0usize..12, b in 0usize..12, d in 1u32..20) {
        let net = small_network(&mut ChaCha8Rng::seed_from_u64(seed));
        let entries = net.entries();
        let l = pick.get(net.links()).clone();
        if let Ok(less) = net.without_link(l.from, l.to) {
            for &e in &entries {
                prop_assert!(ideal(&less, e).unwrap() >= ideal(&net, e).unwrap() - 1e-9);
            }
        }
        let n = net.len();
        let (a, b) = (a % n, b % n);
        let extra = Link {
            from: net.id(a.min(b)),
            to: net.id(a.max(b)),
            distance_nm: d as f64,
            paces_s_per_nm: vec![5.0],
        };
        if let Ok(more) = net.with_link(extra) {
            for &e in &entries {
                prop_assert!(ideal(&more, e).unwrap() <= ideal(&net, e).unwrap() + 1e-9);
            }
        }
    }
}
