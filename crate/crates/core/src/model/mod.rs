//! Problem slices handed to the optimizers.
//!
//! A [`HorizonProblem`] describes the flights still to be planned, each
//! anchored at the waypoint it is currently heading to (or holding at), plus
//! the recently executed passages that upcoming flights must stay clear of.
//! [`encode`] turns it into a [`StructuredProblem`] for the in-repo solver and
//! a flat [`MilpInstance`].

mod decode;
mod export;
mod milp;

pub use decode::{assignment_from_schedule, decode, DecodeError};
pub use export::{export_milp, ExportFormat};
pub use milp::{BigMEntry, MilpInstance, Row, Sense, VarKind, Variable};

use crate::network::{TmaNetwork, WaypointId};
use crate::scenario::{FlightId, Scenario, SeparationPolicy, WakeCategory};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::sync::Arc;
use thiserror::Error;

/// Feasibility tolerance in seconds.
pub const TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    /// Waypoint the flight is heading to or holding at.
    pub waypoint: WaypointId,
    /// Arrival time at the anchor; fixed for the horizon.
    pub arrival: f64,
    /// Earliest allowed departure from the anchor.
    pub ready: f64,
    /// Latest allowed departure from the anchor.
    pub latest_departure: f64,
    /// Flight has not entered the terminal area yet.
    pub exempt: bool,
    /// Previous waypoint when the flight is currently on the link into the anchor.
    pub via: Option<WaypointId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonFlight {
    pub id: FlightId,
    pub wake: WakeCategory,
    pub anchor: Anchor,
}

/// A waypoint passage that already happened.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrozenPassage {
    pub flight: FlightId,
    pub wake: WakeCategory,
    pub waypoint: WaypointId,
    pub arrival: f64,
    pub departure: f64,
}

#[derive(Clone, Debug)]
pub struct HorizonProblem {
    pub network: Arc<TmaNetwork>,
    pub separation: SeparationPolicy,
    pub max_holding: f64,
    pub clock: f64,
    /// Sorted by flight id.
    pub flights: Vec<HorizonFlight>,
    pub frozen: Vec<FrozenPassage>,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("flight {flight}: unknown waypoint {waypoint}")]
    UnknownWaypoint {
        flight: FlightId,
        waypoint: WaypointId,
    },
    #[error("flight {0}: no runway reachable from its anchor")]
    AnchorUnreachable(FlightId),
    #[error("flight {flight}: invalid anchor ({reason})")]
    BadAnchor { flight: FlightId, reason: String },
    #[error("duplicate flight {0}")]
    DuplicateFlight(FlightId),
    #[error("unsupported export format {0:?}")]
    UnsupportedFormat(String),
}

impl HorizonProblem {
    /// Whole scenario, every flight anchored at its entry at its planned entry time.
    pub fn from_scenario(scn: &Scenario) -> Self {
        let net = scn.network.clone();
        let mut flights: Vec<HorizonFlight> = scn
            .flights
            .iter()
            .map(|f| {
                let t = f.planned_entry_time();
                let cap = net
                    .ix(f.entry_waypoint)
                    .map_or(0.0, |ix| hold_cap(&net, scn.max_holding, ix));
                HorizonFlight {
                    id: f.id,
                    wake: f.wake,
                    anchor: Anchor {
                        waypoint: f.entry_waypoint,
                        arrival: t,
                        ready: t,
                        latest_departure: t + cap,
                        exempt: true,
                        via: None,
                    },
                }
            })
            .collect();
        flights.sort_by_key(|f| f.id);
        HorizonProblem {
            network: net,
            separation: scn.separation.clone(),
            max_holding: scn.max_holding,
            clock: 0.0,
            flights,
            frozen: Vec::new(),
        }
    }

    pub fn flight(&self, id: FlightId) -> Option<&HorizonFlight> {
        self.flights.iter().find(|f| f.id == id)
    }

    /// Holding allowance at a waypoint.
    pub fn hold_cap(&self, ix: usize) -> f64 {
        hold_cap(&self.network, self.max_holding, ix)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let mut seen = BTreeSet::new();
        for f in &self.flights {
            if !seen.insert(f.id) {
                return Err(ModelError::DuplicateFlight(f.id));
            }
            let a = &f.anchor;
            let ix = self
                .network
                .ix(a.waypoint)
                .ok_or(ModelError::UnknownWaypoint {
                    flight: f.id,
                    waypoint: a.waypoint,
                })?;
            let bad = |reason: &str| ModelError::BadAnchor {
                flight: f.id,
                reason: reason.to_string(),
            };
            if ![a.arrival, a.ready, a.latest_departure]
                .iter()
                .all(|t| t.is_finite())
            {
                return Err(bad("non-finite time"));
            }
            if a.ready < a.arrival - TOLERANCE {
                return Err(bad("ready before arrival"));
            }
            if a.latest_departure < a.ready - TOLERANCE {
                return Err(bad("latest departure before ready"));
            }
            if a.ready < self.clock - TOLERANCE {
                return Err(bad("ready before clock"));
            }
            if let Some(v) = a.via {
                let vix = self.network.ix(v).ok_or(ModelError::UnknownWaypoint {
                    flight: f.id,
                    waypoint: v,
                })?;
                if !self.network.adjacent(vix, ix) {
                    return Err(bad("via waypoint is not a predecessor"));
                }
            }
            if self.network.ideal_travel_time_ix(ix).is_none() {
                return Err(ModelError::AnchorUnreachable(f.id));
            }
        }
        for p in &self.frozen {
            if self.network.ix(p.waypoint).is_none() {
                return Err(ModelError::UnknownWaypoint {
                    flight: p.flight,
                    waypoint: p.waypoint,
                });
            }
        }
        Ok(())
    }

    /// Horizon end bound: latest ready time plus the longest slowest-pace
    /// route, plus full holding for every flight and one maximal gap per
    /// additional flight.
    pub fn t_max(&self) -> f64 {
        if self.flights.is_empty() {
            return self.clock;
        }
        let mut ready: f64 = self.clock;
        let mut longest: f64 = 0.0;
        for f in &self.flights {
            ready = ready.max(f.anchor.ready);
            if let Some(ix) = self.network.ix(f.anchor.waypoint) {
                longest = longest.max(self.network.slowest_travel_time_ix(ix).unwrap_or(0.0));
            }
        }
        let n = self.flights.len() as f64;
        ready + longest + n * self.max_holding + (n - 1.0) * self.separation.max_gap()
    }

    /// Big-M value per constraint row of the flat encoding.
    pub fn big_m_values(&self) -> Result<Vec<BigMEntry>, ModelError> {
        Ok(encode(self)?.1.big_m)
    }
}

pub(crate) fn hold_cap(net: &TmaNetwork, max_holding: f64, ix: usize) -> f64 {
    if net.holding_allowed(ix) {
        max_holding
    } else {
        0.0
    }
}

/// Which separation constraints apply to a flight pair at a shared waypoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct PairRule {
    /// Arrival times must be separated.
    pub ar: bool,
    /// Departure times must be separated by the full gap (otherwise only ordered).
    pub dp_gap: bool,
}

#[derive(Clone, Debug)]
pub(crate) struct SFlight {
    pub id: FlightId,
    pub wake: WakeCategory,
    pub anchor: usize,
    pub arrival: f64,
    pub ready: f64,
    pub latest: f64,
    pub exempt: bool,
    pub fixed_dp: bool,
    pub via: Option<usize>,
    /// Runway-terminating routes from the anchor as link index lists.
    pub paths: Vec<Vec<usize>>,
    /// Waypoints on at least one route.
    pub visits: Vec<bool>,
    /// Waypoints on every route.
    pub must: Vec<bool>,
    /// Ready time plus the ideal travel time from the anchor.
    pub ideal_landing: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct SFrozen {
    pub flight: FlightId,
    pub wake: WakeCategory,
    pub waypoint: usize,
    pub arrival: f64,
    pub departure: f64,
}

/// Index-based form of a horizon problem used by the search algorithms.
#[derive(Clone, Debug)]
pub struct StructuredProblem {
    pub(crate) hp: HorizonProblem,
    pub(crate) net: Arc<TmaNetwork>,
    pub(crate) flights: Vec<SFlight>,
    pub(crate) frozen: Vec<SFrozen>,
    pub(crate) t_max: f64,
    pub(crate) cap: Vec<f64>,
    /// Fastest travel time between waypoint pairs, infinite when unreachable.
    pub(crate) fastest: Vec<Vec<f64>>,
}

impl StructuredProblem {
    pub fn new(hp: &HorizonProblem) -> Result<Self, ModelError> {
        hp.validate()?;
        let net = hp.network.clone();
        let n = net.len();
        let cap: Vec<f64> = (0..n).map(|j| hp.hold_cap(j)).collect();
        let flights = hp
            .flights
            .iter()
            .map(|f| {
                let a = &f.anchor;
                let anchor = net.ix(a.waypoint).expect("validated");
                let paths = net.paths_to_runway(anchor);
                let mut visits = vec![false; n];
                let mut must = vec![true; n];
                for p in &paths {
                    let mut on = vec![false; n];
                    on[anchor] = true;
                    for &lx in p {
                        on[net.link_endpoints(lx).1] = true;
                    }
                    for j in 0..n {
                        visits[j] |= on[j];
                        must[j] &= on[j];
                    }
                }
                SFlight {
                    id: f.id,
                    wake: f.wake,
                    anchor,
                    arrival: a.arrival,
                    ready: a.ready,
                    latest: a.latest_departure.max(a.ready),
                    exempt: a.exempt,
                    fixed_dp: a.latest_departure - a.ready <= 1e-9,
                    via: a.via.and_then(|v| net.ix(v)),
                    paths,
                    visits,
                    must,
                    ideal_landing: a.ready + net.ideal_travel_time_ix(anchor).expect("validated"),
                }
            })
            .collect();
        let frozen = hp
            .frozen
            .iter()
            .map(|p| SFrozen {
                flight: p.flight,
                wake: p.wake,
                waypoint: net.ix(p.waypoint).expect("validated"),
                arrival: p.arrival,
                departure: p.departure,
            })
            .collect();
        let mut fastest = vec![vec![f64::INFINITY; n]; n];
        for (i, row) in fastest.iter_mut().enumerate() {
            row[i] = 0.0;
            for &u in net.topological_order() {
                if !row[u].is_finite() {
                    continue;
                }
                for &lx in net.out_links(u) {
                    let v = net.link_endpoints(lx).1;
                    let t = row[u] + net.link(lx).fastest_time();
                    if t < row[v] {
                        row[v] = t;
                    }
                }
            }
        }
        Ok(StructuredProblem {
            hp: hp.clone(),
            t_max: hp.t_max(),
            net,
            flights,
            frozen,
            cap,
            fastest,
        })
    }

    pub fn horizon(&self) -> &HorizonProblem {
        &self.hp
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn flight_count(&self) -> usize {
        self.flights.len()
    }

    pub(crate) fn gap(&self, leader: usize, follower: usize) -> f64 {
        self.hp
            .separation
            .gap(self.flights[leader].wake, self.flights[follower].wake)
    }

    pub(crate) fn frozen_gap(&self, p: &SFrozen, follower: usize) -> f64 {
        self.hp.separation.gap(p.wake, self.flights[follower].wake)
    }

    pub(crate) fn pair_rule(&self, a: usize, b: usize, j: usize) -> PairRule {
        let (fa, fb) = (&self.flights[a], &self.flights[b]);
        if fa.anchor == j && fb.anchor == j {
            PairRule {
                ar: false,
                dp_gap: !((fa.exempt && fb.exempt) || (fa.fixed_dp && fb.fixed_dp)),
            }
        } else {
            PairRule {
                ar: true,
                dp_gap: true,
            }
        }
    }

    /// Waypoint sequence of a route, starting at the anchor.
    pub(crate) fn path_nodes(&self, k: usize, path: usize) -> Vec<usize> {
        let f = &self.flights[k];
        let mut nodes = vec![f.anchor];
        for &lx in &f.paths[path] {
            nodes.push(self.net.link_endpoints(lx).1);
        }
        nodes
    }
}

/// Encode a horizon problem into its structured and flat forms.
pub fn encode(hp: &HorizonProblem) -> Result<(StructuredProblem, MilpInstance), ModelError> {
    let sp = StructuredProblem::new(hp)?;
    let inst = milp::build(&sp);
    Ok((sp, inst))
}


#[cfg(test)]
mod tests {
    use super::testkit::scenario;
    use super::*;
    use crate::network::fixtures::{diamond, line};

    #[test]
    fn t_max_single_flight_line() {
        let scn = scenario(line(&[4.0]), &[(1, 1, 25.0)], 60.0, 600.0);
        let hp = HorizonProblem::from_scenario(&scn);
        assert_eq!(hp.t_max(), 25.0 + 80.0 + 600.0);
    }

    #[test]
    fn t_max_table_scale_is_moderate() {
        let net = Arc::new(crate::network::sample_network());
        let scn = crate::scenario::generate_scenario(net, 10, 600.0, 60.0, 1).unwrap();
        let hp = HorizonProblem::from_scenario(&scn);
        for m in hp.big_m_values().unwrap() {
            assert!(m.value.is_finite() && m.value < 1e5, "{m:?}");
        }
    }

    #[test]
    fn empty_problem_has_no_big_m() {
        let scn = scenario(line(&[4.0]), &[], 60.0, 600.0);
        let hp = HorizonProblem::from_scenario(&scn);
        assert!(hp.big_m_values().unwrap().is_empty());
    }

    #[test]
    fn rejects_anchor_without_runway() {
        let scn = scenario(line(&[4.0]), &[(1, 1, 0.0)], 60.0, 600.0);
        let mut hp = HorizonProblem::from_scenario(&scn);
        hp.flights[0].anchor.ready = -5.0;
        assert!(matches!(hp.validate(), Err(ModelError::BadAnchor { .. })));
    }

    #[test]
    fn must_visit_sets() {
        let scn = scenario(diamond(&[4.0]), &[(1, 1, 0.0)], 60.0, 600.0);
        let sp = StructuredProblem::new(&HorizonProblem::from_scenario(&scn)).unwrap();
        let f = &sp.flights[0];
        assert_eq!(f.paths.len(), 2);
        assert_eq!(f.must, vec![true, false, false, true]);
        assert_eq!(f.visits, vec![true; 4]);
        assert_eq!(sp.fastest[0][3], 100.0);
        assert_eq!(f.ideal_landing, 100.0);
    }
}
