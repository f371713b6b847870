//! Arrival problem instances: flights, entry times and separation policy.

use crate::network::{NetworkError, TmaNetwork, WaypointId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlightId(pub u32);

impl fmt::Display for FlightId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WakeCategory {
    Light,
    Medium,
    Heavy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Flight {
    pub id: FlightId,
    pub entry_waypoint: WaypointId,
    /// Actual time at which the flight reaches its entry waypoint.
    pub entry_time: f64,
    pub wake: WakeCategory,
    /// Entry time as forecast to the controller, when it differs from the actual one.
    pub predicted_entry_time: Option<f64>,
}

impl Flight {
    /// Entry time the controller plans with.
    pub fn planned_entry_time(&self) -> f64 {
        self.predicted_entry_time.unwrap_or(self.entry_time)
    }
}

/// Minimum time gaps between two flights at a shared waypoint.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparationPolicy {
    pub default_gap: f64,
    /// Gap for an ordered `(leader, follower)` wake pair.
    pub overrides: BTreeMap<(WakeCategory, WakeCategory), f64>,
}

impl Default for SeparationPolicy {
    fn default() -> Self {
        Self::uniform(60.0)
    }
}

impl SeparationPolicy {
    pub fn uniform(gap: f64) -> Self {
        SeparationPolicy {
            default_gap: gap,
            overrides: BTreeMap::new(),
        }
    }

    #[inline]
    pub fn gap(&self, leader: WakeCategory, follower: WakeCategory) -> f64 {
        self.overrides
            .get(&(leader, follower))
            .copied()
            .unwrap_or(self.default_gap)
    }

    pub fn max_gap(&self) -> f64 {
        self.overrides
            .values()
            .copied()
            .fold(self.default_gap, f64::max)
    }

    pub fn min_gap(&self) -> f64 {
        self.overrides
            .values()
            .copied()
            .fold(self.default_gap, f64::min)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.default_gap > 0.0) {
            return Err(ScenarioError::NonpositiveGap(self.default_gap));
        }
        if let Some(g) = self.overrides.values().find(|g| !(**g > 0.0)) {
            return Err(ScenarioError::NonpositiveGap(*g));
        }
        Ok(())
    }
}

pub const DEFAULT_MAX_HOLDING: f64 = 600.0;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("flight {flight} references unknown waypoint {waypoint}")]
    UnknownWaypoint {
        flight: FlightId,
        waypoint: WaypointId,
    },
    #[error("flight {flight} enters at waypoint {waypoint}, which is not an entry")]
    NotAnEntry {
        flight: FlightId,
        waypoint: WaypointId,
    },
    #[error("flight {0} has a negative or non-finite entry time")]
    BadEntryTime(FlightId),
    #[error("separation gap must be positive, got {0}")]
    NonpositiveGap(f64),
    #[error("max holding must be nonnegative, got {0}")]
    BadMaxHolding(f64),
    #[error("duplicate flight id {0}")]
    DuplicateFlight(FlightId),
    #[error("unknown flight {0}")]
    UnknownFlight(FlightId),
    #[error(
        "cannot place {count} flights {gap_min} s apart within {window} s over {entries} entries"
    )]
    InfeasiblePacking {
        count: usize,
        gap_min: f64,
        window: f64,
        entries: usize,
    },
    #[error("invalid generator parameters: {0}")]
    BadParameters(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// A validated arrival instance; flights are kept sorted by `(entry_time, id)`.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub network: Arc<TmaNetwork>,
    pub flights: Vec<Flight>,
    pub separation: SeparationPolicy,
    pub max_holding: f64,
}

impl Scenario {
    pub fn new(
        network: Arc<TmaNetwork>,
        mut flights: Vec<Flight>,
        separation: SeparationPolicy,
        max_holding: f64,
    ) -> Result<Self, ScenarioError> {
        separation.validate()?;
        if !(max_holding >= 0.0) || !max_holding.is_finite() {
            return Err(ScenarioError::BadMaxHolding(max_holding));
        }
        let mut ids = BTreeSet::new();
        for f in &flights {
            if !ids.insert(f.id) {
                return Err(ScenarioError::DuplicateFlight(f.id));
            }
            let ix = network
                .ix(f.entry_waypoint)
                .ok_or(ScenarioError::UnknownWaypoint {
                    flight: f.id,
                    waypoint: f.entry_waypoint,
                })?;
            if !network.is_entry(ix) {
                return Err(ScenarioError::NotAnEntry {
                    flight: f.id,
                    waypoint: f.entry_waypoint,
                });
            }
            let times_ok = f.entry_time >= 0.0
                && f.entry_time.is_finite()
                && f.predicted_entry_time
                    .map_or(true, |t| t >= 0.0 && t.is_finite());
            if !times_ok {
                return Err(ScenarioError::BadEntryTime(f.id));
            }
        }
        flights.sort_by(|a, b| a.entry_time.total_cmp(&b.entry_time).then(a.id.cmp(&b.id)));
        Ok(Scenario {
            network,
            flights,
            separation,
            max_holding,
        })
    }

    pub fn flight(&self, id: FlightId) -> Option<&Flight> {
        self.flights.iter().find(|f| f.id == id)
    }

    /// Entry time plus the ideal travel time from the entry waypoint.
    pub fn ideal_landing_time(&self, id: FlightId) -> Result<f64, ScenarioError> {
        let f = self.flight(id).ok_or(ScenarioError::UnknownFlight(id))?;
        Ok(f.entry_time + self.network.ideal_travel_time(f.entry_waypoint)?)
    }

    /// Latest entry time minus earliest entry time.
    pub fn span(&self) -> f64 {
        match (self.flights.first(), self.flights.last()) {
            (Some(a), Some(b)) => b.entry_time - a.entry_time,
            _ => 0.0,
        }
    }

    /// Same flights with a different uniform separation gap.
    pub fn with_separation(&self, separation: SeparationPolicy) -> Self {
        Scenario {
            separation,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        let file = ScenarioFile {
            flights: self
                .flights
                .iter()
                .map(|f| FlightEntry {
                    id: f.id,
                    entry_waypoint: f.entry_waypoint,
                    entry_time_s: f.entry_time,
                    wake: f.wake,
                    predicted_entry_time_s: f.predicted_entry_time,
                })
                .collect(),
            separation: SeparationEntry {
                default_gap_s: self.separation.default_gap,
                overrides: self
                    .separation
                    .overrides
                    .iter()
                    .map(|(&(leader, follower), &gap_s)| OverrideEntry {
                        leader,
                        follower,
                        gap_s,
                    })
                    .collect(),
            },
            max_holding_s: self.max_holding,
        };
        serde_json::to_string_pretty(&file).expect("scenario serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioFile {
    flights: Vec<FlightEntry>,
    #[serde(default)]
    separation: SeparationEntry,
    #[serde(default = "default_max_holding")]
    max_holding_s: f64,
}

fn default_max_holding() -> f64 {
    DEFAULT_MAX_HOLDING
}

#[derive(Debug, Serialize, Deserialize)]
struct FlightEntry {
    id: FlightId,
    entry_waypoint: WaypointId,
    entry_time_s: f64,
    #[serde(default = "default_wake")]
    wake: WakeCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    predicted_entry_time_s: Option<f64>,
}

fn default_wake() -> WakeCategory {
    WakeCategory::Medium
}

#[derive(Debug, Serialize, Deserialize)]
struct SeparationEntry {
    default_gap_s: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    overrides: Vec<OverrideEntry>,
}

impl Default for SeparationEntry {
    fn default() -> Self {
        SeparationEntry {
            default_gap_s: 60.0,
            overrides: Vec::new(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct OverrideEntry {
    leader: WakeCategory,
    follower: WakeCategory,
    gap_s: f64,
}

/// Parse a scenario file against an already loaded network.
pub fn load_scenario(source: &str, net: Arc<TmaNetwork>) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile =
        serde_json::from_str(source).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    let flights = file
        .flights
        .into_iter()
        .map(|f| Flight {
            id: f.id,
            entry_waypoint: f.entry_waypoint,
            entry_time: f.entry_time_s,
            wake: f.wake,
            predicted_entry_time: f.predicted_entry_time_s,
        })
        .collect();
    let separation = SeparationPolicy {
        default_gap: file.separation.default_gap_s,
        overrides: file
            .separation
            .overrides
            .into_iter()
            .map(|o| ((o.leader, o.follower), o.gap_s))
            .collect(),
    };
    Scenario::new(net, flights, separation, file.max_holding_s)
}

/// Seeded synthetic arrivals.
///
/// Each flight picks an entry uniformly among those with spare capacity; the
/// flights sharing an entry get `k` sorted uniform offsets in
/// `[0, window - (k-1) * gap_min]` shifted by `i * gap_min`, which keeps
/// every same-entry pair at least `gap_min` apart inside `[0, window]`.
/// Offsets are floored to whole seconds. Flight ids follow entry-time order.
pub fn generate_scenario(
    net: Arc<TmaNetwork>,
    count: usize,
    window: f64,
    gap_min: f64,
    seed: u64,
) -> Result<Scenario, ScenarioError> {
    if count == 0 {
        return Err(ScenarioError::BadParameters(
            "count must be at least 1".into(),
        ));
    }
    if !(window > 0.0) || !window.is_finite() {
        return Err(ScenarioError::BadParameters(
            "window must be positive".into(),
        ));
    }
    if !(gap_min >= 0.0) || !gap_min.is_finite() {
        return Err(ScenarioError::BadParameters(
            "gap_min must be nonnegative".into(),
        ));
    }
    let entries = net.entries();
    if entries.is_empty() {
        return Err(ScenarioError::BadParameters(
            "network has no entries".into(),
        ));
    }
    let per_entry_cap = if gap_min > 0.0 {
        (window / gap_min).floor() as usize + 1
    } else {
        usize::MAX
    };
    if count > per_entry_cap.saturating_mul(entries.len()) {
        return Err(ScenarioError::InfeasiblePacking {
            count,
            gap_min,
            window,
            entries: entries.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut load = vec![0usize; entries.len()];
    for _ in 0..count {
        let open: Vec<usize> = (0..entries.len())
            .filter(|&e| load[e] < per_entry_cap)
            .collect();
        let e = *open.choose(&mut rng).expect("capacity checked above");
        load[e] += 1;
    }

    let mut drafts: Vec<(f64, WaypointId, WakeCategory)> = Vec::with_capacity(count);
    for (e, &k) in load.iter().enumerate() {
        if k == 0 {
            continue;
        }
        let slack = window - (k as f64 - 1.0) * gap_min;
        let mut offsets: Vec<f64> = (0..k).map(|_| (rng.gen::<f64>() * slack).floor()).collect();
        offsets.sort_by(f64::total_cmp);
        for (i, off) in offsets.into_iter().enumerate() {
            let wake = match rng.gen_range(0..10) {
                0 => WakeCategory::Light,
                1 | 2 => WakeCategory::Heavy,
                _ => WakeCategory::Medium,
            };
            drafts.push((off + i as f64 * gap_min, entries[e], wake));
        }
    }
    drafts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let flights = drafts
        .into_iter()
        .enumerate()
        .map(|(i, (t, entry, wake))| Flight {
            id: FlightId(i as u32 + 1),
            entry_waypoint: entry,
            entry_time: t,
            wake,
            predicted_entry_time: None,
        })
        .collect();
    Scenario::new(
        net,
        flights,
        SeparationPolicy::default(),
        DEFAULT_MAX_HOLDING,
    )
}
