//! Planned routes and times.

use crate::network::WaypointId;
use crate::scenario::FlightId;
use serde::{Deserialize, Serialize};
use std::fmt::Write;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlightSchedule {
    pub flight: FlightId,
    /// Waypoints from the anchor to the runway.
    pub route: Vec<WaypointId>,
    pub arrival: Vec<f64>,
    pub departure: Vec<f64>,
    pub holding: Vec<f64>,
    /// Speed level index per route link.
    pub speed_levels: Vec<usize>,
    pub landing_time: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// Sorted by flight id.
    pub flights: Vec<FlightSchedule>,
    /// Mean landing time.
    pub objective: f64,
}

impl Schedule {
    pub fn from_flights(mut flights: Vec<FlightSchedule>) -> Self {
        flights.sort_by_key(|f| f.flight);
        let objective = mean(flights.iter().map(|f| f.landing_time));
        Schedule { flights, objective }
    }

    pub fn flight(&self, id: FlightId) -> Option<&FlightSchedule> {
        self.flights.iter().find(|f| f.flight == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }

    /// One row per flight and waypoint.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("flight,seq,waypoint,arrival_s,departure_s,holding_s,speed_level\n");
        for f in &self.flights {
            for (i, w) in f.route.iter().enumerate() {
                let level = f
                    .speed_levels
                    .get(i)
                    .map_or(String::new(), |s| s.to_string());
                let _ = writeln!(
                    out,
                    "{},{},{},{:.6},{:.6},{:.6},{}",
                    f.flight, i, w, f.arrival[i], f.departure[i], f.holding[i], level
                );
            }
        }
        out
    }
}

pub(crate) fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}
