//! Discrete-time plant with a fixed one-second step.
//!
//! Every flight carries its next waypoint, the remaining time until it gets
//! there and the remaining holding time at that waypoint, plus the command
//! sequences loaded from the latest schedule. Command arrival entries are
//! countdowns to the planned arrival at each waypoint and tick down with the
//! clock.

use crate::network::{TmaNetwork, WaypointId};
use crate::scenario::{FlightId, Scenario, WakeCategory};
use crate::schedule::Schedule;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt::Write;
use std::sync::Arc;
use thiserror::Error;

pub const STEP: f64 = 1.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    /// Uniform on `[-xi, xi]`.
    #[default]
    UniformSymmetric,
    /// Uniform on `[0, xi]`.
    UniformPositive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceConfig {
    pub xi_arr: f64,
    pub xi_hld: f64,
    pub xi_ob: f64,
    #[serde(default)]
    pub distribution: Distribution,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stream {
    Arrival = 1,
    Holding = 2,
    Observation = 3,
}

impl DisturbanceConfig {
    /// Same magnitude on travel, holding and observation.
    pub fn uniform(xi: f64, seed: u64) -> Self {
        DisturbanceConfig {
            xi_arr: xi,
            xi_hld: xi,
            xi_ob: xi,
            distribution: Distribution::UniformSymmetric,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for x in [self.xi_arr, self.xi_hld, self.xi_ob] {
            if !(0.0..1.0).contains(&x) {
                return Err(SimError::BadMagnitude(x));
            }
        }
        Ok(())
    }

    fn draw(&self, xi: f64, step: u64, flight: FlightId, stream: Stream) -> f64 {
        if xi == 0.0 {
            return 0.0;
        }
        let mut rng =
            ChaCha8Rng::seed_from_u64(mix(&[self.seed, step, flight.0 as u64, stream as u64]));
        let u: f64 = rng.gen();
        match self.distribution {
            Distribution::UniformSymmetric => xi * (2.0 * u - 1.0),
            Distribution::UniformPositive => xi * u,
        }
    }
}

/// Order-sensitive 64-bit mix of several words.
pub(crate) fn mix(words: &[u64]) -> u64 {
    let mut h: u64 = 0x9e37_79b9_7f4a_7c15;
    for &w in words {
        h ^= w
            .wrapping_add(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(h << 6)
            .wrapping_add(h >> 2);
        h = splitmix(h);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("flight {flight}: command exhausted at waypoint {waypoint} before reaching a runway")]
    CommandExhausted {
        flight: FlightId,
        waypoint: WaypointId,
    },
    #[error("flight {0}: no command loaded")]
    NoCommand(FlightId),
    #[error("schedule does not cover unlanded flight {0}")]
    MissingFlight(FlightId),
    #[error("flight {flight}: schedule starts at {got}, flight is committed to {expected}")]
    WaypointMismatch {
        flight: FlightId,
        expected: WaypointId,
        got: WaypointId,
    },
    #[error("disturbance magnitude {0} outside [0, 1)")]
    BadMagnitude(f64),
}

/// Command sequences `(S_wp, S_arr, S_hld)`; the head is the next waypoint.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Command {
    pub waypoints: VecDeque<WaypointId>,
    pub arrivals: VecDeque<f64>,
    pub holdings: VecDeque<f64>,
}

impl Command {
    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    fn pop(&mut self) {
        self.waypoints.pop_front();
        self.arrivals.pop_front();
        self.holdings.pop_front();
    }

    fn clear(&mut self) {
        *self = Command::default();
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlightSimState {
    pub flight: FlightId,
    pub wake: WakeCategory,
    pub next_waypoint: WaypointId,
    pub remaining_arrival: f64,
    pub remaining_holding: f64,
    pub command: Command,
    /// Waypoint most recently departed.
    pub previous: Option<WaypointId>,
    /// Inside the terminal area (has reached its entry).
    pub entered: bool,
    /// At `next_waypoint`, holding.
    pub arrived: bool,
    /// Actual arrival clock at `next_waypoint` once arrived.
    pub arrival_clock: Option<f64>,
    pub landed: bool,
    pub landing_clock: Option<f64>,
}

/// Observed state of one flight.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Observation {
    pub flight: FlightId,
    pub next_waypoint: WaypointId,
    pub remaining_arrival: f64,
    pub remaining_holding: f64,
    pub previous: Option<WaypointId>,
    pub entered: bool,
    pub arrived: bool,
    pub arrival_clock: Option<f64>,
    pub landed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Arrive,
    HoldStart,
    Depart,
    Land,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Arrive => "arrive",
            EventKind::HoldStart => "hold_start",
            EventKind::Depart => "depart",
            EventKind::Land => "land",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Event {
    pub clock: f64,
    pub flight: FlightId,
    pub kind: EventKind,
    pub waypoint: WaypointId,
}

/// A completed waypoint passage.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PassageRecord {
    pub flight: FlightId,
    pub wake: WakeCategory,
    pub waypoint: WaypointId,
    pub arrival: f64,
    pub departure: f64,
}

#[derive(Clone, Debug)]
pub struct Simulator {
    network: Arc<TmaNetwork>,
    step: u64,
    flights: Vec<FlightSimState>,
    disturbance: Option<DisturbanceConfig>,
    events: Vec<Event>,
    passages: Vec<PassageRecord>,
}

impl Simulator {
    /// Every flight starts outside the area, counting down to its actual entry time.
    pub fn new(scn: &Scenario, disturbance: Option<DisturbanceConfig>) -> Result<Self, SimError> {
        if let Some(d) = &disturbance {
            d.validate()?;
        }
        let mut flights: Vec<FlightSimState> = scn
            .flights
            .iter()
            .map(|f| FlightSimState {
                flight: f.id,
                wake: f.wake,
                next_waypoint: f.entry_waypoint,
                remaining_arrival: f.entry_time,
                remaining_holding: 0.0,
                command: Command::default(),
                previous: None,
                entered: false,
                arrived: false,
                arrival_clock: None,
                landed: false,
                landing_clock: None,
            })
            .collect();
        flights.sort_by_key(|f| f.flight);
        Ok(Simulator {
            network: scn.network.clone(),
            step: 0,
            flights,
            disturbance,
            events: Vec::new(),
            passages: Vec::new(),
        })
    }

    pub fn clock(&self) -> f64 {
        self.step as f64 * STEP
    }

    pub fn flights(&self) -> &[FlightSimState] {
        &self.flights
    }

    pub fn flight(&self, id: FlightId) -> Option<&FlightSimState> {
        self.flights.iter().find(|f| f.flight == id)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn passages(&self) -> &[PassageRecord] {
        &self.passages
    }

    pub fn all_landed(&self) -> bool {
        self.flights.iter().all(|f| f.landed)
    }

    /// Replace the command sequences of every unlanded flight covered by `sched`.
    /// The current link's remaining time is never changed. Flights outside the
    /// area may be left out; they keep their previous commands.
    pub fn load_commands(&mut self, sched: &Schedule) -> Result<(), SimError> {
        let clock = self.clock();
        for f in self.flights.iter().filter(|f| !f.landed) {
            let Some(fs) = sched.flight(f.flight) else {
                if f.entered {
                    return Err(SimError::MissingFlight(f.flight));
                }
                continue;
            };
            if fs.route.first() != Some(&f.next_waypoint) {
                return Err(SimError::WaypointMismatch {
                    flight: f.flight,
                    expected: f.next_waypoint,
                    got: fs.route.first().copied().unwrap_or(WaypointId(0)),
                });
            }
        }
        for f in self.flights.iter_mut().filter(|f| !f.landed) {
            let Some(fs) = sched.flight(f.flight) else {
                continue;
            };
            f.command = Command {
                waypoints: fs.route.iter().copied().collect(),
                arrivals: fs.arrival.iter().map(|a| a - clock).collect(),
                holdings: fs.holding.iter().copied().collect(),
            };
            f.remaining_holding = if f.arrived {
                (fs.departure[0] - clock).max(0.0)
            } else {
                fs.holding[0]
            };
        }
        Ok(())
    }

    /// Possibly noisy view of the flights; noise applies only inside the area.
    pub fn observe(&self) -> Vec<Observation> {
        self.flights
            .iter()
            .map(|f| {
                let xi = match &self.disturbance {
                    Some(d) if f.entered && !f.landed => {
                        d.draw(d.xi_ob, self.step, f.flight, Stream::Observation)
                    }
                    _ => 0.0,
                };
                Observation {
                    flight: f.flight,
                    next_waypoint: f.next_waypoint,
                    remaining_arrival: f.remaining_arrival * (1.0 + xi),
                    remaining_holding: f.remaining_holding * (1.0 + xi),
                    previous: f.previous,
                    entered: f.entered,
                    arrived: f.arrived,
                    arrival_clock: f.arrival_clock,
                    landed: f.landed,
                }
            })
            .collect()
    }

    /// Advance the clock by one step.
    pub fn step(&mut self) -> Result<(), SimError> {
        let k = self.clock();
        let net = self.network.clone();
        for i in 0..self.flights.len() {
            if self.flights[i].landed {
                continue;
            }
            self.step_flight(&net, i, k)?;
        }
        self.step += 1;
        Ok(())
    }

    pub fn run_until(&mut self, clock: f64) -> Result<(), SimError> {
        while self.clock() < clock - 1e-9 && !self.all_landed() {
            self.step()?;
        }
        Ok(())
    }

    pub fn run_to_completion(&mut self, max_clock: f64) -> Result<(), SimError> {
        self.run_until(max_clock)
    }

    fn step_flight(&mut self, net: &TmaNetwork, i: usize, k: f64) -> Result<(), SimError> {
        let f = &mut self.flights[i];
        if f.remaining_arrival >= STEP {
            f.remaining_arrival -= STEP;
            tick(&mut f.command);
            return Ok(());
        }
        let wp = f.next_waypoint;
        if !f.arrived {
            f.arrived = true;
            let at = k + f.remaining_arrival;
            f.arrival_clock = Some(at);
            f.entered = true;
            self.events.push(Event {
                clock: at,
                flight: f.flight,
                kind: EventKind::Arrive,
                waypoint: wp,
            });
            if f.remaining_holding > 0.0 && !net.ix(wp).is_some_and(|ix| net.is_runway(ix)) {
                self.events.push(Event {
                    clock: at,
                    flight: f.flight,
                    kind: EventKind::HoldStart,
                    waypoint: wp,
                });
            }
        }
        let runway = net.ix(wp).is_some_and(|ix| net.is_runway(ix));
        if runway {
            let at = k + f.remaining_arrival;
            f.landed = true;
            f.landing_clock = Some(at);
            f.remaining_arrival = 0.0;
            f.remaining_holding = 0.0;
            f.command.clear();
            self.events.push(Event {
                clock: at,
                flight: f.flight,
                kind: EventKind::Land,
                waypoint: wp,
            });
            self.passages.push(PassageRecord {
                flight: f.flight,
                wake: f.wake,
                waypoint: wp,
                arrival: at,
                departure: at,
            });
            return Ok(());
        }
        if f.command.is_empty() {
            return Err(SimError::NoCommand(f.flight));
        }
        let slack = STEP - f.remaining_arrival;
        if f.remaining_holding >= slack {
            f.remaining_holding -= slack;
            f.remaining_arrival = 0.0;
            tick(&mut f.command);
            return Ok(());
        }
        let depart = k + f.remaining_arrival + f.remaining_holding;
        if f.command.len() < 2 {
            return Err(SimError::CommandExhausted {
                flight: f.flight,
                waypoint: wp,
            });
        }
        self.events.push(Event {
            clock: depart,
            flight: f.flight,
            kind: EventKind::Depart,
            waypoint: wp,
        });
        self.passages.push(PassageRecord {
            flight: f.flight,
            wake: f.wake,
            waypoint: wp,
            arrival: f.arrival_clock.unwrap_or(k),
            departure: depart,
        });
        f.command.pop();
        tick(&mut f.command);
        let (xa, xh) = match &self.disturbance {
            Some(d) => (
                d.draw(d.xi_arr, self.step, f.flight, Stream::Arrival),
                d.draw(d.xi_hld, self.step, f.flight, Stream::Holding),
            ),
            None => (0.0, 0.0),
        };
        f.previous = Some(wp);
        f.next_waypoint = f.command.waypoints[0];
        f.remaining_arrival = (1.0 + xa) * f.command.arrivals[0].max(0.0);
        f.remaining_holding = (1.0 + xh) * f.command.holdings[0];
        f.arrived = false;
        f.arrival_clock = None;
        Ok(())
    }

    /// Event trace as CSV.
    pub fn events_csv(&self) -> String {
        let mut out = String::from("clock,flight,event,waypoint\n");
        for e in &self.events {
            let _ = writeln!(
                out,
                "{:.6},{},{},{}",
                e.clock,
                e.flight,
                e.kind.as_str(),
                e.waypoint
            );
        }
        out
    }
}

fn tick(c: &mut Command) {
    for a in c.arrivals.iter_mut() {
        *a -= STEP;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testkit::scenario;
    use crate::network::fixtures::line;
    use crate::schedule::FlightSchedule;

    fn single(entry: f64) -> (Scenario, Schedule) {
        let scn = scenario(line(&[4.0]), &[(1, 1, entry)], 60.0, 600.0);
        let fs = FlightSchedule {
            flight: FlightId(1),
            route: vec![WaypointId(1), WaypointId(2), WaypointId(3)],
            arrival: vec![entry, entry + 40.0, entry + 80.0],
            departure: vec![entry, entry + 40.0, entry + 80.0],
            holding: vec![0.0; 3],
            speed_levels: vec![0, 0],
            landing_time: entry + 80.0,
        };
        (scn, Schedule::from_flights(vec![fs]))
    }

    fn sim_with(t_arr: f64, t_hld: f64, cmd: &[(u32, f64, f64)]) -> Simulator {
        let (scn, _) = single(0.0);
        let mut sim = Simulator::new(&scn, None).unwrap();
        let f = &mut sim.flights[0];
        f.remaining_arrival = t_arr;
        f.remaining_holding = t_hld;
        f.entered = true;
        f.command = Command {
            waypoints: cmd.iter().map(|c| WaypointId(c.0)).collect(),
            arrivals: cmd.iter().map(|c| c.1).collect(),
            holdings: cmd.iter().map(|c| c.2).collect(),
        };
        sim
    }

    #[test]
    fn case_one_counts_down() {
        let mut sim = sim_with(5.0, 0.0, &[(1, 5.0, 0.0), (2, 45.0, 0.0)]);
        sim.step().unwrap();
        let f = &sim.flights[0];
        assert_eq!(f.remaining_arrival, 4.0);
        assert_eq!(f.next_waypoint, WaypointId(1));
        assert_eq!(f.command.arrivals, VecDeque::from(vec![4.0, 44.0]));
    }

    #[test]
    fn case_two_holds() {
        let mut sim = sim_with(0.4, 3.0, &[(1, 0.4, 3.0), (2, 45.0, 0.0)]);
        sim.step().unwrap();
        let f = &sim.flights[0];
        assert_eq!(f.remaining_arrival, 0.0);
        assert!((f.remaining_holding - 2.4).abs() < 1e-12);
        assert_eq!(f.next_waypoint, WaypointId(1));
    }

    #[test]
    fn case_three_moves_on() {
        let mut sim = sim_with(0.4, 0.2, &[(1, 0.4, 0.2), (2, 40.0, 0.0), (3, 80.0, 0.0)]);
        sim.step().unwrap();
        let f = &sim.flights[0];
        assert_eq!(f.next_waypoint, WaypointId(2));
        assert_eq!(f.remaining_arrival, 39.0);
        assert_eq!(f.command.len(), 2);
        assert_eq!(f.previous, Some(WaypointId(1)));
    }

    #[test]
    fn disturbed_load_scales_travel() {
        let mut sim = sim_with(0.4, 0.2, &[(1, 0.4, 0.2), (2, 40.0, 0.0), (3, 80.0, 0.0)]);
        let cfg = DisturbanceConfig {
            xi_arr: 0.05,
            xi_hld: 0.0,
            xi_ob: 0.0,
            distribution: Distribution::UniformPositive,
            seed: 3,
        };
        sim.disturbance = Some(cfg.clone());
        sim.step().unwrap();
        let xa = cfg.draw(0.05, 0, FlightId(1), Stream::Arrival);
        assert!((0.0..=0.05).contains(&xa));
        assert!((sim.flights[0].remaining_arrival - (1.0 + xa) * 39.0).abs() < 1e-12);
    }

    #[test]
    fn exhausted_command_is_an_error() {
        let mut sim = sim_with(0.0, 0.0, &[(1, 0.0, 0.0)]);
        assert!(matches!(sim.step(), Err(SimError::CommandExhausted { .. })));
    }

    #[test]
    fn nominal_execution_lands_on_schedule() {
        let (scn, sched) = single(12.5);
        let mut sim = Simulator::new(&scn, None).unwrap();
        sim.load_commands(&sched).unwrap();
        sim.run_to_completion(1000.0).unwrap();
        let f = &sim.flights[0];
        assert!(f.landed);
        assert!((f.landing_clock.unwrap() - 92.5).abs() < 1e-9);
        let kinds: Vec<_> = sim.events().iter().map(|e| e.kind).collect();
        assert_eq!(kinds.first(), Some(&EventKind::Arrive));
        assert_eq!(kinds.last(), Some(&EventKind::Land));
    }

    #[test]
    fn load_rejects_mismatched_waypoint() {
        let (scn, mut sched) = single(0.0);
        sched.flights[0].route[0] = WaypointId(2);
        let mut sim = Simulator::new(&scn, None).unwrap();
        assert!(matches!(
            sim.load_commands(&sched),
            Err(SimError::WaypointMismatch { .. })
        ));
    }

    #[test]
    fn observation_noise_only_inside_area() {
        let (scn, sched) = single(5.0);
        let mut sim = Simulator::new(&scn, Some(DisturbanceConfig::uniform(0.1, 9))).unwrap();
        sim.load_commands(&sched).unwrap();
        assert_eq!(sim.observe()[0].remaining_arrival, 5.0);
        sim.run_until(10.0).unwrap();
        let o = &sim.observe()[0];
        assert_eq!(o.next_waypoint, WaypointId(2));
        let truth = sim.flights[0].remaining_arrival;
        assert!((o.remaining_arrival - truth).abs() <= 0.1 * truth + 1e-12);
    }

    #[test]
    fn zero_magnitude_matches_nominal() {
        let (scn, sched) = single(3.0);
        let mut a = Simulator::new(&scn, None).unwrap();
        let mut b = Simulator::new(&scn, Some(DisturbanceConfig::uniform(0.0, 42))).unwrap();
        a.load_commands(&sched).unwrap();
        b.load_commands(&sched).unwrap();
        a.run_to_completion(500.0).unwrap();
        b.run_to_completion(500.0).unwrap();
        assert_eq!(a.events, b.events);
        assert_eq!(a.flights, b.flights);
    }
}
