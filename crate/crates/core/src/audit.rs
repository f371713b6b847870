//! Standalone schedule validator.
//!
//! Re-checks a schedule against a horizon problem without going through the
//! encoder: route shape, anchor times, travel times, holding limits,
//! waypoint separation with a consistent order, no overtaking on common
//! links, clearance behind executed passages and the objective value.

use crate::model::{HorizonFlight, HorizonProblem, TOLERANCE};
use crate::network::WaypointId;
use crate::scenario::FlightId;
use crate::schedule::{FlightSchedule, Schedule};
use serde::Serialize;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Coverage,
    RouteContinuity,
    Anchor,
    TravelTime,
    Holding,
    Separation,
    LinkOrder,
    Frozen,
    Occupancy,
    Objective,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub flights: Vec<FlightId>,
    pub waypoint: Option<WaypointId>,
    pub magnitude: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} flights {:?}", self.kind, self.flights)?;
        if let Some(w) = self.waypoint {
            write!(f, " at waypoint {w}")?;
        }
        write!(f, " by {:.6}", self.magnitude)
    }
}

struct Ctx<'a> {
    hp: &'a HorizonProblem,
    out: Vec<Violation>,
}

impl Ctx<'_> {
    fn flag(
        &mut self,
        kind: ViolationKind,
        flights: &[FlightId],
        waypoint: Option<WaypointId>,
        magnitude: f64,
    ) {
        self.out.push(Violation {
            kind,
            flights: flights.to_vec(),
            waypoint,
            magnitude,
        });
    }

    fn gap(&self, leader: &HorizonFlight, follower: &HorizonFlight) -> f64 {
        self.hp.separation.gap(leader.wake, follower.wake)
    }
}

fn dp_fixed(f: &HorizonFlight) -> bool {
    f.anchor.latest_departure - f.anchor.ready <= 1e-9
}

/// Every constraint violation of `sched` with respect to `hp`; empty when valid.
pub fn audit(hp: &HorizonProblem, sched: &Schedule) -> Vec<Violation> {
    let mut cx = Ctx {
        hp,
        out: Vec::new(),
    };
    let net = &hp.network;
    let mut pairs: Vec<(&HorizonFlight, &FlightSchedule)> = Vec::new();
    for f in &hp.flights {
        let matches: Vec<&FlightSchedule> =
            sched.flights.iter().filter(|s| s.flight == f.id).collect();
        if matches.len() != 1 {
            cx.flag(ViolationKind::Coverage, &[f.id], None, matches.len() as f64);
            continue;
        }
        pairs.push((f, matches[0]));
    }
    for s in &sched.flights {
        if hp.flight(s.flight).is_none() {
            cx.flag(ViolationKind::Coverage, &[s.flight], None, 1.0);
        }
    }

    let mut valid: Vec<(&HorizonFlight, &FlightSchedule)> = Vec::new();
    for &(f, s) in &pairs {
        let n = s.route.len();
        let shape_ok = n >= 1
            && s.arrival.len() == n
            && s.departure.len() == n
            && s.holding.len() == n
            && s.speed_levels.len() + 1 == n;
        if !shape_ok || s.route[0] != f.anchor.waypoint {
            cx.flag(
                ViolationKind::RouteContinuity,
                &[f.id],
                s.route.first().copied(),
                1.0,
            );
            continue;
        }
        let mut ok = true;
        for w in s.route.windows(2) {
            let link = net
                .ix(w[0])
                .zip(net.ix(w[1]))
                .and_then(|(a, b)| net.link_between(a, b));
            if link.is_none() {
                cx.flag(ViolationKind::RouteContinuity, &[f.id], Some(w[0]), 1.0);
                ok = false;
                break;
            }
        }
        let last = net.ix(*s.route.last().unwrap());
        if ok && !last.is_some_and(|ix| net.is_runway(ix)) {
            cx.flag(
                ViolationKind::RouteContinuity,
                &[f.id],
                s.route.last().copied(),
                1.0,
            );
            ok = false;
        }
        if ok {
            valid.push((f, s));
        }
    }

    for &(f, s) in &valid {
        let a = &f.anchor;
        let w0 = Some(a.waypoint);
        let dev = (s.arrival[0] - a.arrival).abs();
        if dev > TOLERANCE {
            cx.flag(ViolationKind::Anchor, &[f.id], w0, dev);
        }
        let early = a.ready - s.departure[0];
        let late = s.departure[0] - a.latest_departure.max(a.ready);
        if early > TOLERANCE || late > TOLERANCE {
            cx.flag(ViolationKind::Anchor, &[f.id], w0, early.max(late));
        }
        for i in 0..s.route.len() {
            let w = Some(s.route[i]);
            let mismatch = (s.departure[i] - s.arrival[i] - s.holding[i]).abs();
            if mismatch > TOLERANCE || s.holding[i] < -TOLERANCE {
                cx.flag(
                    ViolationKind::Holding,
                    &[f.id],
                    w,
                    mismatch.max(-s.holding[i]),
                );
            }
            if i > 0 {
                let ix = net.ix(s.route[i]).unwrap();
                let cap = if net.holding_allowed(ix) {
                    hp.max_holding
                } else {
                    0.0
                };
                if s.holding[i] > cap + TOLERANCE {
                    cx.flag(ViolationKind::Holding, &[f.id], w, s.holding[i] - cap);
                }
            }
            if i + 1 < s.route.len() {
                let lx = net
                    .link_between(net.ix(s.route[i]).unwrap(), net.ix(s.route[i + 1]).unwrap())
                    .unwrap();
                let link = net.link(lx);
                let level = s.speed_levels[i];
                if level >= link.levels() {
                    cx.flag(ViolationKind::TravelTime, &[f.id], w, f64::INFINITY);
                    continue;
                }
                let expect = link.distance_nm * link.paces_s_per_nm[level];
                let resid = (s.arrival[i + 1] - s.departure[i] - expect).abs();
                if resid > TOLERANCE {
                    cx.flag(ViolationKind::TravelTime, &[f.id], w, resid);
                }
            }
        }
        let landing_dev = (s.landing_time - s.arrival[s.route.len() - 1]).abs();
        if landing_dev > TOLERANCE {
            cx.flag(ViolationKind::Objective, &[f.id], None, landing_dev);
        }
    }

    for (x, &(f, s)) in valid.iter().enumerate() {
        for &(g, t) in &valid[x + 1..] {
            check_pair(&mut cx, f, s, g, t);
        }
    }

    for &(g, t) in &valid {
        for p in &hp.frozen {
            if p.flight == g.id {
                continue;
            }
            let Some(i) = t.route.iter().position(|&w| w == p.waypoint) else {
                continue;
            };
            let gap = hp.separation.gap(p.wake, g.wake);
            let mut short: f64 = 0.0;
            if i > 0 {
                short = short.max(p.arrival + gap - t.arrival[i]);
            }
            if i > 0 || !(dp_fixed(g) || g.anchor.exempt) {
                short = short.max(p.departure + gap - t.departure[i]);
            }
            if short > TOLERANCE {
                cx.flag(
                    ViolationKind::Frozen,
                    &[p.flight, g.id],
                    Some(p.waypoint),
                    short,
                );
            }
        }
    }

    for &(f, _) in &valid {
        let Some(via) = f.anchor.via else { continue };
        for &(g, t) in &valid {
            if g.id == f.id {
                continue;
            }
            let Some(i) = t
                .route
                .windows(2)
                .position(|w| w[0] == via && w[1] == f.anchor.waypoint)
            else {
                continue;
            };
            let short = f.anchor.arrival + cx.gap(f, g) - t.arrival[i + 1];
            if short > TOLERANCE {
                cx.flag(
                    ViolationKind::Occupancy,
                    &[f.id, g.id],
                    Some(f.anchor.waypoint),
                    short,
                );
            }
        }
    }

    if pairs.len() == hp.flights.len() && !hp.flights.is_empty() {
        let mean =
            sched.flights.iter().map(|s| s.landing_time).sum::<f64>() / sched.flights.len() as f64;
        let dev = (mean - sched.objective).abs();
        if dev > TOLERANCE {
            cx.flag(ViolationKind::Objective, &[], None, dev);
        }
    }
    cx.out
}

/// Allowed precedence at one common waypoint: (f may lead, g may lead, worst shortfall).
fn node_orders(
    cx: &Ctx,
    f: &HorizonFlight,
    s: &FlightSchedule,
    i: usize,
    g: &HorizonFlight,
    t: &FlightSchedule,
    k: usize,
) -> (bool, bool, f64) {
    let both_anchored = i == 0 && k == 0;
    let check_ar = !both_anchored;
    let full_dp =
        !both_anchored || !((f.anchor.exempt && g.anchor.exempt) || (dp_fixed(f) && dp_fixed(g)));
    let shortfall = |lead_ar: f64, lead_dp: f64, fol_ar: f64, fol_dp: f64, gap: f64| {
        let mut sf: f64 = 0.0;
        if check_ar {
            sf = sf.max(lead_ar + gap - fol_ar);
        }
        let dg = if full_dp { gap } else { 0.0 };
        sf.max(lead_dp + dg - fol_dp)
    };
    let f_lead = shortfall(
        s.arrival[i],
        s.departure[i],
        t.arrival[k],
        t.departure[k],
        cx.gap(f, g),
    );
    let g_lead = shortfall(
        t.arrival[k],
        t.departure[k],
        s.arrival[i],
        s.departure[i],
        cx.gap(g, f),
    );
    (f_lead <= TOLERANCE, g_lead <= TOLERANCE, f_lead.min(g_lead))
}

fn check_pair(
    cx: &mut Ctx,
    f: &HorizonFlight,
    s: &FlightSchedule,
    g: &HorizonFlight,
    t: &FlightSchedule,
) {
    let ids = [f.id, g.id];
    // chains of common waypoints joined by common links
    let mut chain: Option<(bool, bool)> = None;
    let mut prev: Option<(usize, usize)> = None;
    for (i, w) in s.route.iter().enumerate() {
        let Some(k) = t.route.iter().position(|x| x == w) else {
            chain = None;
            prev = None;
            continue;
        };
        let (fl, gl, short) = node_orders(cx, f, s, i, g, t, k);
        if !fl && !gl {
            cx.flag(ViolationKind::Separation, &ids, Some(*w), short);
        }
        let linked = matches!(prev, Some((pi, pk)) if pi + 1 == i && pk + 1 == k);
        chain = match (chain, linked) {
            (Some((cf, cg)), true) => {
                let next = (cf && fl, cg && gl);
                if (fl || gl) && (cf || cg) && !next.0 && !next.1 {
                    cx.flag(
                        ViolationKind::LinkOrder,
                        &ids,
                        Some(*w),
                        short.max(TOLERANCE),
                    );
                }
                Some(next)
            }
            _ => Some((fl, gl)),
        };
        prev = Some((i, k));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testkit::scenario;
    use crate::network::fixtures::line;

    fn two_flight_schedule(second_landing: f64) -> (HorizonProblem, Schedule) {
        let scn = scenario(line(&[4.0]), &[(1, 1, 0.0), (2, 1, 30.0)], 60.0, 600.0);
        let hp = HorizonProblem::from_scenario(&scn);
        let route = vec![WaypointId(1), WaypointId(2), WaypointId(3)];
        let f1 = FlightSchedule {
            flight: FlightId(1),
            route: route.clone(),
            arrival: vec![0.0, 40.0, 80.0],
            departure: vec![0.0, 40.0, 80.0],
            holding: vec![0.0; 3],
            speed_levels: vec![0, 0],
            landing_time: 80.0,
        };
        let hold = second_landing - 110.0;
        let f2 = FlightSchedule {
            flight: FlightId(2),
            route,
            arrival: vec![30.0, 70.0, second_landing],
            departure: vec![30.0, 70.0 + hold, second_landing],
            holding: vec![0.0, hold, 0.0],
            speed_levels: vec![0, 0],
            landing_time: second_landing,
        };
        (hp, Schedule::from_flights(vec![f1, f2]))
    }

    #[test]
    fn flags_missing_separation_and_holding() {
        let (hp, s) = two_flight_schedule(110.0);
        let v = audit(&hp, &s);
        assert!(v.iter().any(|v| v.kind == ViolationKind::Separation));
        let (hp, s) = two_flight_schedule(140.0);
        let v = audit(&hp, &s);
        // waypoint 2 forbids holding
        assert!(v.iter().any(|v| v.kind == ViolationKind::Holding), "{v:?}");
    }

    #[test]
    fn flags_bad_travel_and_objective() {
        let (hp, mut s) = two_flight_schedule(110.0);
        s.flights[0].arrival[1] = 41.0;
        s.objective = 1.0;
        let v = audit(&hp, &s);
        assert!(v.iter().any(|v| v.kind == ViolationKind::TravelTime));
        assert!(v.iter().any(|v| v.kind == ViolationKind::Objective));
    }

    #[test]
    fn flags_overtaking_on_a_link() {
        let scn = scenario(
            line(&[4.0, 8.0, 16.0]),
            &[(1, 1, 0.0), (2, 1, 20.0)],
            60.0,
            600.0,
        );
        let hp = HorizonProblem::from_scenario(&scn);
        let route = vec![WaypointId(1), WaypointId(2), WaypointId(3)];
        let mk = |id: u32, ar: [f64; 3], dp0: f64, lv: [usize; 2]| FlightSchedule {
            flight: FlightId(id),
            route: route.clone(),
            arrival: ar.to_vec(),
            departure: vec![dp0, ar[1], ar[2]],
            holding: vec![dp0 - ar[0], 0.0, 0.0],
            speed_levels: lv.to_vec(),
            landing_time: ar[2],
        };
        // flight 1 ahead at waypoint 2, flight 2 ahead at the runway
        let s = Schedule::from_flights(vec![
            mk(1, [0.0, 40.0, 200.0], 0.0, [0, 2]),
            mk(2, [20.0, 100.0, 140.0], 20.0, [1, 0]),
        ]);
        let v = audit(&hp, &s);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].kind, ViolationKind::LinkOrder);
        let s = Schedule::from_flights(vec![
            mk(1, [0.0, 40.0, 80.0], 0.0, [0, 0]),
            mk(2, [20.0, 100.0, 180.0], 20.0, [1, 1]),
        ]);
        assert!(audit(&hp, &s).is_empty(), "{:?}", audit(&hp, &s));
    }
}
