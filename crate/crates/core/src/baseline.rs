//! Priority-ordered sequential router.
//!
//! Flights are planned one at a time in order of their ideal landing time.
//! Each flight gets the earliest landing reachable through a time-expanded
//! shortest-path search, treating every previously planned flight as a fixed
//! obstacle. There is no backtracking across flights.

use crate::model::{ModelError, StructuredProblem};
use crate::scenario::FlightId;
use crate::schedule::{FlightSchedule, Schedule};
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::time::Instant;

/// Holding is explored in steps of this many seconds.
pub const HOLD_STEP: f64 = 10.0;
/// Width of a search-grid time bucket in seconds.
pub const GRID: f64 = 1.0;
const EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PriorityPlanResult {
    /// Routed flights only; the objective averages their landing times.
    pub schedule: Schedule,
    pub infeasible_flights: Vec<FlightId>,
    pub wall_time: f64,
}

impl PriorityPlanResult {
    pub fn is_feasible(&self) -> bool {
        self.infeasible_flights.is_empty()
    }
}

#[derive(Clone, Copy, Debug)]
struct Passage {
    k: usize,
    ar: f64,
    dp: f64,
    next: Option<usize>,
}

#[derive(Clone, Copy)]
struct Label {
    node: usize,
    ar: f64,
    parent: Option<(usize, f64, usize)>,
}

#[derive(PartialEq)]
struct Entry {
    key: f64,
    ar: f64,
    seq: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then(other.ar.total_cmp(&self.ar))
            .then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Planner<'a> {
    sp: &'a StructuredProblem,
    at: Vec<Vec<Passage>>,
    done: Vec<bool>,
}

impl Planner<'_> {
    /// Whether flight `k` arriving at `j` at `ar` clears every planned and
    /// pending flight there. Returns the allowed departure intervals.
    fn window(&self, k: usize, j: usize, ar: f64, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let sp = self.sp;
        let f = &sp.flights[k];
        let anchored = f.anchor == j;
        let mut iv = vec![(lo, hi)];
        let cut = |iv: &mut Vec<(f64, f64)>, a: f64, b: f64| {
            iv.retain_mut(|r| {
                r.0 = r.0.max(a);
                r.1 = r.1.min(b);
                r.0 <= r.1 + EPS
            });
        };
        for p in &sp.frozen {
            if p.waypoint != j || p.flight == f.id {
                continue;
            }
            let g = sp.frozen_gap(p, k);
            if !anchored {
                if ar < p.arrival + g - EPS {
                    return Vec::new();
                }
                cut(&mut iv, p.departure + g, f64::INFINITY);
            } else if !f.fixed_dp && !f.exempt {
                cut(&mut iv, p.departure + g, f64::INFINITY);
            }
        }
        for q in &self.at[j] {
            let rule = sp.pair_rule(q.k, k, j);
            let (g_qf, g_fq) = (sp.gap(q.k, k), sp.gap(k, q.k));
            if rule.ar {
                if ar >= q.ar + g_qf - EPS {
                    cut(&mut iv, q.dp + g_qf, f64::INFINITY);
                } else if q.ar >= ar + g_fq - EPS {
                    cut(&mut iv, f64::NEG_INFINITY, q.dp - g_fq);
                } else {
                    return Vec::new();
                }
            } else {
                let (d1, d2) = if rule.dp_gap {
                    (g_qf, g_fq)
                } else {
                    (0.0, 0.0)
                };
                let mut next = Vec::new();
                for &(a, b) in &iv {
                    if b >= q.dp + d1 - EPS {
                        next.push((a.max(q.dp + d1), b));
                    }
                    if a <= q.dp - d2 + EPS {
                        next.push((a, b.min(q.dp - d2)));
                    }
                }
                next.retain(|r| r.0 <= r.1 + EPS);
                next.sort_by(|x, y| x.0.total_cmp(&y.0));
                iv = next;
            }
            if iv.is_empty() {
                return iv;
            }
        }
        if !anchored {
            for (u, fu) in sp.flights.iter().enumerate() {
                if self.done[u] || u == k || fu.anchor != j {
                    continue;
                }
                let (g_uf, g_fu) = (sp.gap(u, k), sp.gap(k, u));
                if ar >= fu.arrival + g_uf - EPS {
                    cut(&mut iv, fu.ready + g_uf, f64::INFINITY);
                } else if fu.arrival >= ar + g_fu - EPS {
                    cut(&mut iv, f64::NEG_INFINITY, fu.latest - g_fu);
                } else {
                    return Vec::new();
                }
            }
        }
        iv
    }

    /// Arrival-side checks on entering `to` from `from` at `ar` after leaving `from` at `dp`.
    fn arrival_ok(&self, k: usize, from: usize, dp: f64, to: usize, ar: f64) -> bool {
        let sp = self.sp;
        let f = &sp.flights[k];
        for p in &sp.frozen {
            if p.waypoint == to && p.flight != f.id && ar < p.arrival + sp.frozen_gap(p, k) - EPS {
                return false;
            }
        }
        for (u, fu) in sp.flights.iter().enumerate() {
            if u != k
                && fu.anchor == to
                && fu.via == Some(from)
                && ar < fu.arrival + sp.gap(u, k) - EPS
            {
                return false;
            }
        }
        for q in &self.at[from] {
            if q.next != Some(to) {
                continue;
            }
            let Some(qt) = self.at[to].iter().find(|x| x.k == q.k) else {
                continue;
            };
            if (dp - q.dp).abs() <= EPS {
                continue;
            }
            let ok = if dp > q.dp {
                ar >= qt.ar + sp.gap(q.k, k) - EPS
            } else {
                qt.ar >= ar + sp.gap(k, q.k) - EPS
            };
            if !ok {
                return false;
            }
        }
        true
    }

    fn departures(&self, k: usize, j: usize, ar: f64) -> Vec<f64> {
        let sp = self.sp;
        let f = &sp.flights[k];
        let (base, lo, hi) = if f.anchor == j {
            (f.ready, f.ready, f.latest)
        } else {
            (ar, ar, ar + sp.cap[j])
        };
        let hi = hi.min(sp.t_max);
        let mut out = Vec::new();
        for (a, b) in self.window(k, j, ar, lo, hi) {
            out.push(a);
            let mut m = ((a - base) / HOLD_STEP).floor() + 1.0;
            loop {
                let t = base + m * HOLD_STEP;
                if t > b + EPS {
                    break;
                }
                if t > a + EPS {
                    out.push(t);
                }
                m += 1.0;
            }
        }
        out
    }

    fn route(&self, k: usize) -> Option<FlightSchedule> {
        let sp = self.sp;
        let net = &sp.net;
        let f = &sp.flights[k];
        let h = |j: usize| net.ideal_travel_time_ix(j).unwrap_or(f64::INFINITY);
        let mut labels = vec![Label {
            node: f.anchor,
            ar: f.arrival,
            parent: None,
        }];
        let mut heap = BinaryHeap::new();
        heap.push(Entry {
            key: f.arrival + h(f.anchor),
            ar: f.arrival,
            seq: 0,
        });
        let mut closed: HashSet<(usize, i64)> = HashSet::new();
        while let Some(Entry { seq, .. }) = heap.pop() {
            let Label { node: j, ar, .. } = labels[seq];
            if !closed.insert((j, (ar / GRID).floor() as i64)) {
                continue;
            }
            if net.is_runway(j) {
                if self.window(k, j, ar, ar, ar).is_empty() {
                    continue;
                }
                return Some(self.trace(k, &labels, seq));
            }
            for dp in self.departures(k, j, ar) {
                for &lx in net.out_links(j) {
                    let to = net.link_endpoints(lx).1;
                    if !h(to).is_finite() {
                        continue;
                    }
                    let link = net.link(lx);
                    for s in 0..link.levels() {
                        let t = dp + link.travel_time(s);
                        if t > sp.t_max + EPS
                            || closed.contains(&(to, (t / GRID).floor() as i64))
                            || !self.arrival_ok(k, j, dp, to, t)
                        {
                            continue;
                        }
                        let cap = if net.is_runway(to) { t } else { t + sp.cap[to] };
                        if self.window(k, to, t, t, cap.min(sp.t_max)).is_empty() {
                            continue;
                        }
                        labels.push(Label {
                            node: to,
                            ar: t,
                            parent: Some((seq, dp, s)),
                        });
                        heap.push(Entry {
                            key: t + h(to),
                            ar: t,
                            seq: labels.len() - 1,
                        });
                    }
                }
            }
        }
        None
    }

    fn trace(&self, k: usize, labels: &[Label], last: usize) -> FlightSchedule {
        let mut chain = Vec::new();
        let mut at = Some(last);
        let mut dp_next = labels[last].ar;
        while let Some(i) = at {
            let l = labels[i];
            chain.push((l.node, l.ar, dp_next));
            match l.parent {
                Some((p, dp, s)) => {
                    dp_next = dp;
                    chain.push((usize::MAX, s as f64, 0.0));
                    at = Some(p);
                }
                None => at = None,
            }
        }
        chain.reverse();
        let mut route = Vec::new();
        let mut arrival = Vec::new();
        let mut departure = Vec::new();
        let mut speed_levels = Vec::new();
        for (node, a, d) in chain {
            if node == usize::MAX {
                speed_levels.push(a as usize);
            } else {
                route.push(self.sp.net.id(node));
                arrival.push(a);
                departure.push(d);
            }
        }
        let holding = arrival.iter().zip(&departure).map(|(a, d)| d - a).collect();
        FlightSchedule {
            flight: self.sp.flights[k].id,
            route,
            landing_time: *arrival.last().unwrap(),
            arrival,
            departure,
            holding,
            speed_levels,
        }
    }

    fn commit(&mut self, k: usize, fs: &FlightSchedule) {
        let net = &self.sp.net;
        let nodes: Vec<usize> = fs.route.iter().map(|&w| net.ix(w).unwrap()).collect();
        for (i, &j) in nodes.iter().enumerate() {
            self.at[j].push(Passage {
                k,
                ar: fs.arrival[i],
                dp: fs.departure[i],
                next: nodes.get(i + 1).copied(),
            });
        }
        self.done[k] = true;
    }
}

/// Plan every flight greedily in ideal-landing order.
pub fn solve_priority(sp: &StructuredProblem) -> PriorityPlanResult {
    let start = Instant::now();
    let mut order: Vec<usize> = (0..sp.flights.len()).collect();
    order.sort_by(|&a, &b| {
        sp.flights[a]
            .ideal_landing
            .total_cmp(&sp.flights[b].ideal_landing)
            .then(sp.flights[a].id.cmp(&sp.flights[b].id))
    });
    let mut planner = Planner {
        sp,
        at: vec![Vec::new(); sp.net.len()],
        done: vec![false; sp.flights.len()],
    };
    let mut routed = Vec::new();
    let mut infeasible = Vec::new();
    for k in order {
        match planner.route(k) {
            Some(fs) => {
                planner.commit(k, &fs);
                routed.push(fs);
            }
            None => {
                planner.done[k] = true;
                infeasible.push(sp.flights[k].id);
            }
        }
    }
    infeasible.sort();
    PriorityPlanResult {
        schedule: Schedule::from_flights(routed),
        infeasible_flights: infeasible,
        wall_time: start.elapsed().as_secs_f64(),
    }
}

/// Convenience wrapper validating and structuring the problem first.
pub fn solve_priority_horizon(
    hp: &crate::model::HorizonProblem,
) -> Result<PriorityPlanResult, ModelError> {
    Ok(solve_priority(&StructuredProblem::new(hp)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audit::audit;
    use crate::model::testkit::scenario;
    use crate::model::HorizonProblem;
    use crate::network::fixtures::line;

    fn run(scn: &crate::scenario::Scenario) -> (HorizonProblem, PriorityPlanResult) {
        let hp = HorizonProblem::from_scenario(scn);
        let r = solve_priority_horizon(&hp).unwrap();
        (hp, r)
    }

    #[test]
    fn single_flight_takes_ideal_route() {
        let (_, r) = run(&scenario(line(&[4.0]), &[(1, 1, 25.0)], 60.0, 600.0));
        assert!(r.is_feasible());
        assert_eq!(r.schedule.objective, 105.0);
    }

    #[test]
    fn two_flights_match_hand_schedule() {
        let (hp, r) = run(&scenario(
            line(&[4.0, 7.0]),
            &[(1, 1, 0.0), (2, 1, 30.0)],
            60.0,
            600.0,
        ));
        assert!(r.is_feasible());
        assert!((r.schedule.objective - 110.0).abs() < 1e-9);
        assert!(audit(&hp, &r.schedule).is_empty());
    }

    #[test]
    fn blocked_flight_is_reported() {
        let (hp, r) = run(&scenario(
            line(&[4.0]),
            &[(1, 1, 0.0), (2, 1, 30.0)],
            60.0,
            0.0,
        ));
        assert_eq!(r.infeasible_flights, vec![FlightId(2)]);
        assert_eq!(r.schedule.flights.len(), 1);
        let partial = HorizonProblem {
            flights: hp.flights[..1].to_vec(),
            ..hp
        };
        assert!(audit(&partial, &r.schedule).is_empty());
    }
}
