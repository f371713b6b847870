//! Exhaustive reference optimizer for tiny instances.

use super::{extract_schedule, push_route_edges, Vars};
use crate::model::StructuredProblem;
use crate::schedule::Schedule;
use crate::temporal::TemporalNetwork;
use thiserror::Error;

pub const ORACLE_MAX_FLIGHTS: usize = 4;
pub const ORACLE_MAX_WAYPOINTS: usize = 12;
pub const ORACLE_MAX_LEVELS: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("instance exceeds the oracle size guard ({0})")]
    TooLarge(String),
}

struct Oracle<'a> {
    sp: &'a StructuredProblem,
    vars: Vars,
    tn: TemporalNetwork,
    routes: Vec<(usize, Vec<usize>)>,
    best: Option<(f64, Schedule)>,
}

impl Oracle<'_> {
    fn bound(&self, k: usize, last: Option<usize>) -> f64 {
        let sp = self.sp;
        let mut total = 0.0;
        for (h, f) in sp.flights.iter().enumerate() {
            total += if h < k {
                self.tn
                    .value(self.vars.ar(h, *self.routes[h].1.last().unwrap()))
            } else if h == k {
                match last {
                    Some(j) => {
                        self.tn.value(self.vars.ar(h, j))
                            + sp.net.ideal_travel_time_ix(j).unwrap_or(0.0)
                    }
                    None => f.ideal_landing,
                }
            } else {
                f.ideal_landing
            };
        }
        total / sp.flights.len() as f64
    }

    fn improves(&self, value: f64) -> bool {
        self.best
            .as_ref()
            .map_or(true, |(b, _)| value < b - 1e-9 - 1e-12 * b.abs())
    }

    fn flight(&mut self, k: usize) {
        let sp = self.sp;
        if k == sp.flights.len() {
            let sched = extract_schedule(sp, &self.vars, &self.tn, &self.routes);
            if self.improves(sched.objective) {
                self.best = Some((sched.objective, sched));
            }
            return;
        }
        for path in 0..sp.flights[k].paths.len() {
            let nodes = sp.path_nodes(k, path);
            let m = self.tn.mark();
            push_route_edges(
                sp,
                &self.vars,
                &mut self.tn,
                k,
                &sp.flights[k].paths[path],
                &nodes,
                None,
            );
            if self.tn.propagate() && self.improves(self.bound(k, Some(nodes[0]))) {
                self.routes.push((path, nodes.clone()));
                self.speeds(k, path, &nodes, 0);
                self.routes.pop();
            }
            self.tn.undo(m);
        }
    }

    fn speeds(&mut self, k: usize, path: usize, nodes: &[usize], i: usize) {
        let sp = self.sp;
        let links = &sp.flights[k].paths[path];
        if i == links.len() {
            let shared = self.shared_nodes(k, nodes);
            self.orders(k, nodes, &shared, 0);
            return;
        }
        let link = sp.net.link(links[i]);
        for s in 0..link.levels() {
            let m = self.tn.mark();
            let t = link.travel_time(s);
            let (u, v) = (nodes[i], nodes[i + 1]);
            self.tn.push_edge(self.vars.dp(k, u), self.vars.ar(k, v), t);
            self.tn
                .push_edge(self.vars.ar(k, v), self.vars.dp(k, u), -t);
            if self.tn.propagate() && self.improves(self.bound(k, Some(v))) {
                self.speeds(k, path, nodes, i + 1);
            }
            self.tn.undo(m);
        }
    }

    /// Waypoints shared with every earlier flight as `(h, j)`.
    fn shared_nodes(&self, k: usize, nodes: &[usize]) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for h in 0..k {
            for &j in nodes {
                if self.routes[h].1.contains(&j) {
                    out.push((h, j));
                }
            }
        }
        out
    }

    fn orders(&mut self, k: usize, nodes: &[usize], shared: &[(usize, usize)], idx: usize) {
        let sp = self.sp;
        if idx == shared.len() {
            self.flight(k + 1);
            return;
        }
        let (h, j) = shared[idx];
        for h_leads in [true, false] {
            let (l, f) = if h_leads { (h, k) } else { (k, h) };
            let g = sp.gap(l, f);
            let rule = sp.pair_rule(h, k, j);
            let m = self.tn.mark();
            if rule.ar {
                self.tn.push_edge(self.vars.ar(l, j), self.vars.ar(f, j), g);
            }
            let dg = if rule.dp_gap { g } else { 0.0 };
            self.tn
                .push_edge(self.vars.dp(l, j), self.vars.dp(f, j), dg);
            // no overtaking on a common outgoing link
            let next_k = nodes
                .iter()
                .position(|&x| x == j)
                .and_then(|p| nodes.get(p + 1));
            let route_h = &self.routes[h].1;
            let next_h = route_h
                .iter()
                .position(|&x| x == j)
                .and_then(|p| route_h.get(p + 1));
            if let (Some(&a), Some(&b)) = (next_k, next_h) {
                if a == b {
                    self.tn.push_edge(self.vars.ar(l, a), self.vars.ar(f, a), g);
                }
            }
            if self.tn.propagate() && self.improves(self.bound(k + 1, None)) {
                self.orders(k, nodes, shared, idx + 1);
            }
            self.tn.undo(m);
        }
    }
}

/// Exhaustive search over routes, speed levels and pairwise orders.
/// Returns `Ok(None)` when the instance is infeasible.
pub fn brute_force_oracle(sp: &StructuredProblem) -> Result<Option<Schedule>, OracleError> {
    if sp.flights.len() > ORACLE_MAX_FLIGHTS {
        return Err(OracleError::TooLarge(format!(
            "{} flights",
            sp.flights.len()
        )));
    }
    if sp.net.len() > ORACLE_MAX_WAYPOINTS {
        return Err(OracleError::TooLarge(format!("{} waypoints", sp.net.len())));
    }
    if sp
        .net
        .links()
        .iter()
        .any(|l| l.levels() > ORACLE_MAX_LEVELS)
    {
        return Err(OracleError::TooLarge("speed levels".into()));
    }
    let vars = Vars::new(sp);
    let tn = vars.network(sp);
    let mut o = Oracle {
        sp,
        vars,
        tn,
        routes: Vec::new(),
        best: None,
    };
    o.flight(0);
    Ok(o.best.map(|(_, s)| s))
}
