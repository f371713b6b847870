//! Exact branch-and-bound over routes, pairwise orders and speed levels.
//!
//! Every search node keeps the least solution of the difference constraints
//! implied by its decisions. Separation disjunctions are only branched on
//! when that solution violates them, speed levels only when a link's travel
//! time falls strictly between two levels.

mod oracle;

pub use oracle::{brute_force_oracle, OracleError};

use crate::audit::audit;
use crate::model::{PairRule, StructuredProblem};
use crate::schedule::{FlightSchedule, Schedule};
use crate::temporal::{Mark, TemporalNetwork};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::time::{Duration, Instant};

const STOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Timeout,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Timeout => "timeout",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveLimits {
    pub time: Option<Duration>,
    pub nodes: Option<u64>,
}

impl Default for SolveLimits {
    fn default() -> Self {
        SolveLimits {
            time: Some(Duration::from_secs(300)),
            nodes: None,
        }
    }
}

impl SolveLimits {
    pub fn seconds(s: f64) -> Self {
        SolveLimits {
            time: Some(Duration::from_secs_f64(s)),
            nodes: None,
        }
    }

    pub fn unlimited() -> Self {
        SolveLimits {
            time: None,
            nodes: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub nodes: u64,
    pub wall_time: f64,
    pub best_bound: Option<f64>,
    pub incumbent: Option<f64>,
}

/// Pairwise order decision shared by a maximal chain of common waypoints
/// joined by common links.
#[derive(Clone, Debug)]
struct Run {
    a: usize,
    b: usize,
    nodes: Vec<(usize, PairRule)>,
    gap_ab: f64,
    gap_ba: f64,
    order: Option<bool>,
}

enum Undo {
    Path(usize),
    Range(usize, usize, (u8, u8)),
    Order(usize),
}

#[derive(Clone, Copy)]
struct SearchMark {
    tn: Mark,
    trail: usize,
    runs: usize,
}

pub(crate) struct Vars {
    nw: usize,
}

impl Vars {
    pub(crate) fn new(sp: &StructuredProblem) -> Self {
        Vars { nw: sp.net.len() }
    }

    #[inline]
    pub(crate) fn ar(&self, k: usize, j: usize) -> usize {
        1 + 2 * (k * self.nw + j)
    }

    #[inline]
    pub(crate) fn dp(&self, k: usize, j: usize) -> usize {
        2 + 2 * (k * self.nw + j)
    }

    pub(crate) fn network(&self, sp: &StructuredProblem) -> TemporalNetwork {
        let n = 1 + 2 * sp.flights.len() * self.nw;
        let mut lb = vec![0.0; n];
        let mut ub = vec![sp.t_max; n];
        ub[0] = 0.0;
        for (k, f) in sp.flights.iter().enumerate() {
            let (ar, dp) = (self.ar(k, f.anchor), self.dp(k, f.anchor));
            lb[ar] = f.arrival;
            ub[ar] = f.arrival;
            lb[dp] = f.ready;
            ub[dp] = f.latest.max(f.ready);
            for j in 0..self.nw {
                if j != f.anchor {
                    lb[self.ar(k, j)] = f.ready;
                    lb[self.dp(k, j)] = f.ready;
                }
            }
        }
        TemporalNetwork::new(lb, ub)
    }
}

/// Edges shared by every search over a fixed route: per-link travel window,
/// holding window, frozen passages and link occupancy.
pub(crate) fn push_route_edges(
    sp: &StructuredProblem,
    vars: &Vars,
    tn: &mut TemporalNetwork,
    k: usize,
    links: &[usize],
    nodes: &[usize],
    levels: Option<&[(u8, u8)]>,
) {
    let f = &sp.flights[k];
    for (i, &lx) in links.iter().enumerate() {
        let (u, v) = (nodes[i], nodes[i + 1]);
        let link = sp.net.link(lx);
        let (lo, hi) = levels.map_or((0, link.levels() - 1), |r| {
            (r[i].0 as usize, r[i].1 as usize)
        });
        tn.push_edge(vars.dp(k, u), vars.ar(k, v), link.travel_time(lo));
        tn.push_edge(vars.ar(k, v), vars.dp(k, u), -link.travel_time(hi));
        tn.push_edge(vars.ar(k, v), vars.dp(k, v), 0.0);
        tn.push_edge(vars.dp(k, v), vars.ar(k, v), -sp.cap[v]);
    }
    for p in &sp.frozen {
        if p.flight == f.id {
            continue;
        }
        let Some(pos) = nodes.iter().position(|&j| j == p.waypoint) else {
            continue;
        };
        let g = sp.frozen_gap(p, k);
        if pos == 0 {
            if !f.fixed_dp && !f.exempt {
                tn.push_edge(0, vars.dp(k, p.waypoint), p.departure + g);
            }
        } else {
            tn.push_edge(0, vars.ar(k, p.waypoint), p.arrival + g);
            tn.push_edge(0, vars.dp(k, p.waypoint), p.departure + g);
        }
    }
    for (h, fh) in sp.flights.iter().enumerate() {
        let Some(via) = fh.via else { continue };
        if h == k {
            continue;
        }
        let uses = nodes.windows(2).any(|w| w[0] == via && w[1] == fh.anchor);
        if uses {
            tn.push_edge(0, vars.ar(k, fh.anchor), fh.arrival + sp.gap(h, k));
        }
    }
}

/// Least-time schedule of the current temporal network for fully routed flights.
pub(crate) fn extract_schedule(
    sp: &StructuredProblem,
    vars: &Vars,
    tn: &TemporalNetwork,
    routes: &[(usize, Vec<usize>)],
) -> Schedule {
    let flights = routes
        .iter()
        .enumerate()
        .map(|(k, (path, nodes))| {
            let f = &sp.flights[k];
            let arrival: Vec<f64> = nodes.iter().map(|&j| tn.value(vars.ar(k, j))).collect();
            let departure: Vec<f64> = nodes.iter().map(|&j| tn.value(vars.dp(k, j))).collect();
            let holding = arrival.iter().zip(&departure).map(|(a, d)| d - a).collect();
            let speed_levels = f.paths[*path]
                .iter()
                .enumerate()
                .map(|(i, &lx)| {
                    let travel = arrival[i + 1] - departure[i];
                    let link = sp.net.link(lx);
                    (0..link.levels())
                        .min_by(|&x, &y| {
                            (link.travel_time(x) - travel)
                                .abs()
                                .total_cmp(&(link.travel_time(y) - travel).abs())
                        })
                        .unwrap_or(0)
                })
                .collect();
            FlightSchedule {
                flight: f.id,
                route: nodes.iter().map(|&j| sp.net.id(j)).collect(),
                landing_time: *arrival.last().unwrap(),
                arrival,
                departure,
                holding,
                speed_levels,
            }
        })
        .collect();
    Schedule::from_flights(flights)
}

struct Search<'a> {
    sp: &'a StructuredProblem,
    vars: Vars,
    tn: TemporalNetwork,
    path: Vec<Option<usize>>,
    /// Waypoints every route of the flight starts with.
    prefix: Vec<Vec<usize>>,
    /// Route waypoints when routed, otherwise the common prefix.
    nodes_of: Vec<Vec<usize>>,
    pos: Vec<Vec<u32>>,
    range: Vec<Vec<(u8, u8)>>,
    runs: Vec<Run>,
    trail: Vec<Undo>,
    incumbent: Option<(f64, Schedule)>,
    nodes: u64,
    stop: bool,
    start: Instant,
    limits: SolveLimits,
    route_order: Vec<Vec<usize>>,
    flight_order: Vec<usize>,
    min_gap: f64,
    hi: Vec<f64>,
    hq: VecDeque<u32>,
    hqd: Vec<bool>,
    root_ok: bool,
}

/// Links shared by every route of a flight, from its anchor on.
fn common_prefix(f: &crate::model::SFlight) -> Vec<usize> {
    let Some(first) = f.paths.first() else {
        return Vec::new();
    };
    let mut n = first.len();
    for p in &f.paths[1..] {
        n = n.min(p.iter().zip(first).take_while(|(x, y)| x == y).count());
    }
    first[..n].to_vec()
}

const NO_POS: u32 = u32::MAX;

impl<'a> Search<'a> {
    fn new(sp: &'a StructuredProblem, limits: SolveLimits) -> Self {
        let vars = Vars::new(sp);
        let tn = vars.network(sp);
        let nf = sp.flights.len();
        let nw = sp.net.len();
        let route_order = sp
            .flights
            .iter()
            .map(|f| {
                let mut idx: Vec<usize> = (0..f.paths.len()).collect();
                let cost = |p: usize| -> f64 {
                    f.paths[p]
                        .iter()
                        .map(|&lx| sp.net.link(lx).fastest_time())
                        .sum()
                };
                idx.sort_by(|&x, &y| cost(x).total_cmp(&cost(y)).then(x.cmp(&y)));
                idx
            })
            .collect();
        let mut flight_order: Vec<usize> = (0..nf).collect();
        flight_order.sort_by(|&x, &y| {
            sp.flights[x]
                .ideal_landing
                .total_cmp(&sp.flights[y].ideal_landing)
                .then(x.cmp(&y))
        });
        let prefix_links: Vec<Vec<usize>> = sp.flights.iter().map(common_prefix).collect();
        let prefix: Vec<Vec<usize>> = sp
            .flights
            .iter()
            .zip(&prefix_links)
            .map(|(f, links)| {
                std::iter::once(f.anchor)
                    .chain(links.iter().map(|&lx| sp.net.link_endpoints(lx).1))
                    .collect()
            })
            .collect();
        let mut pos = vec![vec![NO_POS; nw]; nf];
        for (k, nodes) in prefix.iter().enumerate() {
            for (i, &j) in nodes.iter().enumerate() {
                pos[k][j] = i as u32;
            }
        }
        let mut tn = tn;
        for k in 0..nf {
            push_route_edges(sp, &vars, &mut tn, k, &prefix_links[k], &prefix[k], None);
        }
        let mut search = Search {
            sp,
            vars,
            tn,
            path: vec![None; nf],
            nodes_of: prefix.clone(),
            prefix,
            pos,
            range: vec![Vec::new(); nf],
            runs: Vec::new(),
            trail: Vec::new(),
            incumbent: None,
            nodes: 0,
            stop: false,
            start: Instant::now(),
            limits,
            route_order,
            flight_order,
            min_gap: sp.hp.separation.min_gap(),
            hi: Vec::new(),
            hq: VecDeque::new(),
            hqd: Vec::new(),
            root_ok: true,
        };
        for b in 0..nf {
            for a in 0..b {
                search.add_runs(a, b);
            }
        }
        search.root_ok = search.tn.propagate();
        search
    }

    fn mark(&self) -> SearchMark {
        SearchMark {
            tn: self.tn.mark(),
            trail: self.trail.len(),
            runs: self.runs.len(),
        }
    }

    fn undo(&mut self, m: SearchMark) {
        self.tn.undo(m.tn);
        while self.trail.len() > m.trail {
            match self.trail.pop().unwrap() {
                Undo::Path(k) => {
                    for &j in &self.nodes_of[k] {
                        self.pos[k][j] = NO_POS;
                    }
                    for (i, &j) in self.prefix[k].iter().enumerate() {
                        self.pos[k][j] = i as u32;
                    }
                    self.path[k] = None;
                    self.nodes_of[k].clone_from(&self.prefix[k]);
                    self.range[k].clear();
                }
                Undo::Range(k, i, old) => self.range[k][i] = old,
                Undo::Order(r) => self.runs[r].order = None,
            }
        }
        self.runs.truncate(m.runs);
    }

    #[inline]
    fn val(&self, v: usize) -> f64 {
        self.tn.value(v)
    }

    fn set_path(&mut self, k: usize, path: usize) -> bool {
        let sp = self.sp;
        let nodes = sp.path_nodes(k, path);
        self.trail.push(Undo::Path(k));
        self.path[k] = Some(path);
        for (i, &j) in nodes.iter().enumerate() {
            self.pos[k][j] = i as u32;
        }
        self.range[k] = sp.flights[k].paths[path]
            .iter()
            .map(|&lx| (0u8, (sp.net.link(lx).levels() - 1) as u8))
            .collect();
        push_route_edges(
            sp,
            &self.vars,
            &mut self.tn,
            k,
            &sp.flights[k].paths[path],
            &nodes,
            None,
        );
        self.nodes_of[k] = nodes;
        for h in 0..sp.flights.len() {
            if h != k {
                let (a, b) = if h < k { (h, k) } else { (k, h) };
                self.add_runs(a, b);
            }
        }
        self.tn.propagate()
    }

    fn add_runs(&mut self, a: usize, b: usize) {
        let sp = self.sp;
        let mut cur: Option<Run> = None;
        let mut prev: Option<(usize, u32)> = None;
        let nodes_a = &self.nodes_of[a];
        let mut out = Vec::new();
        for (pa, &j) in nodes_a.iter().enumerate() {
            let pb = self.pos[b][j];
            if pb == NO_POS {
                if let Some(r) = cur.take() {
                    out.push(r);
                }
                prev = None;
                continue;
            }
            let linked = matches!(prev, Some((qa, qb)) if qa + 1 == pa && qb + 1 == pb);
            let node = (j, sp.pair_rule(a, b, j));
            match (&mut cur, linked) {
                (Some(r), true) => r.nodes.push(node),
                _ => {
                    if let Some(r) = cur.take() {
                        out.push(r);
                    }
                    cur = Some(Run {
                        a,
                        b,
                        nodes: vec![node],
                        gap_ab: sp.gap(a, b),
                        gap_ba: sp.gap(b, a),
                        order: None,
                    });
                }
            }
            prev = Some((pa, pb));
        }
        if let Some(r) = cur {
            out.push(r);
        }
        self.runs.extend(out);
    }

    fn run_ok(&self, r: &Run, a_leads: bool) -> bool {
        let (l, f, g) = if a_leads {
            (r.a, r.b, r.gap_ab)
        } else {
            (r.b, r.a, r.gap_ba)
        };
        r.nodes.iter().all(|&(j, rule)| {
            let v = &self.vars;
            let ar_ok = !rule.ar || self.val(v.ar(f, j)) - self.val(v.ar(l, j)) >= g - STOL;
            let dg = if rule.dp_gap { g } else { 0.0 };
            ar_ok && self.val(v.dp(f, j)) - self.val(v.dp(l, j)) >= dg - STOL
        })
    }

    fn decide(&mut self, ri: usize, a_leads: bool) -> bool {
        self.trail.push(Undo::Order(ri));
        self.runs[ri].order = Some(a_leads);
        let r = &self.runs[ri];
        let (l, f, g) = if a_leads {
            (r.a, r.b, r.gap_ab)
        } else {
            (r.b, r.a, r.gap_ba)
        };
        for &(j, rule) in &r.nodes {
            if rule.ar {
                self.tn.push_edge(self.vars.ar(l, j), self.vars.ar(f, j), g);
            }
            let dg = if rule.dp_gap { g } else { 0.0 };
            self.tn
                .push_edge(self.vars.dp(l, j), self.vars.dp(f, j), dg);
        }
        self.tn.propagate()
    }

    fn order_possible(&self, r: &Run, a_leads: bool) -> bool {
        let (l, f, g) = if a_leads {
            (r.a, r.b, r.gap_ab)
        } else {
            (r.b, r.a, r.gap_ba)
        };
        let v = &self.vars;
        r.nodes.iter().all(|&(j, rule)| {
            let ar_ok = !rule.ar || self.val(v.ar(l, j)) + g <= self.hi[v.ar(f, j)] + STOL;
            let dg = if rule.dp_gap { g } else { 0.0 };
            ar_ok && self.val(v.dp(l, j)) + dg <= self.hi[v.dp(f, j)] + STOL
        })
    }

    /// Fix every undecided order whose alternative is ruled out by the time
    /// windows. Returns false when some pair admits neither order.
    fn force_orders(&mut self) -> bool {
        loop {
            self.tn
                .upper_bounds(&mut self.hi, &mut self.hq, &mut self.hqd);
            let mut forced = Vec::new();
            for (ri, r) in self.runs.iter().enumerate() {
                if r.order.is_some() {
                    continue;
                }
                let a = self.order_possible(r, true);
                let b = self.order_possible(r, false);
                match (a, b) {
                    (false, false) => return false,
                    (true, false) => forced.push((ri, true)),
                    (false, true) => forced.push((ri, false)),
                    _ => {}
                }
            }
            if forced.is_empty() {
                return true;
            }
            for (ri, a_leads) in forced {
                if !self.decide(ri, a_leads) {
                    return false;
                }
            }
        }
    }

    fn pick_conflict(&self) -> Option<(usize, bool)> {
        let mut best: Option<(f64, usize)> = None;
        for (ri, r) in self.runs.iter().enumerate() {
            if r.order.is_some() || self.run_ok(r, true) || self.run_ok(r, false) {
                continue;
            }
            let j = r.nodes[0].0;
            let t = self
                .val(self.vars.ar(r.a, j))
                .min(self.val(self.vars.ar(r.b, j)));
            if best.map_or(true, |(bt, _)| t < bt) {
                best = Some((t, ri));
            }
        }
        let (_, ri) = best?;
        let r = &self.runs[ri];
        let (j, rule) = r.nodes[0];
        let key = |k: usize| {
            if rule.ar {
                self.val(self.vars.ar(k, j))
            } else {
                self.val(self.vars.dp(k, j))
            }
        };
        let (ta, tb) = (key(r.a), key(r.b));
        let a_first = if (ta - tb).abs() > STOL {
            ta < tb
        } else {
            let (ia, ib) = (
                self.sp.flights[r.a].ideal_landing,
                self.sp.flights[r.b].ideal_landing,
            );
            ia <= ib
        };
        Some((ri, a_first))
    }

    fn pick_speed(&self) -> Option<(usize, usize, usize)> {
        let mut best: Option<(f64, usize, usize, usize)> = None;
        for (k, nodes) in self.nodes_of.iter().enumerate() {
            let Some(path) = self.path[k] else { continue };
            for (i, &lx) in self.sp.flights[k].paths[path].iter().enumerate() {
                let dep = self.val(self.vars.dp(k, nodes[i]));
                let travel = self.val(self.vars.ar(k, nodes[i + 1])) - dep;
                let link = self.sp.net.link(lx);
                let (lo, hi) = self.range[k][i];
                let (lo, hi) = (lo as usize, hi as usize);
                if (lo..=hi).any(|s| (link.travel_time(s) - travel).abs() <= STOL) {
                    continue;
                }
                let s = (lo..hi)
                    .rev()
                    .find(|&s| link.travel_time(s) < travel)
                    .unwrap_or(lo);
                if best.map_or(true, |b| dep < b.0) {
                    best = Some((dep, k, i, s));
                }
            }
        }
        best.map(|(_, k, i, s)| (k, i, s))
    }

    fn set_range(&mut self, k: usize, i: usize, lo: usize, hi: usize) -> bool {
        let old = self.range[k][i];
        self.trail.push(Undo::Range(k, i, old));
        self.range[k][i] = (lo as u8, hi as u8);
        let nodes = &self.nodes_of[k];
        let (u, v) = (nodes[i], nodes[i + 1]);
        let lx = self.sp.flights[k].paths[self.path[k].unwrap()][i];
        let link = self.sp.net.link(lx);
        let (pu, av) = (self.vars.dp(k, u), self.vars.ar(k, v));
        if lo as u8 != old.0 {
            self.tn.push_edge(pu, av, link.travel_time(lo));
        }
        if hi as u8 != old.1 {
            self.tn.push_edge(av, pu, -link.travel_time(hi));
        }
        self.tn.propagate()
    }

    fn lower_bound(&self) -> f64 {
        let sp = self.sp;
        let nf = sp.flights.len();
        if nf == 0 {
            return 0.0;
        }
        let lbk: Vec<f64> = (0..nf)
            .map(|k| {
                let last = *self.nodes_of[k].last().unwrap();
                let at = self.val(self.vars.ar(k, last));
                match self.path[k] {
                    Some(_) => at,
                    None => sp.flights[k]
                        .ideal_landing
                        .max(at + sp.net.ideal_travel_time_ix(last).unwrap_or(0.0)),
                }
            })
            .collect();
        let plain: f64 = lbk.iter().sum();
        let mut best = plain;
        let mut members: Vec<(f64, f64)> = Vec::with_capacity(nf);
        for j in 0..sp.net.len() {
            members.clear();
            let mut rest = 0.0;
            for (k, f) in sp.flights.iter().enumerate() {
                let entry = if f.anchor == j {
                    None
                } else if let Some(path) = self.path[k] {
                    let p = self.pos[k][j];
                    (p != NO_POS).then(|| {
                        let p = p as usize;
                        let tail: f64 = f.paths[path][p..]
                            .iter()
                            .zip(&self.range[k][p..])
                            .map(|(&lx, r)| sp.net.link(lx).travel_time(r.0 as usize))
                            .sum();
                        (self.val(self.vars.ar(k, j)), tail)
                    })
                } else if f.must[j] {
                    Some((
                        f.ready + sp.fastest[f.anchor][j],
                        sp.net.ideal_travel_time_ix(j).unwrap_or(0.0),
                    ))
                } else {
                    None
                };
                match entry {
                    Some(e) => members.push(e),
                    None => rest += lbk[k],
                }
            }
            if members.len() < 2 {
                continue;
            }
            members.sort_by(|x, y| x.0.total_cmp(&y.0));
            let mut c = f64::NEG_INFINITY;
            let mut total = rest;
            for &(r, q) in &members {
                c = if c.is_finite() {
                    r.max(c + self.min_gap)
                } else {
                    r
                };
                total += c + q;
            }
            best = best.max(total);
        }
        best / nf as f64
    }

    fn timed_out(&mut self) -> bool {
        if self.stop {
            return true;
        }
        if let Some(n) = self.limits.nodes {
            if self.nodes >= n {
                self.stop = true;
            }
        }
        if self.nodes % 64 == 0 {
            if let Some(t) = self.limits.time {
                if self.start.elapsed() >= t {
                    self.stop = true;
                }
            }
        }
        self.stop
    }

    fn prune_level(&self) -> f64 {
        match &self.incumbent {
            Some((j, _)) => j - 1e-9 - 1e-12 * j.abs(),
            None => f64::INFINITY,
        }
    }

    fn dfs(&mut self) {
        self.nodes += 1;
        if self.timed_out() {
            return;
        }
        if !self.force_orders() || self.lower_bound() >= self.prune_level() {
            return;
        }
        if let Some((ri, a_first)) = self.pick_conflict() {
            for a_leads in [a_first, !a_first] {
                let m = self.mark();
                if self.decide(ri, a_leads) {
                    self.dfs();
                }
                self.undo(m);
                if self.stop {
                    return;
                }
            }
            return;
        }
        if let Some((k, i, s)) = self.pick_speed() {
            let (lo, hi) = self.range[k][i];
            for (nlo, nhi) in [(s + 1, hi as usize), (lo as usize, s)] {
                let m = self.mark();
                if self.set_range(k, i, nlo, nhi) {
                    self.dfs();
                }
                self.undo(m);
                if self.stop {
                    return;
                }
            }
            return;
        }
        if let Some(&k) = self.flight_order.iter().find(|&&k| self.path[k].is_none()) {
            for c in 0..self.route_order[k].len() {
                let p = self.route_order[k][c];
                let m = self.mark();
                if self.set_path(k, p) {
                    self.dfs();
                }
                self.undo(m);
                if self.stop {
                    return;
                }
            }
            return;
        }
        let nf = self.sp.flights.len();
        let j: f64 = (0..nf)
            .map(|k| self.val(self.vars.ar(k, *self.nodes_of[k].last().unwrap())))
            .sum::<f64>()
            / nf.max(1) as f64;
        if j < self.prune_level() {
            let routes: Vec<(usize, Vec<usize>)> = (0..nf)
                .map(|k| (self.path[k].unwrap(), self.nodes_of[k].clone()))
                .collect();
            let sched = extract_schedule(self.sp, &self.vars, &self.tn, &routes);
            self.incumbent = Some((sched.objective, sched));
        }
    }
}

/// Solve a structured problem to optimality, or until a limit is hit.
///
/// A warm-start schedule is used as the initial incumbent when it passes the audit.
pub fn solve(
    sp: &StructuredProblem,
    limits: &SolveLimits,
    warm_start: Option<&Schedule>,
) -> (Option<Schedule>, SolveReport) {
    let start = Instant::now();
    let mut search = Search::new(sp, limits.clone());
    if let Some(w) = warm_start {
        if w.flights.len() == sp.flights.len() && audit(&sp.hp, w).is_empty() {
            search.incumbent = Some((w.objective, w.clone()));
        }
    }
    let root_bound = search.lower_bound();
    if search.root_ok {
        search.dfs();
    }
    let wall_time = start.elapsed().as_secs_f64();
    let incumbent = search.incumbent.take();
    let status = if search.stop {
        SolveStatus::Timeout
    } else if incumbent.is_some() {
        SolveStatus::Optimal
    } else {
        SolveStatus::Infeasible
    };
    let best_bound = match (status, &incumbent) {
        (SolveStatus::Optimal, Some((j, _))) => Some(*j),
        (SolveStatus::Timeout, Some((j, _))) => Some(root_bound.min(*j)),
        (SolveStatus::Timeout, None) => Some(root_bound),
        _ => None,
    };
    let report = SolveReport {
        status,
        nodes: search.nodes,
        wall_time,
        best_bound,
        incumbent: incumbent.as_ref().map(|(j, _)| *j),
    };
    (incumbent.map(|(_, s)| s), report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testkit::scenario;
    use crate::model::HorizonProblem;
    use crate::network::fixtures::{diamond, line};
    use crate::network::WaypointId;

    fn solve_scn(scn: &crate::scenario::Scenario) -> (Option<Schedule>, SolveReport) {
        let sp = StructuredProblem::new(&HorizonProblem::from_scenario(scn)).unwrap();
        solve(&sp, &SolveLimits::default(), None)
    }

    #[test]
    fn single_flight_line() {
        let (s, r) = solve_scn(&scenario(line(&[4.0]), &[(1, 1, 0.0)], 60.0, 600.0));
        let s = s.unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(s.objective, 80.0);
        assert_eq!(
            s.flights[0].route,
            vec![WaypointId(1), WaypointId(2), WaypointId(3)]
        );
        assert!(s.flights[0].holding.iter().all(|&h| h == 0.0));
    }

    #[test]
    fn two_flights_same_entry_slow_follower() {
        let scn = scenario(line(&[4.0, 7.0]), &[(1, 1, 0.0), (2, 1, 30.0)], 60.0, 600.0);
        let (s, r) = solve_scn(&scn);
        let s = s.unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((s.flights[0].landing_time - 80.0).abs() < 1e-9);
        assert!((s.flights[1].landing_time - 140.0).abs() < 1e-9);
        assert!((s.objective - 110.0).abs() < 1e-9);
        assert!(audit(&HorizonProblem::from_scenario(&scn), &s).is_empty());
    }

    #[test]
    fn infeasible_without_holding_or_speed_range() {
        let scn = scenario(line(&[4.0]), &[(1, 1, 0.0), (2, 1, 30.0)], 60.0, 0.0);
        let (s, r) = solve_scn(&scn);
        assert!(s.is_none());
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn diamond_three_flights_is_audited() {
        let scn = scenario(
            diamond(&[4.0, 5.0]),
            &[(1, 1, 0.0), (2, 1, 20.0), (3, 1, 50.0)],
            60.0,
            600.0,
        );
        let (s, r) = solve_scn(&scn);
        assert_eq!(r.status, SolveStatus::Optimal);
        let s = s.unwrap();
        assert!(audit(&HorizonProblem::from_scenario(&scn), &s).is_empty());
        assert!((r.best_bound.unwrap() - s.objective).abs() <= 1e-6 * s.objective.max(1.0));
    }

    #[test]
    fn empty_problem_is_trivially_optimal() {
        let (s, r) = solve_scn(&scenario(line(&[4.0]), &[], 60.0, 600.0));
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(s.unwrap().objective, 0.0);
    }

    #[test]
    fn repeated_solves_are_identical() {
        let net = std::sync::Arc::new(crate::network::sample_network());
        let scn = crate::scenario::generate_scenario(net, 8, 600.0, 60.0, 4).unwrap();
        let (a, ra) = solve_scn(&scn);
        let (b, rb) = solve_scn(&scn);
        assert_eq!(a, b);
        assert_eq!(ra.nodes, rb.nodes);
    }
}
