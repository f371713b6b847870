//! Terminal-area route graph.
//!
//! The network is a directed acyclic graph of waypoints connected by links.
//! Each link carries a distance and an ordered list of paces (seconds per
//! nautical mile, fastest first). All dynamics derive from link distances;
//! waypoint coordinates are metadata only.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use thiserror::Error;

/// External waypoint identifier as written in network files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WaypointId(pub u32);

impl fmt::Display for WaypointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaypointKind {
    Entry,
    Internal,
    Runway,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub id: WaypointId,
    pub name: String,
    pub x_nm: f64,
    pub y_nm: f64,
    pub kind: WaypointKind,
    pub holding_allowed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub from: WaypointId,
    pub to: WaypointId,
    pub distance_nm: f64,
    /// Pace per speed level in seconds per nautical mile, fastest first.
    pub paces_s_per_nm: Vec<f64>,
}

impl Link {
    /// Travel time in seconds at speed level `level`.
    #[inline]
    pub fn travel_time(&self, level: usize) -> f64 {
        self.distance_nm * self.paces_s_per_nm[level]
    }

    #[inline]
    pub fn fastest_time(&self) -> f64 {
        self.travel_time(0)
    }

    #[inline]
    pub fn slowest_time(&self) -> f64 {
        self.travel_time(self.paces_s_per_nm.len() - 1)
    }

    #[inline]
    pub fn levels(&self) -> usize {
        self.paces_s_per_nm.len()
    }
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("duplicate waypoint id {0}")]
    DuplicateWaypoint(WaypointId),
    #[error("link {from}->{to} references unknown waypoint {missing}")]
    UnknownWaypoint {
        from: WaypointId,
        to: WaypointId,
        missing: WaypointId,
    },
    #[error("duplicate link {0}->{1}")]
    DuplicateLink(WaypointId, WaypointId),
    #[error("link {0}->{1} has nonpositive distance")]
    NonpositiveDistance(WaypointId, WaypointId),
    #[error("link {0}->{1} has no speed levels")]
    NoSpeedLevels(WaypointId, WaypointId),
    #[error("link {0}->{1} paces must be positive and strictly increasing")]
    BadPaces(WaypointId, WaypointId),
    #[error("cycle detected through waypoint {0}")]
    Cycle(WaypointId),
    #[error("runway {0} has outgoing links")]
    RunwayHasOutgoing(WaypointId),
    #[error("runway {0} allows holding")]
    RunwayHolding(WaypointId),
    #[error("no runway reachable from waypoint {0}")]
    UnreachableRunway(WaypointId),
    #[error("unknown waypoint {0}")]
    Unknown(WaypointId),
}

/// Network file layout. Links may omit paces and inherit `default_paces_s_per_nm`.
#[derive(Debug, Serialize, Deserialize)]
struct NetworkFile {
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    default_paces_s_per_nm: Option<Vec<f64>>,
    waypoints: Vec<Waypoint>,
    links: Vec<LinkEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LinkEntry {
    from: WaypointId,
    to: WaypointId,
    distance_nm: f64,
    #[serde(default)]
    paces_s_per_nm: Option<Vec<f64>>,
}

/// Validated, immutable route graph.
///
/// Waypoints are stored sorted by id and addressed internally by dense index;
/// links are sorted by `(from, to)` so every derived ordering is reproducible.
#[derive(Clone, Debug)]
pub struct TmaNetwork {
    description: Option<String>,
    waypoints: Vec<Waypoint>,
    links: Vec<Link>,
    index: HashMap<WaypointId, usize>,
    link_index: HashMap<(usize, usize), usize>,
    out_links: Vec<Vec<usize>>,
    in_links: Vec<Vec<usize>>,
    topo: Vec<usize>,
    ideal_to_runway: Vec<f64>,
    slowest_to_runway: Vec<f64>,
}

impl TmaNetwork {
    pub fn new(waypoints: Vec<Waypoint>, links: Vec<Link>) -> Result<Self, NetworkError> {
        Self::build(None, waypoints, links)
    }

    fn build(
        description: Option<String>,
        mut waypoints: Vec<Waypoint>,
        mut links: Vec<Link>,
    ) -> Result<Self, NetworkError> {
        waypoints.sort_by_key(|w| w.id);
        let mut index = HashMap::with_capacity(waypoints.len());
        for (ix, w) in waypoints.iter().enumerate() {
            if index.insert(w.id, ix).is_some() {
                return Err(NetworkError::DuplicateWaypoint(w.id));
            }
            if w.kind == WaypointKind::Runway && w.holding_allowed {
                return Err(NetworkError::RunwayHolding(w.id));
            }
        }
        links.sort_by_key(|l| (l.from, l.to));
        let n = waypoints.len();
        let mut out_links = vec![Vec::new(); n];
        let mut in_links = vec![Vec::new(); n];
        let mut link_index = HashMap::with_capacity(links.len());
        for (lx, l) in links.iter().enumerate() {
            let from = *index.get(&l.from).ok_or(NetworkError::UnknownWaypoint {
                from: l.from,
                to: l.to,
                missing: l.from,
            })?;
            let to = *index.get(&l.to).ok_or(NetworkError::UnknownWaypoint {
                from: l.from,
                to: l.to,
                missing: l.to,
            })?;
            if !(l.distance_nm > 0.0) || !l.distance_nm.is_finite() {
                return Err(NetworkError::NonpositiveDistance(l.from, l.to));
            }
            if l.paces_s_per_nm.is_empty() {
                return Err(NetworkError::NoSpeedLevels(l.from, l.to));
            }
            let paces_ok = l.paces_s_per_nm.iter().all(|p| *p > 0.0 && p.is_finite())
                && l.paces_s_per_nm.windows(2).all(|w| w[0] < w[1]);
            if !paces_ok {
                return Err(NetworkError::BadPaces(l.from, l.to));
            }
            if link_index.insert((from, to), lx).is_some() {
                return Err(NetworkError::DuplicateLink(l.from, l.to));
            }
            if waypoints[from].kind == WaypointKind::Runway {
                return Err(NetworkError::RunwayHasOutgoing(l.from));
            }
            out_links[from].push(lx);
            in_links[to].push(lx);
        }

        let topo = topological_order(&waypoints, &links, &index, &in_links, &out_links)?;

        let mut net = TmaNetwork {
            description,
            waypoints,
            links,
            index,
            link_index,
            out_links,
            in_links,
            topo,
            ideal_to_runway: Vec::new(),
            slowest_to_runway: Vec::new(),
        };
        net.ideal_to_runway = net.cost_to_runway(|l| l.fastest_time(), f64::min, f64::INFINITY);
        net.slowest_to_runway =
            net.cost_to_runway(|l| l.slowest_time(), f64::max, f64::NEG_INFINITY);

        for (ix, w) in net.waypoints.iter().enumerate() {
            if w.kind == WaypointKind::Entry && !net.ideal_to_runway[ix].is_finite() {
                return Err(NetworkError::UnreachableRunway(w.id));
            }
        }
        Ok(net)
    }

    /// Dynamic program in reverse topological order. Waypoints without any
    /// runway-terminating path keep the `none` value.
    fn cost_to_runway(
        &self,
        weight: impl Fn(&Link) -> f64,
        pick: impl Fn(f64, f64) -> f64,
        none: f64,
    ) -> Vec<f64> {
        let mut cost = vec![none; self.waypoints.len()];
        for &u in self.topo.iter().rev() {
            if self.waypoints[u].kind == WaypointKind::Runway {
                cost[u] = 0.0;
                continue;
            }
            let mut best = none;
            for &lx in &self.out_links[u] {
                let v = self.index[&self.links[lx].to];
                if cost[v].is_finite() {
                    let c = weight(&self.links[lx]) + cost[v];
                    best = if best.is_finite() { pick(best, c) } else { c };
                }
            }
            cost[u] = best;
        }
        cost
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn description(&self) -> Option<&str> {
        self.description.as_deref()
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    /// Dense index of a waypoint id.
    pub fn ix(&self, id: WaypointId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn waypoint(&self, ix: usize) -> &Waypoint {
        &self.waypoints[ix]
    }

    pub fn id(&self, ix: usize) -> WaypointId {
        self.waypoints[ix].id
    }

    pub fn link(&self, lx: usize) -> &Link {
        &self.links[lx]
    }

    pub fn link_between(&self, from: usize, to: usize) -> Option<usize> {
        self.link_index.get(&(from, to)).copied()
    }

    /// Boolean adjacency relation between dense indices.
    pub fn adjacent(&self, from: usize, to: usize) -> bool {
        self.link_index.contains_key(&(from, to))
    }

    pub fn link_endpoints(&self, lx: usize) -> (usize, usize) {
        let l = &self.links[lx];
        (self.index[&l.from], self.index[&l.to])
    }

    pub fn out_links(&self, ix: usize) -> &[usize] {
        &self.out_links[ix]
    }

    pub fn in_links(&self, ix: usize) -> &[usize] {
        &self.in_links[ix]
    }

    /// Topological order of dense indices, ties broken by waypoint id.
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn is_runway(&self, ix: usize) -> bool {
        self.waypoints[ix].kind == WaypointKind::Runway
    }

    pub fn is_entry(&self, ix: usize) -> bool {
        self.waypoints[ix].kind == WaypointKind::Entry
    }

    pub fn holding_allowed(&self, ix: usize) -> bool {
        self.waypoints[ix].holding_allowed
    }

    pub fn entries(&self) -> Vec<WaypointId> {
        self.waypoints
            .iter()
            .filter(|w| w.kind == WaypointKind::Entry)
            .map(|w| w.id)
            .collect()
    }

    pub fn runways(&self) -> Vec<WaypointId> {
        self.waypoints
            .iter()
            .filter(|w| w.kind == WaypointKind::Runway)
            .map(|w| w.id)
            .collect()
    }

    /// Minimum travel time from `from` to any runway at the fastest pace on
    /// every link, with no holding.
    pub fn ideal_travel_time(&self, from: WaypointId) -> Result<f64, NetworkError> {
        let ix = self.ix(from).ok_or(NetworkError::Unknown(from))?;
        self.ideal_travel_time_ix(ix)
            .ok_or(NetworkError::UnreachableRunway(from))
    }

    pub fn ideal_travel_time_ix(&self, ix: usize) -> Option<f64> {
        let c = self.ideal_to_runway[ix];
        c.is_finite().then_some(c)
    }

    /// Maximum over runway-terminating paths of the slowest-pace travel time.
    pub fn slowest_travel_time_ix(&self, ix: usize) -> Option<f64> {
        let c = self.slowest_to_runway[ix];
        c.is_finite().then_some(c)
    }

    /// Every runway-terminating path from `from`, as link index sequences.
    /// Paths are produced in lexicographic order of successor waypoint ids.
    pub fn paths_to_runway(&self, from: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut stack = Vec::new();
        self.collect_paths(from, &mut stack, &mut out);
        out
    }

    fn collect_paths(&self, at: usize, stack: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if self.is_runway(at) {
            out.push(stack.clone());
            return;
        }
        for &lx in &self.out_links[at] {
            let (_, to) = self.link_endpoints(lx);
            if !self.ideal_to_runway[to].is_finite() {
                continue;
            }
            stack.push(lx);
            self.collect_paths(to, stack, out);
            stack.pop();
        }
    }

    /// Waypoints reachable from `from`, including itself.
    pub fn reachable_from(&self, from: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![from];
        while let Some(u) = stack.pop() {
            if seen.insert(u) {
                for &lx in &self.out_links[u] {
                    stack.push(self.link_endpoints(lx).1);
                }
            }
        }
        seen
    }

    /// Network with one additional link, re-validated.
    pub fn with_link(&self, link: Link) -> Result<Self, NetworkError> {
        let mut links = self.links.clone();
        links.push(link);
        Self::build(self.description.clone(), self.waypoints.clone(), links)
    }

    /// Network without the link `from -> to`, re-validated.
    pub fn without_link(&self, from: WaypointId, to: WaypointId) -> Result<Self, NetworkError> {
        let links = self
            .links
            .iter()
            .filter(|l| !(l.from == from && l.to == to))
            .cloned()
            .collect();
        Self::build(self.description.clone(), self.waypoints.clone(), links)
    }

    /// Serialize back to the network file layout.
    pub fn to_json(&self) -> String {
        let file = NetworkFile {
            description: self.description.clone(),
            default_paces_s_per_nm: None,
            waypoints: self.waypoints.clone(),
            links: self
                .links
                .iter()
                .map(|l| LinkEntry {
                    from: l.from,
                    to: l.to,
                    distance_nm: l.distance_nm,
                    paces_s_per_nm: Some(l.paces_s_per_nm.clone()),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("network serializes")
    }
}

fn topological_order(
    waypoints: &[Waypoint],
    links: &[Link],
    index: &HashMap<WaypointId, usize>,
    in_links: &[Vec<usize>],
    out_links: &[Vec<usize>],
) -> Result<Vec<usize>, NetworkError> {
    let n = waypoints.len();
    let mut indegree: Vec<usize> = in_links.iter().map(Vec::len).collect();
    // Waypoints are sorted by id, so a BTreeMap keyed by index pops the lowest id.
    let mut ready: BTreeMap<usize, ()> = (0..n)
        .filter(|&i| indegree[i] == 0)
        .map(|i| (i, ()))
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some((&u, _)) = ready.iter().next() {
        ready.remove(&u);
        order.push(u);
        for &lx in &out_links[u] {
            let v = index[&links[lx].to];
            indegree[v] -= 1;
            if indegree[v] == 0 {
                ready.insert(v, ());
            }
        }
    }
    if order.len() < n {
        let stuck = (0..n)
            .find(|&i| indegree[i] > 0)
            .expect("some waypoint left");
        return Err(NetworkError::Cycle(waypoints[stuck].id));
    }
    Ok(order)
}

/// Parse and validate a network file.
pub fn load_network(source: &str) -> Result<TmaNetwork, NetworkError> {
    let file: NetworkFile =
        serde_json::from_str(source).map_err(|e| NetworkError::Parse(e.to_string()))?;
    let default = file.default_paces_s_per_nm;
    let links = file
        .links
        .into_iter()
        .map(|l| {
            let paces = l
                .paces_s_per_nm
                .or_else(|| default.clone())
                .unwrap_or_default();
            Link {
                from: l.from,
                to: l.to,
                distance_nm: l.distance_nm,
                paces_s_per_nm: paces,
            }
        })
        .collect();
    TmaNetwork::build(file.description, file.waypoints, links)
}

/// The bundled sample network file.
pub const SAMPLE_NETWORK: &str = include_str!("../../../data/sample_tma.network");

pub fn sample_network() -> TmaNetwork {
    load_network(SAMPLE_NETWORK).expect("bundled sample network is valid")
}
