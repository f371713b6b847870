//! Incremental earliest-time propagation over difference constraints.
//!
//! Constraints have the form `t[b] >= t[a] + w`; every variable also has a
//! lower and an upper bound. The least solution is maintained under edge
//! insertion and restored on backtracking through a trail.

use std::collections::VecDeque;

const EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Mark {
    edges: usize,
    trail: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct TemporalNetwork {
    ub: Vec<f64>,
    val: Vec<f64>,
    out: Vec<Vec<(u32, f64)>>,
    inc: Vec<Vec<(u32, f64)>>,
    edge_log: Vec<(u32, u32)>,
    trail: Vec<(u32, f64)>,
    queue: VecDeque<u32>,
    queued: Vec<bool>,
    updates: Vec<u32>,
    touched: Vec<u32>,
}

impl TemporalNetwork {
    pub fn new(lb: Vec<f64>, ub: Vec<f64>) -> Self {
        let n = lb.len();
        debug_assert_eq!(n, ub.len());
        TemporalNetwork {
            ub,
            val: lb,
            out: vec![Vec::new(); n],
            inc: vec![Vec::new(); n],
            edge_log: Vec::new(),
            trail: Vec::new(),
            queue: VecDeque::new(),
            queued: vec![false; n],
            updates: vec![0; n],
            touched: Vec::new(),
        }
    }

    #[inline]
    pub fn value(&self, v: usize) -> f64 {
        self.val[v]
    }

    pub fn mark(&self) -> Mark {
        Mark {
            edges: self.edge_log.len(),
            trail: self.trail.len(),
        }
    }

    pub fn undo(&mut self, m: Mark) {
        while self.edge_log.len() > m.edges {
            let (a, b) = self.edge_log.pop().unwrap();
            self.out[a as usize].pop();
            self.inc[b as usize].pop();
        }
        while self.trail.len() > m.trail {
            let (v, old) = self.trail.pop().unwrap();
            self.val[v as usize] = old;
        }
    }

    /// Add `t[b] >= t[a] + w` without propagating.
    pub fn push_edge(&mut self, a: usize, b: usize, w: f64) {
        self.out[a].push((b as u32, w));
        self.inc[b].push((a as u32, w));
        self.edge_log.push((a as u32, b as u32));
        if self.val[a] + w > self.val[b] + EPS && !self.queued[a] {
            self.queued[a] = true;
            self.queue.push_back(a as u32);
        }
    }

    /// Restore the least solution after [`push_edge`] calls. Returns false
    /// when an upper bound is exceeded or a positive cycle exists; the caller
    /// must then undo to an earlier mark.
    pub fn propagate(&mut self) -> bool {
        let limit = self.val.len() as u32 + 1;
        let mut ok = true;
        'outer: while let Some(a) = self.queue.pop_front() {
            let a = a as usize;
            self.queued[a] = false;
            let base = self.val[a];
            for i in 0..self.out[a].len() {
                let (b, w) = self.out[a][i];
                let b = b as usize;
                let cand = base + w;
                if cand > self.val[b] + EPS {
                    if cand > self.ub[b] + EPS {
                        ok = false;
                        break 'outer;
                    }
                    self.trail.push((b as u32, self.val[b]));
                    self.val[b] = cand;
                    if !self.queued[b] {
                        if self.updates[b] == 0 {
                            self.touched.push(b as u32);
                        }
                        self.updates[b] += 1;
                        if self.updates[b] > limit {
                            ok = false;
                            break 'outer;
                        }
                        self.queued[b] = true;
                        self.queue.push_back(b as u32);
                    }
                }
            }
        }
        for v in self.queue.drain(..) {
            self.queued[v as usize] = false;
        }
        for v in self.touched.drain(..) {
            self.updates[v as usize] = 0;
        }
        ok
    }

    /// Greatest solution under the static upper bounds, written into `hi`.
    /// Only meaningful after a successful [`propagate`].
    pub fn upper_bounds(
        &self,
        hi: &mut Vec<f64>,
        queue: &mut VecDeque<u32>,
        queued: &mut Vec<bool>,
    ) {
        let n = self.val.len();
        hi.clear();
        hi.extend_from_slice(&self.ub);
        queued.clear();
        queued.resize(n, true);
        queue.clear();
        queue.extend(0..n as u32);
        while let Some(b) = queue.pop_front() {
            let b = b as usize;
            queued[b] = false;
            let top = hi[b];
            for &(a, w) in &self.inc[b] {
                let a = a as usize;
                let cand = top - w;
                if cand < hi[a] - EPS {
                    hi[a] = cand;
                    if !queued[a] {
                        queued[a] = true;
                        queue.push_back(a as u32);
                    }
                }
            }
        }
    }

    #[cfg(test)]
    pub fn add_edge(&mut self, a: usize, b: usize, w: f64) -> bool {
        self.push_edge(a, b, w);
        self.propagate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn least_solution_of_chain() {
        let mut tn = TemporalNetwork::new(vec![0.0, 5.0, 0.0], vec![100.0; 3]);
        assert!(tn.add_edge(0, 1, 3.0));
        assert_eq!(tn.value(1), 5.0);
        assert!(tn.add_edge(1, 2, 10.0));
        assert_eq!(tn.value(2), 15.0);
        let m = tn.mark();
        assert!(tn.add_edge(0, 1, 13.0));
        assert_eq!(tn.value(1), 13.0);
        assert_eq!(tn.value(2), 23.0);
        tn.undo(m);
        assert_eq!(tn.value(1), 5.0);
        assert_eq!(tn.value(2), 15.0);
    }

    #[test]
    fn detects_positive_cycle_and_bounds() {
        let mut tn = TemporalNetwork::new(vec![0.0; 2], vec![1e9; 2]);
        assert!(tn.add_edge(0, 1, 1.0));
        let m = tn.mark();
        assert!(!tn.add_edge(1, 0, 1.0));
        tn.undo(m);
        assert_eq!(tn.value(0), 0.0);
        assert_eq!(tn.value(1), 1.0);

        let mut tn = TemporalNetwork::new(vec![0.0; 2], vec![10.0, 10.0]);
        assert!(!tn.add_edge(0, 1, 11.0));
    }

    #[test]
    fn upper_bounds_follow_edges_backwards() {
        let mut tn = TemporalNetwork::new(vec![0.0; 3], vec![100.0, 100.0, 30.0]);
        assert!(tn.add_edge(0, 1, 5.0));
        assert!(tn.add_edge(1, 2, 10.0));
        let (mut hi, mut q, mut qd) = (Vec::new(), VecDeque::new(), Vec::new());
        tn.upper_bounds(&mut hi, &mut q, &mut qd);
        assert_eq!(hi, vec![15.0, 20.0, 30.0]);
    }

    #[test]
    fn zero_cycles_are_fine() {
        let mut tn = TemporalNetwork::new(vec![2.0, 0.0], vec![50.0; 2]);
        assert!(tn.add_edge(0, 1, 4.0));
        assert!(tn.add_edge(1, 0, -4.0));
        assert_eq!(tn.value(0), 2.0);
        assert_eq!(tn.value(1), 6.0);
    }

    proptest::proptest! {
        #[test]
        fn matches_bellman_ford(edges in proptest::collection::vec((0usize..6, 0usize..6, -20.0f64..20.0), 0..14)) {
            let n = 6;
            let mut tn = TemporalNetwork::new(vec![0.0; n], vec![1e6; n]);
            for &(a, b, w) in &edges {
                tn.push_edge(a, b, w);
            }
            let ok = tn.propagate();
            let mut d = vec![0.0f64; n];
            let mut changed = true;
            let mut rounds = 0;
            while changed && rounds <= n + 1 {
                changed = false;
                rounds += 1;
                for &(a, b, w) in &edges {
                    if d[a] + w > d[b] + 1e-9 {
                        d[b] = d[a] + w;
                        changed = true;
                    }
                }
            }
            proptest::prop_assert_eq!(ok, !changed);
            if ok {
                for v in 0..n {
                    proptest::prop_assert!((tn.value(v) - d[v]).abs() < 1e-6);
                }
            }
        }
    }
}
