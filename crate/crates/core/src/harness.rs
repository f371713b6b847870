//! Monte Carlo sweeps over disturbance magnitude and seed.

use crate::mpc::{run_closed_loop, MpcConfig, Planner};
use crate::scenario::Scenario;
use crate::sim::{Distribution, DisturbanceConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write;
use std::time::Instant;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSpec {
    pub xi: Vec<f64>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Planner>,
    pub mpc: MpcConfig,
    #[serde(default)]
    pub distribution: Distribution,
}

impl MonteCarloSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.seeds.is_empty() {
            return Err("no seeds".into());
        }
        if self.methods.is_empty() {
            return Err("no methods".into());
        }
        if let Some(x) = self.xi.iter().find(|x| !(0.0..1.0).contains(*x)) {
            return Err(format!("xi {x} outside [0, 1)"));
        }
        self.mpc.validate().map_err(|e| e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Feasible,
    Infeasible,
    Error,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Feasible => "feasible",
            RunStatus::Infeasible => "infeasible",
            RunStatus::Error => "error",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub method: Planner,
    pub xi: f64,
    pub seed: u64,
    pub status: RunStatus,
    pub objective: Option<f64>,
    pub wall: f64,
    pub cycles: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: Planner,
    pub xi: f64,
    pub runs: usize,
    pub feasible: usize,
    pub mean: Option<f64>,
    /// Sample variance (n - 1 denominator) over feasible runs.
    pub variance: Option<f64>,
    pub wall_p50: f64,
}

fn one_run(scn: &Scenario, spec: &MonteCarloSpec, method: Planner, xi: f64, seed: u64) -> RunRow {
    let cfg = MpcConfig {
        planner: method,
        ..spec.mpc.clone()
    };
    let dist = DisturbanceConfig {
        distribution: spec.distribution,
        ..DisturbanceConfig::uniform(xi, seed)
    };
    let t0 = Instant::now();
    let res = run_closed_loop(scn, &cfg, Some(dist));
    let wall = t0.elapsed().as_secs_f64();
    let (status, objective, cycles) = match res {
        Ok(out) => match out.metrics.objective {
            Some(j) if !out.metrics.infeasible => {
                (RunStatus::Feasible, Some(j), out.metrics.cycles.len())
            }
            _ => (RunStatus::Infeasible, None, out.metrics.cycles.len()),
        },
        Err(_) => (RunStatus::Error, None, 0),
    };
    RunRow {
        method,
        xi,
        seed,
        status,
        objective,
        wall,
        cycles,
    }
}

/// Every (method, xi, seed) combination, on a pool of `jobs` threads, sorted.
pub fn run_monte_carlo(scn: &Scenario, spec: &MonteCarloSpec, jobs: usize) -> Vec<RunRow> {
    let mut tasks = Vec::new();
    for &m in &spec.methods {
        for &xi in &spec.xi {
            for &seed in &spec.seeds {
                tasks.push((m, xi, seed));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool");
    let mut rows: Vec<RunRow> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(m, xi, seed)| one_run(scn, spec, m, xi, seed))
            .collect()
    });
    sort_rows(&mut rows);
    rows
}

pub fn sort_rows(rows: &mut [RunRow]) {
    rows.sort_by(|a, b| {
        a.method
            .as_str()
            .cmp(b.method.as_str())
            .then(a.xi.total_cmp(&b.xi))
            .then(a.seed.cmp(&b.seed))
    });
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Per (method, xi) summaries; `rows` must be sorted.
pub fn aggregate(rows: &[RunRow]) -> Vec<Aggregate> {
    let mut out = Vec::new();
    for group in rows.chunk_by(|a, b| a.method == b.method && a.xi == b.xi) {
        let js: Vec<f64> = group.iter().filter_map(|r| r.objective).collect();
        let n = js.len();
        let mean = (n > 0).then(|| js.iter().sum::<f64>() / n as f64);
        let variance = mean
            .filter(|_| n > 1)
            .map(|m| js.iter().map(|j| (j - m) * (j - m)).sum::<f64>() / (n - 1) as f64);
        out.push(Aggregate {
            method: group[0].method,
            xi: group[0].xi,
            runs: group.len(),
            feasible: n,
            mean,
            variance,
            wall_p50: median(group.iter().map(|r| r.wall).collect()),
        });
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.6}"))
}

/// With `reproducible`, timing columns are written as zero.
pub fn runs_csv(rows: &[RunRow], reproducible: bool) -> String {
    let mut s = String::from("method,xi,seed,status,J_s,wall_s,cycles\n");
    for r in rows {
        let wall = if reproducible { 0.0 } else { r.wall };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:.6},{}",
            r.method.as_str(),
            r.xi,
            r.seed,
            r.status.as_str(),
            opt(r.objective),
            wall,
            r.cycles
        );
    }
    s
}

pub fn aggregates_csv(aggs: &[Aggregate], reproducible: bool) -> String {
    let mut s = String::from("method,xi,runs,feasible_n,infeasible_n,J_mean,J_var,wall_p50\n");
    for a in aggs {
        let wall = if reproducible { 0.0 } else { a.wall_p50 };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{:.6}",
            a.method.as_str(),
            a.xi,
            a.runs,
            a.feasible,
            a.runs - a.feasible,
            opt(a.mean),
            opt(a.variance),
            wall
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(m: Planner, xi: f64, seed: u64, j: Option<f64>) -> RunRow {
        RunRow {
            method: m,
            xi,
            seed,
            status: if j.is_some() {
                RunStatus::Feasible
            } else {
                RunStatus::Infeasible
            },
            objective: j,
            wall: seed as f64,
            cycles: 1,
        }
    }

    #[test]
    fn aggregates_recompute_from_rows() {
        let mut rows = vec![
            row(Planner::Milp, 0.1, 2, Some(30.0)),
            row(Planner::Milp, 0.1, 0, Some(10.0)),
            row(Planner::Milp, 0.1, 1, None),
            row(Planner::Priority, 0.1, 0, Some(5.0)),
        ];
        sort_rows(&mut rows);
        assert_eq!(rows[0].method, Planner::Priority);
        let a = aggregate(&rows);
        assert_eq!(a.len(), 2);
        let m = &a[1];
        assert_eq!((m.runs, m.feasible), (3, 2));
        assert_eq!(m.mean, Some(20.0));
        assert_eq!(m.variance, Some(200.0));
        assert_eq!(m.wall_p50, 1.0);
        assert_eq!(a[0].variance, None);
    }

    #[test]
    fn reproducible_csv_zeroes_timing() {
        let rows = vec![row(Planner::Milp, 0.05, 7, Some(1.5))];
        let csv = runs_csv(&rows, true);
        assert_eq!(
            csv.lines().nth(1),
            Some("milp,0.05,7,feasible,1.500000,0.000000,1")
        );
    }
}
