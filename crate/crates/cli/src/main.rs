//! `tma` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 infeasible result, 3 internal error.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use tma_core::model::export_milp;
use tma_core::{
    aggregate, aggregates_csv, encode, generate_scenario, load_network, load_scenario, one_shot,
    run_closed_loop, run_monte_carlo, runs_csv, sample_network, solve, solve_priority,
    Distribution, DisturbanceConfig, HorizonProblem, MonteCarloSpec, MpcConfig, Planner,
    ReplanTrigger, Scenario, SolveLimits, SolveStatus, TmaNetwork,
};

#[derive(Parser, Debug)]
#[command(
    name = "tma",
    version,
    about = "Conflict-free routing and scheduling of terminal-area arrivals"
)]
struct Cli {
    /// Seed for generation and disturbances.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Solver time limit per solve, in seconds.
    #[arg(long = "time-limit", global = true, default_value_t = 300.0)]
    time_limit: f64,
    /// Worker threads for Monte Carlo sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Also write the big-M value of every constraint row.
    #[arg(long = "dump-bigm", global = true)]
    dump_bigm: bool,
    /// Write zero in timing columns; real timings go to timings.csv.
    #[arg(long, global = true)]
    reproducible: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Clone)]
struct Inputs {
    /// Network file; the bundled sample network when omitted.
    #[arg(long)]
    network: Option<PathBuf>,
    /// Scenario file.
    #[arg(long)]
    scenario: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct LoopArgs {
    #[arg(long = "look-ahead", default_value_t = 600.0)]
    look_ahead: f64,
    #[arg(long, default_value_t = 300.0)]
    control: f64,
    #[arg(long, value_enum, default_value_t = TriggerArg::Periodic)]
    trigger: TriggerArg,
    /// Branch-and-bound node budget per cycle.
    #[arg(long = "node-limit")]
    node_limit: Option<u64>,
    #[arg(long, value_enum, default_value_t = DistArg::Symmetric)]
    distribution: DistArg,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum TriggerArg {
    Periodic,
    OnEntry,
    Both,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum DistArg {
    Symmetric,
    Positive,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum MethodArg {
    Milp,
    Dijkstra,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum FormatArg {
    Lp,
    Mps,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Check a network and optionally a scenario.
    Validate {
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Generate a synthetic scenario (writes scenario.json).
    Gen {
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Entry times fall in [0, window] seconds.
        #[arg(long, default_value_t = 600.0)]
        window: f64,
        /// Minimum spacing between flights at the same entry.
        #[arg(long = "gap-min", default_value_t = 60.0)]
        gap_min: f64,
    },
    /// Solve a whole scenario at once (schedule.json, schedule.csv, report.json).
    Solve {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Rolling-horizon closed loop with the simulator (run.json, events.csv).
    Mpc {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        lp: LoopArgs,
        #[arg(long, value_enum, default_value_t = MethodArg::Milp)]
        method: MethodArg,
        /// Disturbance magnitude; 0 runs nominally.
        #[arg(long, default_value_t = 0.0)]
        xi: f64,
        /// Plan once over the whole scenario instead of rolling.
        #[arg(long = "one-shot")]
        one_shot: bool,
    },
    /// Priority-ordered sequential shortest-path planner.
    Baseline {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Write the mixed-integer model in LP or MPS format.
    Export {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_enum, default_value_t = FormatArg::Lp)]
        format: FormatArg,
    },
    /// Disturbance sweep (runs.csv, aggregates.csv).
    Montecarlo {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        lp: LoopArgs,
        /// Comma-separated magnitudes.
        #[arg(long, default_value = "0.05,0.1,0.15,0.2")]
        xi: String,
        /// Inclusive range `a..b`, or a comma-separated list.
        #[arg(long, default_value = "0..99")]
        seeds: String,
        #[arg(long, value_delimiter = ',', default_value = "milp,dijkstra")]
        methods: Vec<MethodArg>,
    },
}

enum Fail {
    Usage(anyhow::Error),
    Internal(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Fail {
    fn from(e: E) -> Self {
        Fail::Internal(e.into())
    }
}

trait UsageContext<T> {
    fn usage(self) -> Result<T, Fail>;
}

impl<T> UsageContext<T> for Result<T> {
    fn usage(self) -> Result<T, Fail> {
        self.map_err(Fail::Usage)
    }
}

/// Whether the run produced a feasible result.
type Outcome = Result<bool, Fail>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(Fail::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Fail::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn network(path: Option<&Path>) -> Result<Arc<TmaNetwork>> {
    Ok(Arc::new(match path {
        Some(p) => load_network(&read(p)?).with_context(|| format!("network {}", p.display()))?,
        None => sample_network(),
    }))
}

fn scenario(inputs: &Inputs) -> Result<Scenario> {
    let net = network(inputs.network.as_deref())?;
    load_scenario(&read(&inputs.scenario)?, net)
        .with_context(|| format!("scenario {}", inputs.scenario.display()))
}

fn write(cli: &Cli, name: &str, body: &str) -> Result<(), Fail> {
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let path = cli.out.join(name);
    std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn limits(cli: &Cli) -> Result<SolveLimits, Fail> {
    if !(cli.time_limit > 0.0) || !cli.time_limit.is_finite() {
        return Err(Fail::Usage(anyhow!("--time-limit must be positive")));
    }
    Ok(SolveLimits::seconds(cli.time_limit))
}

fn mpc_config(cli: &Cli, lp: &LoopArgs, method: MethodArg) -> MpcConfig {
    MpcConfig {
        look_ahead: lp.look_ahead,
        control_horizon: lp.control,
        solve_time_limit: cli.time_limit,
        node_limit: lp.node_limit,
        replan_trigger: match lp.trigger {
            TriggerArg::Periodic => ReplanTrigger::Periodic,
            TriggerArg::OnEntry => ReplanTrigger::OnEntry,
            TriggerArg::Both => ReplanTrigger::Both,
        },
        planner: planner(method),
    }
}

fn planner(m: MethodArg) -> Planner {
    match m {
        MethodArg::Milp => Planner::Milp,
        MethodArg::Dijkstra => Planner::Priority,
    }
}

fn distribution(d: DistArg) -> Distribution {
    match d {
        DistArg::Symmetric => Distribution::UniformSymmetric,
        DistArg::Positive => Distribution::UniformPositive,
    }
}

fn bigm_csv(hp: &HorizonProblem) -> Result<String> {
    let mut s = String::from("row,family,big_m\n");
    for e in hp.big_m_values()? {
        let _ = writeln!(s, "{},{},{}", e.row, e.family, e.value);
    }
    Ok(s)
}

fn timing(cli: &Cli, rows: &[(&str, f64)]) -> Result<(), Fail> {
    let mut s = String::from("what,seconds\n");
    for (k, v) in rows {
        let _ = writeln!(s, "{k},{v:.6}");
    }
    write(cli, "timings.csv", &s)
}

fn secs(cli: &Cli, t: f64) -> f64 {
    if cli.reproducible {
        0.0
    } else {
        t
    }
}

fn run(cli: &Cli) -> Outcome {
    match &cli.cmd {
        Cmd::Validate {
            network: n,
            scenario: s,
        } => {
            let net = network(n.as_deref()).usage()?;
            println!(
                "network ok: {} waypoints, {} links, {} entries, {} runways",
                net.len(),
                net.links().len(),
                net.entries().len(),
                net.runways().len()
            );
            if let Some(s) = s {
                let scn = load_scenario(&read(s).usage()?, net)
                    .with_context(|| format!("scenario {}", s.display()))
                    .usage()?;
                println!(
                    "scenario ok: {} flights over {:.0} s, default gap {} s, max holding {} s",
                    scn.flights.len(),
                    scn.span(),
                    scn.separation.default_gap,
                    scn.max_holding
                );
            }
            Ok(true)
        }
        Cmd::Gen {
            network: n,
            count,
            window,
            gap_min,
        } => {
            let net = network(n.as_deref()).usage()?;
            let scn = generate_scenario(net, *count, *window, *gap_min, cli.seed)
                .map_err(|e| Fail::Usage(e.into()))?;
            write(cli, "scenario.json", &scn.to_json())?;
            Ok(true)
        }
        Cmd::Solve { inputs } => {
            let scn = scenario(inputs).usage()?;
            let lim = limits(cli)?;
            let hp = HorizonProblem::from_scenario(&scn);
            let (sp, _) = encode(&hp).map_err(|e| Fail::Usage(e.into()))?;
            if cli.dump_bigm {
                write(cli, "bigm.csv", &bigm_csv(&hp)?)?;
            }
            let (sched, rep) = solve(&sp, &lim, None);
            let report = json!({
                "status": rep.status.as_str(),
                "objective_s": sched.as_ref().map(|s| s.objective),
                "best_bound_s": rep.best_bound,
                "nodes": rep.nodes,
                "wall_s": secs(cli, rep.wall_time),
                "flights": hp.flights.len(),
                "t_max_s": sp.t_max(),
            });
            write(cli, "report.json", &serde_json::to_string_pretty(&report)?)?;
            timing(cli, &[("solve", rep.wall_time)])?;
            match sched {
                Some(s) => {
                    write(cli, "schedule.json", &s.to_json())?;
                    write(cli, "schedule.csv", &s.to_csv())?;
                    println!("{} J = {:.6} s", rep.status.as_str(), s.objective);
                    Ok(true)
                }
                None => {
                    println!("{}", rep.status.as_str());
                    Ok(rep.status == SolveStatus::Optimal)
                }
            }
        }
        Cmd::Baseline { inputs } => {
            let scn = scenario(inputs).usage()?;
            let hp = HorizonProblem::from_scenario(&scn);
            let (sp, _) = encode(&hp).map_err(|e| Fail::Usage(e.into()))?;
            let r = solve_priority(&sp);
            let report = json!({
                "feasible": r.is_feasible(),
                "objective_s": r.is_feasible().then_some(r.schedule.objective),
                "infeasible_flights": r.infeasible_flights,
                "wall_s": secs(cli, r.wall_time),
            });
            write(cli, "report.json", &serde_json::to_string_pretty(&report)?)?;
            write(cli, "schedule.json", &r.schedule.to_json())?;
            write(cli, "schedule.csv", &r.schedule.to_csv())?;
            timing(cli, &[("baseline", r.wall_time)])?;
            if r.is_feasible() {
                println!("feasible J = {:.6} s", r.schedule.objective);
            } else {
                println!("infeasible flights: {:?}", r.infeasible_flights);
            }
            Ok(r.is_feasible())
        }
        Cmd::Export { inputs, format } => {
            let scn = scenario(inputs).usage()?;
            let hp = HorizonProblem::from_scenario(&scn);
            let (_, inst) = encode(&hp).map_err(|e| Fail::Usage(e.into()))?;
            let (fmt, name) = match format {
                FormatArg::Lp => ("lp", "model.lp"),
                FormatArg::Mps => ("mps", "model.mps"),
            };
            write(cli, name, &export_milp(&inst, fmt)?)?;
            if cli.dump_bigm {
                write(cli, "bigm.csv", &bigm_csv(&hp)?)?;
            }
            println!(
                "{} variables ({} binary), {} rows",
                inst.variables.len(),
                inst.binary_count(),
                inst.rows.len()
            );
            Ok(true)
        }
        Cmd::Mpc {
            inputs,
            lp,
            method,
            xi,
            one_shot: once,
        } => {
            let scn = scenario(inputs).usage()?;
            let lim = limits(cli)?;
            let cfg = mpc_config(cli, lp, *method);
            cfg.validate().map_err(|e| Fail::Usage(e.into()))?;
            if !(0.0..1.0).contains(xi) {
                return Err(Fail::Usage(anyhow!("--xi must be in [0, 1)")));
            }
            let dist = (*xi > 0.0).then(|| DisturbanceConfig {
                distribution: distribution(lp.distribution),
                ..DisturbanceConfig::uniform(*xi, cli.seed)
            });
            let out = if *once {
                one_shot(&scn, cfg.planner, &lim, dist)?
            } else {
                run_closed_loop(&scn, &cfg, dist)?
            };
            let m = &out.metrics;
            let cycles: Vec<_> = m
                .cycles
                .iter()
                .map(|c| {
                    json!({
                        "clock_s": c.clock,
                        "flights": c.flights,
                        "status": c.status.as_str(),
                        "planned_objective_s": c.planned_objective,
                        "solve_s": secs(cli, c.solve_time),
                        "nodes": c.nodes,
                    })
                })
                .collect();
            let summary = json!({
                "config": {
                    "mode": if *once { "one_shot" } else { "rolling" },
                    "method": cfg.planner.as_str(),
                    "look_ahead_s": cfg.look_ahead,
                    "control_horizon_s": cfg.control_horizon,
                    "replan_trigger": cfg.replan_trigger.as_str(),
                    "time_limit_s": cfg.solve_time_limit,
                    "node_limit": cfg.node_limit,
                    "xi": xi,
                    "seed": cli.seed,
                },
                "status": if m.infeasible { "infeasible" } else { "feasible" },
                "objective_s": m.objective,
                "landed": m.landed,
                "solve_s": secs(cli, m.solve_time),
                "wall_s": secs(cli, m.wall_time),
                "cycles": cycles,
            });
            write(cli, "run.json", &serde_json::to_string_pretty(&summary)?)?;
            write(cli, "events.csv", &out.simulator.events_csv())?;
            timing(cli, &[("solve", m.solve_time), ("wall", m.wall_time)])?;
            match m.objective {
                Some(j) => println!("feasible J = {j:.6} s over {} cycles", m.cycles.len()),
                None => println!("infeasible after {} cycles", m.cycles.len()),
            }
            Ok(!m.infeasible)
        }
        Cmd::Montecarlo {
            inputs,
            lp,
            xi,
            seeds,
            methods,
        } => {
            let scn = scenario(inputs).usage()?;
            let xi = parse_list(xi).usage()?;
            let seeds = parse_seeds(seeds).usage()?;
            let spec = MonteCarloSpec {
                xi,
                seeds,
                methods: methods.iter().map(|&m| planner(m)).collect(),
                mpc: mpc_config(cli, lp, MethodArg::Milp),
                distribution: distribution(lp.distribution),
            };
            spec.validate().map_err(|e| Fail::Usage(anyhow!(e)))?;
            let rows = run_monte_carlo(&scn, &spec, cli.jobs);
            let aggs = aggregate(&rows);
            write(cli, "runs.csv", &runs_csv(&rows, cli.reproducible))?;
            write(
                cli,
                "aggregates.csv",
                &aggregates_csv(&aggs, cli.reproducible),
            )?;
            if cli.reproducible {
                write(cli, "timings.csv", &runs_csv(&rows, false))?;
            }
            for a in &aggs {
                println!(
                    "{} xi={} feasible {}/{}",
                    a.method.as_str(),
                    a.xi,
                    a.feasible,
                    a.runs
                );
            }
            Ok(true)
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .with_context(|| format!("bad number {x:?}"))
        })
        .collect()
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = s.split_once("..") {
        let b = b.trim_start_matches('=');
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        if b < a {
            bail!("empty seed range {s}");
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<u64>()
                .with_context(|| format!("bad seed {x:?}"))
        })
        .collect()
}
