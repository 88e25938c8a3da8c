//! Command-line front end for the mixmat design toolkit.
//!
//! Subcommands: `design {solve,ramanujan,greedy}`, `sweep`, `simulate`,
//! `validate`. Every run writes its outputs plus a manifest describing the
//! command line, resolved configuration, seeds, input digests and output
//! paths. All randomness flows from `--seed` (default 0, never entropy), so
//! identical invocations produce byte-identical designs and traces; only the
//! manifest timestamp field differs.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 method-reported failure
//! (greedy disconnection, exhausted Ramanujan draws, failed validation).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use mixmat::bilevel::{self, ConvergenceModel, SweepConfig, SweepMethod};
use mixmat::cost::CostModel;
use mixmat::dpsgd::{self, SimConfig};
use mixmat::ramanujan::{degree_budget, ramanujan_mixing, RegularGraphSpec};
use mixmat::solver::{solve_min_rho, SolverConfig};
use mixmat::sparsifier::{greedy_sparsify, GreedyFailure};
use mixmat::spectral::{validate_rho_bounds, MixingDesign, MixingDistribution};
use mixmat::topology::{ParseDefaults, Topology};

#[derive(Parser)]
#[command(name = "mixmat", version, about = "Mixing-matrix design for energy-budgeted decentralized learning", disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Produce a mixing design and write it as JSON.
    Design {
        #[command(subcommand)]
        method: DesignCommand,
    },
    /// Sweep per-node budgets and rank them by budget * K(rho).
    Sweep(SweepArgs),
    /// Simulate decentralized SGD with a design on a synthetic task.
    Simulate(SimulateArgs),
    /// Check the spectral bounds behind rho for a design or mixture.
    Validate(ValidateArgs),
}

#[derive(Subcommand)]
enum DesignCommand {
    /// Unconstrained spectral-norm minimization over the link weights.
    Solve(SolveArgs),
    /// Weight-1/d random Ramanujan graph over a complete base.
    Ramanujan(RamanujanArgs),
    /// Greedy budget sparsification of the solved weights.
    Greedy(GreedyArgs),
}

/// Where the base topology comes from: an edge-list file or a generated
/// complete graph on `--m` nodes.
#[derive(Args)]
struct TopologyArgs {
    /// Edge-list topology file.
    #[arg(long, value_name = "FILE", conflicts_with = "m")]
    topology: Option<PathBuf>,
    /// Use a complete base topology on this many nodes instead of a file.
    #[arg(long, value_name = "NODES")]
    m: Option<usize>,
    /// Per-node computation energy (Wh/iteration) used when the topology
    /// does not specify one.
    #[arg(long, default_value_t = 0.0003342)]
    comp_wh: f64,
    /// Per-link per-endpoint communication energy (Wh/iteration) used when
    /// the topology does not specify one.
    #[arg(long, default_value_t = 0.0138)]
    comm_wh: f64,
}

impl TopologyArgs {
    fn load(&self) -> anyhow::Result<(Arc<Topology>, Vec<PathBuf>)> {
        let defaults = ParseDefaults {
            comm: self.comm_wh,
            comp: self.comp_wh,
        };
        match (&self.topology, self.m) {
            (Some(path), None) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let t = Topology::parse_with(&text, &defaults)?;
                Ok((Arc::new(t), vec![path.clone()]))
            }
            (None, Some(m)) => {
                let t = Topology::complete(m, self.comp_wh, self.comm_wh)?;
                Ok((Arc::new(t), vec![]))
            }
            _ => bail!("exactly one of --topology or --m is required"),
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    topology: TopologyArgs,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "FILE", default_value = "design.json")]
    out: PathBuf,
}

#[derive(Args)]
struct RamanujanArgs {
    #[command(flatten)]
    topology: TopologyArgs,
    /// Regular degree of the expander. Mutually exclusive with --budget.
    #[arg(long, conflicts_with = "budget")]
    d: Option<usize>,
    /// Derive the degree from a per-node budget (Wh/iteration) instead.
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    max_attempts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "FILE", default_value = "design.json")]
    out: PathBuf,
}

#[derive(Args)]
struct GreedyArgs {
    #[command(flatten)]
    topology: TopologyArgs,
    /// Per-node budget in Wh per iteration.
    #[arg(long)]
    budget: f64,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "FILE", default_value = "design.json")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    topology: TopologyArgs,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Explicit comma-separated ascending budgets (Wh). Defaults to a
    /// log-spaced grid from one affordable link to full activation.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Number of points for the default grid.
    #[arg(long, default_value_t = 20)]
    grid_points: usize,
    /// Iteration-count model: target accuracy.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Iteration-count model: leading constant.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for the grid rows (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, value_name = "FILE", default_value = "sweep.csv")]
    out: PathBuf,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum MethodArg {
    Greedy,
    Ramanujan,
}

#[derive(Args)]
struct SimulateArgs {
    /// Design JSON produced by `design`.
    #[arg(long, value_name = "FILE")]
    design: PathBuf,
    #[arg(long)]
    eta: f64,
    #[arg(long)]
    iters: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    record_every: usize,
    /// Synthetic task: parameter dimension.
    #[arg(long, default_value_t = 20)]
    dim: usize,
    /// Synthetic task: samples per node.
    #[arg(long, default_value_t = 64)]
    n_per_node: usize,
    /// Synthetic task: spread of the per-node optima.
    #[arg(long, default_value_t = 1.0)]
    heterogeneity: f64,
    /// Synthetic task: target noise level.
    #[arg(long, default_value_t = 0.0)]
    noise_std: f64,
    #[arg(long, default_value_t = 0.0003342)]
    comp_wh: f64,
    #[arg(long, default_value_t = 0.0138)]
    comm_wh: f64,
    #[arg(long, value_name = "FILE", default_value = "trace.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// Design JSON; repeat the flag for a mixture.
    #[arg(long, value_name = "FILE", required = true)]
    design: Vec<PathBuf>,
    /// Probabilities for the designs (default: uniform).
    #[arg(long, value_delimiter = ',')]
    probs: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Method-reported failure: the tool ran fine but the method could not
/// deliver (exit code 2).
#[derive(Debug)]
struct MethodFailure(String);

impl std::fmt::Display for MethodFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for MethodFailure {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are not errors.
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if e.downcast_ref::<MethodFailure>().is_some() {
                eprintln!("failure: {e}");
                ExitCode::from(2)
            } else {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Design { method } => match method {
            DesignCommand::Solve(args) => cmd_solve(args),
            DesignCommand::Ramanujan(args) => cmd_ramanujan(args),
            DesignCommand::Greedy(args) => cmd_greedy(args),
        },
        Command::Sweep(args) => cmd_sweep(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Validate(args) => cmd_validate(args),
    }
}

fn cmd_solve(args: SolveArgs) -> anyhow::Result<()> {
    let (topology, inputs) = args.topology.load()?;
    let cfg = SolverConfig {
        max_iterations: args.max_iters,
        tolerance: args.tol,
        rng_seed: args.seed,
        ..Default::default()
    };
    let solved = solve_min_rho(&topology, &[], &cfg)?;
    let design = MixingDesign::new(topology.clone(), solved.alpha.clone())?;
    let cost = CostModel::from_topology(&topology);
    let node_costs = cost.node_costs(&topology, design.alpha())?;

    let mut json = design.to_json();
    json["solver"] = serde_json::json!({
        "rho_tilde": solved.rho_tilde,
        "iterations": solved.iterations,
        "converged": solved.converged,
    });
    json["node_costs_wh"] = serde_json::json!(node_costs);
    write_output(&args.out, &pretty(&json))?;
    write_manifest(
        &args.out,
        serde_json::json!({
            "command": "design solve",
            "max_iters": args.max_iters,
            "tol": args.tol,
        }),
        args.seed,
        &inputs,
    )?;
    println!(
        "solve: rho_tilde = {:.6} in {} iterations -> {}",
        solved.rho_tilde,
        solved.iterations,
        args.out.display()
    );
    Ok(())
}

fn cmd_ramanujan(args: RamanujanArgs) -> anyhow::Result<()> {
    let (topology, inputs) = args.topology.load()?;
    let cost = CostModel::from_topology(&topology);
    let d = match (args.d, args.budget) {
        (Some(d), None) => d,
        (None, Some(budget)) => degree_budget(&topology, &cost, budget)?,
        _ => bail!("exactly one of --d or --budget is required"),
    };
    let spec = RegularGraphSpec::new(topology.node_count(), d, args.seed)?
        .with_max_attempts(args.max_attempts);
    let design = ramanujan_mixing(&spec).map_err(|e| match e {
        mixmat::Error::AttemptsExhausted { .. } => anyhow!(MethodFailure(e.to_string())),
        other => anyhow!(other),
    })?;
    let node_costs = cost.node_costs(design.topology(), design.alpha())?;
    let bound = 4.0 * (d as f64 - 1.0) / (d as f64 * d as f64);

    let mut json = design.to_json();
    json["ramanujan"] = serde_json::json!({
        "degree": d,
        "rho_bound": bound,
    });
    json["node_costs_wh"] = serde_json::json!(node_costs);
    write_output(&args.out, &pretty(&json))?;
    write_manifest(
        &args.out,
        serde_json::json!({
            "command": "design ramanujan",
            "degree": d,
            "max_attempts": args.max_attempts,
        }),
        args.seed,
        &inputs,
    )?;
    println!(
        "ramanujan: d = {d}, rho = {:.6} (bound {:.6}) -> {}",
        design.rho(),
        bound,
        args.out.display()
    );
    Ok(())
}

fn cmd_greedy(args: GreedyArgs) -> anyhow::Result<()> {
    let (topology, inputs) = args.topology.load()?;
    let cost = CostModel::from_topology(&topology);
    let cfg = SolverConfig {
        max_iterations: args.max_iters,
        tolerance: args.tol,
        rng_seed: args.seed,
        ..Default::default()
    };
    let outcome = greedy_sparsify(&topology, &cost, args.budget, &cfg)?;
    let removals: Vec<serde_json::Value> = outcome
        .removals
        .iter()
        .map(|r| {
            serde_json::json!({
                "u": r.link.u,
                "v": r.link.v,
                "weight_magnitude": r.weight_magnitude,
            })
        })
        .collect();

    match &outcome.design {
        Some(design) => {
            let mut json = design.to_json();
            json["greedy"] = serde_json::json!({
                "budget_wh": args.budget,
                "removals": removals,
                "solves": outcome.solves,
            });
            json["node_costs_wh"] = serde_json::json!(outcome.node_costs);
            write_output(&args.out, &pretty(&json))?;
            write_manifest(
                &args.out,
                serde_json::json!({
                    "command": "design greedy",
                    "budget_wh": args.budget,
                }),
                args.seed,
                &inputs,
            )?;
            println!(
                "greedy: {} removals, rho = {:.6}, max node cost {:.6} Wh -> {}",
                outcome.removals.len(),
                design.rho(),
                mixmat::cost::max_node_cost(&outcome.node_costs),
                args.out.display()
            );
            Ok(())
        }
        None => {
            let reason = match outcome.failure {
                Some(GreedyFailure::Disconnection) => "disconnection",
                Some(GreedyFailure::BudgetUnreachable) => "budget-unreachable",
                None => "unknown",
            };
            let json = serde_json::json!({
                "failure": reason,
                "budget_wh": args.budget,
                "removals": removals,
            });
            write_output(&args.out, &pretty(&json))?;
            Err(anyhow!(MethodFailure(format!(
                "greedy could not satisfy budget {} Wh: {reason}",
                args.budget
            ))))
        }
    }
}

fn cmd_sweep(args: SweepArgs) -> anyhow::Result<()> {
    if args.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(args.jobs)
            .build_global()
            .context("configuring worker threads")?;
    }
    let (topology, inputs) = args.topology.load()?;
    let cost = CostModel::from_topology(&topology);
    let grid = match &args.grid {
        Some(g) => g.clone(),
        None => bilevel::default_grid(&topology, &cost, args.grid_points)?,
    };
    let method = match args.method {
        MethodArg::Greedy => SweepMethod::Greedy,
        MethodArg::Ramanujan => SweepMethod::Ramanujan,
    };
    let cm = ConvergenceModel {
        epsilon: args.epsilon,
        scale: args.scale,
        ..Default::default()
    };
    let cfg = SweepConfig {
        method,
        seed: args.seed,
        ..Default::default()
    };
    let result = bilevel::sweep(&topology, &cost, &cm, &grid, &cfg)?;

    let mut csv = String::new();
    let ramanujan = matches!(method, SweepMethod::Ramanujan);
    csv.push_str("delta_wh,rho,K,product,feasible,max_node_cost_wh,links_active");
    if ramanujan {
        csv.push_str(",degree");
    }
    csv.push('\n');
    for row in &result.rows {
        let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}",
            row.budget,
            fmt_opt(row.rho),
            fmt_opt(row.iterations),
            fmt_opt(row.product),
            row.feasible,
            fmt_opt(row.max_node_cost),
            row.links_active,
        ));
        if ramanujan {
            csv.push(',');
            if let Some(d) = row.degree {
                csv.push_str(&d.to_string());
            }
        }
        csv.push('\n');
    }
    write_output(&args.out, &csv)?;
    write_manifest(
        &args.out,
        serde_json::json!({
            "command": "sweep",
            "method": format!("{method:?}"),
            "grid": grid,
            "epsilon": args.epsilon,
            "scale": args.scale,
            "jobs": args.jobs,
        }),
        args.seed,
        &inputs,
    )?;
    match result.best_row() {
        Some(best) => println!(
            "sweep: best budget {:.6} Wh with product {:.3} -> {}",
            best.budget,
            best.product.unwrap_or(f64::NAN),
            args.out.display()
        ),
        None => println!(
            "sweep: no feasible budget in the grid -> {}",
            args.out.display()
        ),
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&args.design)
        .with_context(|| format!("reading {}", args.design.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text).context("parsing design JSON")?;
    let design = MixingDesign::from_json(&value)?;
    if design.rho() >= 1.0 {
        eprintln!(
            "warning: design has rho = {} >= 1; no convergence guarantee, proceeding anyway",
            design.rho()
        );
    }
    let topology = design.topology().clone();
    let cost = CostModel::uniform(&topology, args.comp_wh, args.comm_wh)?;
    let task = dpsgd::make_quadratic_task(
        topology.node_count(),
        args.dim,
        args.n_per_node,
        args.heterogeneity,
        args.noise_std,
        args.seed,
    )?;
    let mixing = MixingDistribution::deterministic(design);
    let cfg = SimConfig {
        eta: args.eta,
        iterations: args.iters,
        batch: args.batch,
        seed: args.seed,
        record_every: args.record_every,
    };
    let trace = dpsgd::run_dpsgd(&task, &mixing, &cost, &cfg)?;
    write_output(&args.out, &trace.to_csv())?;
    write_manifest(
        &args.out,
        serde_json::json!({
            "command": "simulate",
            "eta": args.eta,
            "iters": args.iters,
            "batch": args.batch,
            "record_every": args.record_every,
            "dim": args.dim,
            "n_per_node": args.n_per_node,
            "heterogeneity": args.heterogeneity,
            "noise_std": args.noise_std,
        }),
        args.seed,
        std::slice::from_ref(&args.design),
    )?;
    let last = trace.iterations() - 1;
    println!(
        "simulate: {} iterations, final loss {:.6e}, max node energy {:.6} Wh -> {}",
        trace.iterations(),
        trace.loss[last],
        trace.max_cum_energy[last],
        args.out.display()
    );
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> anyhow::Result<()> {
    let mut designs = Vec::new();
    for path in &args.design {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).context("parsing design JSON")?;
        designs.push(MixingDesign::from_json(&value)?);
    }
    let probs = match &args.probs {
        Some(p) => {
            if p.len() != designs.len() {
                bail!("{} probabilities for {} designs", p.len(), designs.len());
            }
            p.clone()
        }
        None => vec![1.0 / designs.len() as f64; designs.len()],
    };
    let dist = MixingDistribution::new(designs.into_iter().zip(probs).collect())?;
    let report = validate_rho_bounds(&dist, args.trials, args.seed)?;
    println!("{}", pretty(&serde_json::to_value(&report)?));
    if report.passed() {
        Ok(())
    } else {
        Err(anyhow!(MethodFailure(
            "rho bound validation failed".to_string()
        )))
    }
}

fn pretty(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn write_output(path: &Path, content: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

/// Manifest sits next to the output file. Everything in it is reproducible
/// except the timestamp, which lives in its own field.
fn write_manifest(
    out: &Path,
    resolved: serde_json::Value,
    seed: u64,
    inputs: &[PathBuf],
) -> anyhow::Result<()> {
    let mut digests = serde_json::Map::new();
    for path in inputs {
        let bytes = std::fs::read(path)?;
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        let hex: String = hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        digests.insert(path.display().to_string(), serde_json::Value::String(hex));
    }
    let manifest = serde_json::json!({
        "command_line": std::env::args().collect::<Vec<_>>(),
        "resolved": resolved,
        "seed": seed,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "input_digests": digests,
        "outputs": [out.display().to_string()],
        "timestamp_unix_ms": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0),
    });
    let manifest_path = manifest_path_for(out);
    write_output(&manifest_path, &pretty(&manifest))
}

fn manifest_path_for(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}
