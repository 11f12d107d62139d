use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mixed_mis::engine::{run_protocol, RunOptions, WinnerRule};
use mixed_mis::experiments::{load_graph, run_suite, write_outputs, SuiteConfig};
use mixed_mis::graph::{Graph, StrengthProfile};
use mixed_mis::oracle::{exact_round, DEFAULT_DEPTH_CAP};
use mixed_mis::strength::{
    check_conditions, ConditionParams, StrengthDistribution, DEFAULT_CHECK_DEPTH,
};
use mixed_mis::theory::{compute_levels, round_bound};
use mixed_mis::{Error, Result};

/// Simulator and analysis toolkit for randomized MIS with mixed-strength agents.
#[derive(Parser)]
#[command(name = "mixed-mis", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the protocol to termination and print or save the run record.
    Run(RunArgs),
    /// Evaluate the round bounds for given n, d and condition constants.
    Bound(BoundArgs),
    /// Compute agent levels at the start of the first round.
    Levels(LevelsArgs),
    /// Exact single-round probabilities for an instance with at most 8 active agents.
    Oracle(OracleArgs),
    /// Check a distribution against conditions (L) and (U).
    Conditions(ConditionsArgs),
    /// Run an experiment suite from a config file.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct InstanceArgs {
    /// Graph spec (`complete:8`, `star:7`, `path:5`, `gnp:100:0.05`,
    /// `clique_chain:16[:3]`) or an edge-list file.
    #[arg(long)]
    graph: String,
    /// Profile JSON: one distribution for all agents or an array with one per
    /// agent. Defaults to the clique chain's own profile, else fair bits.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Seed for graph generation and protocol randomness.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long = "eps-l", default_value_t = 0.25)]
    eps_lower: f64,
    #[arg(long = "eps-u", default_value_t = 0.5)]
    eps_upper: f64,
}

impl ParamArgs {
    fn params(&self) -> Result<ConditionParams> {
        ConditionParams::new(self.eps_lower, self.eps_upper)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Round cap; defaults to 64 times the expected-round bound.
    #[arg(long)]
    max_rounds: Option<u64>,
    /// `min` (default) or `max`; `max` requires fair bits everywhere.
    #[arg(long, default_value = "min")]
    winner: WinnerRule,
    /// Skip per-round level tracking.
    #[arg(long)]
    no_levels: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args)]
struct LevelsArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value_t = DEFAULT_DEPTH_CAP)]
    depth: u32,
    /// Comma-separated agents excluded from the active set.
    #[arg(long, value_delimiter = ',')]
    inactive: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConditionsArgs {
    /// Distribution JSON, e.g. `{"kind":"biased_bits","q":0.25}`.
    #[arg(long)]
    dist: String,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = DEFAULT_CHECK_DEPTH)]
    depth: u32,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
}

fn load_instance(args: &InstanceArgs) -> Result<(Graph, StrengthProfile)> {
    let (graph, generated) = load_graph(&args.graph, args.seed, Path::new("."))?;
    let profile = match &args.profile {
        Some(path) => StrengthProfile::from_json(&std::fs::read_to_string(path)?, graph.n())?,
        None => generated.unwrap_or_else(|| StrengthProfile::fair(graph.n())),
    };
    Ok((graph, profile))
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn ensure_conditions(profile: &StrengthProfile, params: &ConditionParams) -> Result<()> {
    for report in profile.check_conditions(params, DEFAULT_CHECK_DEPTH)? {
        if let Some((level, cond)) = report.first_failure() {
            return Err(Error::InvalidArgument(format!(
                "profile violates condition {cond:?} at level {level}; pass --no-levels to run anyway"
            )));
        }
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(args) => {
            let (graph, profile) = load_instance(&args.instance)?;
            let params = args.params.params()?;
            let tracked = if args.no_levels {
                None
            } else {
                ensure_conditions(&profile, &params)?;
                Some(params)
            };
            let options = RunOptions {
                max_rounds: args.max_rounds,
                winner: args.winner,
                params: tracked,
                ..RunOptions::default()
            };
            let result = run_protocol(&graph, &profile, args.instance.seed, &options)?;
            emit(&result, args.out.as_deref())?;
            Ok(if result.terminated {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Bound(args) => {
            emit(&round_bound(args.n, args.d, &args.params.params()?)?, None)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Levels(args) => {
            let (graph, profile) = load_instance(&args.instance)?;
            let params = args.params.params()?;
            ensure_conditions(&profile, &params)?;
            let report = compute_levels(&graph, &profile, &vec![true; graph.n()], &params)?;
            #[derive(Serialize)]
            struct Out {
                log_base: u32,
                d: usize,
                eq2_ceiling: f64,
                levels: mixed_mis::theory::LevelReport,
            }
            let out = Out {
                log_base: 2,
                d: graph.max_degree(),
                eq2_ceiling: mixed_mis::theory::eq2_ceiling(graph.max_degree().max(1), &params),
                levels: report,
            };
            emit(&out, args.out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle(args) => {
            let (graph, profile) = load_instance(&args.instance)?;
            let mut active = vec![true; graph.n()];
            for i in args.inactive {
                *active.get_mut(i).ok_or_else(|| {
                    Error::InvalidArgument(format!("agent {i} is not in the graph"))
                })? = false;
            }
            emit(
                &exact_round(&graph, &profile, &active, args.depth)?,
                args.out.as_deref(),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Conditions(args) => {
            let dist: StrengthDistribution = serde_json::from_str(&args.dist)?;
            let report = check_conditions(&dist, &args.params.params()?, args.depth)?;
            emit(&report, None)?;
            Ok(if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Experiment(args) => {
            if let Some(k) = args.threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build_global()
                    .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            }
            let (config, base) = SuiteConfig::load(&args.config)?;
            let report = run_suite(&config, &base)?;
            write_outputs(&report, &args.out_dir)?;
            for check in &report.checks {
                let mark = if check.passed { "PASS" } else { "FAIL" };
                eprintln!("{mark} {}: {}", check.name, check.detail);
            }
            Ok(if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
