//! Experiment harness: convergence sweep, clique-chain slowdown, elimination
//! floor, oracle cross-check and the strong/weak star examples.
//!
//! Every random choice is derived from the configured master seed, runs are
//! evaluated in parallel and collected in seed order, so outputs are
//! byte-identical across runs and thread counts.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{
    default_max_rounds, run_protocol_with, sample_round, ProtocolState, RunOptions, RunResult,
    Status, WinnerRule, DEFAULT_BIT_BUDGET,
};
use crate::error::{Error, Result};
use crate::graph::{self, CliqueChainSpec, Graph, GraphKind, StrengthProfile};
use crate::oracle::{exact_round, DEFAULT_DEPTH_CAP};
use crate::rng::derive_seed;
use crate::stats::{self, LinearFit, Z_99_ONE_SIDED};
use crate::strength::{ConditionParams, StrengthDistribution, DEFAULT_CHECK_DEPTH};
use crate::theory::{self, check_elimination_floor, closed_neighborhood_ceiling, eq2_ceiling};

pub const SCHEMA_VERSION: u32 = 1;

/// Smallest seed count accepted for statistical experiments.
pub const MIN_SEEDS: u64 = 30;

const STREAM_SWEEP: u64 = 1;
const STREAM_SLOWDOWN: u64 = 2;
const STREAM_ELIMINATION: u64 = 3;
const STREAM_ORACLE: u64 = 4;
const STREAM_CONTROL: u64 = 5;

/// How a profile is assigned to the agents of an instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileSpec {
    Fair,
    Uniform {
        distribution: StrengthDistribution,
    },
    /// Each agent gets `BiasedBits(q)` with `q` uniform in `[low, high]`.
    UniformBiased {
        low: f64,
        high: f64,
    },
    PerAgent {
        distributions: Vec<StrengthDistribution>,
    },
    /// The profile produced by the graph generator (clique chains).
    Generator,
    /// A profile file, relative to the config file.
    File {
        path: PathBuf,
    },
}

impl ProfileSpec {
    pub fn build(
        &self,
        n: usize,
        generated: Option<&StrengthProfile>,
        seed: u64,
        base_dir: &Path,
    ) -> Result<StrengthProfile> {
        let profile = match self {
            ProfileSpec::Fair => StrengthProfile::fair(n),
            ProfileSpec::Uniform { distribution } => {
                StrengthProfile::uniform(n, distribution.clone())
            }
            ProfileSpec::UniformBiased { low, high } => {
                StrengthProfile::uniform_biased(n, *low, *high, seed)?
            }
            ProfileSpec::PerAgent { distributions } => {
                StrengthProfile::from_distributions(distributions.clone())
            }
            ProfileSpec::Generator => generated.cloned().ok_or_else(|| {
                Error::Experiment("profile `generator` needs a clique chain graph".into())
            })?,
            ProfileSpec::File { path } => {
                StrengthProfile::from_json(&std::fs::read_to_string(base_dir.join(path))?, n)?
            }
        };
        if profile.len() != n {
            return Err(Error::ProfileMismatch {
                profile: profile.len(),
                graph: n,
            });
        }
        Ok(profile)
    }

    fn label(&self) -> String {
        match self {
            ProfileSpec::Fair => "fair".into(),
            ProfileSpec::Uniform { distribution } => {
                format!("uniform_{}", distribution.kind_name())
            }
            ProfileSpec::UniformBiased { low, high } => format!("uniform_biased[{low},{high}]"),
            ProfileSpec::PerAgent { .. } => "per_agent".into(),
            ProfileSpec::Generator => "generator".into(),
            ProfileSpec::File { path } => format!("file:{}", path.display()),
        }
    }
}

/// Graph spec string (see [`GraphKind`]'s `FromStr`) or an edge-list file.
pub fn load_graph(
    spec: &str,
    seed: u64,
    base_dir: &Path,
) -> Result<(Graph, Option<StrengthProfile>)> {
    match spec.parse::<GraphKind>() {
        Ok(kind) => graph::generate(&kind, seed),
        Err(parse_err) => {
            let path = base_dir.join(spec);
            if path.is_file() {
                Ok((
                    Graph::parse_edge_list(&std::fs::read_to_string(path)?)?,
                    None,
                ))
            } else {
                Err(parse_err)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    #[serde(default)]
    pub label: Option<String>,
    pub graph: String,
    pub profile: ProfileSpec,
    /// Agents excluded from the active set.
    #[serde(default)]
    pub inactive: Vec<usize>,
}

struct Instance {
    label: String,
    graph: Graph,
    profile: StrengthProfile,
    active: Vec<bool>,
}

impl InstanceSpec {
    fn resolve(&self, seed: u64, base_dir: &Path) -> Result<Instance> {
        let (graph, generated) = load_graph(&self.graph, seed, base_dir)?;
        let profile = self
            .profile
            .build(graph.n(), generated.as_ref(), seed, base_dir)?;
        let mut active = vec![true; graph.n()];
        for &i in &self.inactive {
            *active.get_mut(i).ok_or_else(|| {
                Error::Experiment(format!("inactive agent {i} is outside `{}`", self.graph))
            })? = false;
        }
        Ok(Instance {
            label: self
                .label
                .clone()
                .unwrap_or_else(|| format!("{} {}", self.graph, self.profile.label())),
            graph,
            profile,
            active,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SweepFamily {
    /// `G(n, avg_degree/n)` with per-agent biases uniform in `[low, high]`.
    GnpBiased { low: f64, high: f64 },
    /// `G(n, avg_degree/n)` with fair bits.
    GnpFair,
    /// `num_cliques` cliques of `n / num_cliques` agents with the chain schedule.
    CliqueChain { num_cliques: usize },
}

impl SweepFamily {
    fn name(&self) -> &'static str {
        match self {
            SweepFamily::GnpBiased { .. } => "gnp_biased",
            SweepFamily::GnpFair => "gnp_fair",
            SweepFamily::CliqueChain { .. } => "clique_chain",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub sizes: Vec<usize>,
    pub avg_degree: f64,
    pub families: Vec<SweepFamily>,
    pub seeds: u64,
    /// Lower bound required of the fair family's mean per-round fraction of
    /// active edges eliminated.
    pub fair_active_fraction_min: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlowdownConfig {
    pub clique_size: usize,
    pub num_cliques: Vec<usize>,
    /// Clique count used for the pattern and control comparisons.
    pub primary_cliques: usize,
    pub seeds: u64,
    pub pattern_rate_min: f64,
    pub first_round_rate_min: f64,
    pub max_fraction_slack: f64,
    pub max_fraction_rate_min: f64,
    /// Required ratio of chain to control mean per-round fraction.
    pub control_ratio_max: f64,
    #[serde(default)]
    pub bias_schedule: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EliminationConfig {
    pub trials: u64,
    pub instances: Vec<InstanceSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrosscheckConfig {
    pub rounds: u64,
    #[serde(default = "default_depth")]
    pub depth_cap: u32,
    pub sigma: f64,
    pub residual_max: f64,
    pub instances: Vec<InstanceSpec>,
}

fn default_depth() -> u32 {
    DEFAULT_DEPTH_CAP
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodConfig {
    pub degrees: Vec<usize>,
    pub strong: f64,
    pub weak: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub master_seed: u64,
    pub params: ConditionParams,
    #[serde(default)]
    pub convergence_sweep: Option<SweepConfig>,
    #[serde(default)]
    pub cliquechain_slowdown: Option<SlowdownConfig>,
    #[serde(default)]
    pub elimination_floor: Option<EliminationConfig>,
    #[serde(default)]
    pub oracle_crosscheck: Option<CrosscheckConfig>,
    #[serde(default)]
    pub neighborhood_examples: Option<NeighborhoodConfig>,
}

impl SuiteConfig {
    /// Reads and validates a config file. Relative paths inside it resolve
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let config: SuiteConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.validate(&base)?;
        Ok((config, base))
    }

    pub fn validate(&self, base_dir: &Path) -> Result<()> {
        let bad = |m: String| Err(Error::Experiment(m));
        if let Some(c) = &self.convergence_sweep {
            if c.seeds < MIN_SEEDS {
                return bad(format!(
                    "convergence_sweep needs at least {MIN_SEEDS} seeds"
                ));
            }
            if c.sizes.iter().any(|&n| n < 2) || c.families.is_empty() {
                return bad("convergence_sweep needs sizes >= 2 and at least one family".into());
            }
        }
        if let Some(c) = &self.cliquechain_slowdown {
            if c.seeds < MIN_SEEDS {
                return bad(format!(
                    "cliquechain_slowdown needs at least {MIN_SEEDS} seeds"
                ));
            }
            if !c.num_cliques.contains(&c.primary_cliques) {
                return bad("primary_cliques must be one of num_cliques".into());
            }
        }
        let files = |instances: &[InstanceSpec]| -> Result<()> {
            for inst in instances {
                if inst.graph.parse::<GraphKind>().is_err() && !base_dir.join(&inst.graph).is_file()
                {
                    return bad(format!(
                        "graph `{}` is neither a spec nor a file",
                        inst.graph
                    ));
                }
                if let ProfileSpec::File { path } = &inst.profile {
                    if !base_dir.join(path).is_file() {
                        return bad(format!("profile file `{}` does not exist", path.display()));
                    }
                }
            }
            Ok(())
        };
        if let Some(c) = &self.elimination_floor {
            if c.trials < theory::MIN_ELIMINATION_TRIALS {
                return bad(format!(
                    "elimination_floor needs at least {} trials",
                    theory::MIN_ELIMINATION_TRIALS
                ));
            }
            files(&c.instances)?;
        }
        if let Some(c) = &self.oracle_crosscheck {
            if c.rounds < MIN_SEEDS {
                return bad(format!(
                    "oracle_crosscheck needs at least {MIN_SEEDS} rounds"
                ));
            }
            files(&c.instances)?;
        }
        Ok(())
    }
}

fn ensure_conditions(
    profile: &StrengthProfile,
    params: &ConditionParams,
    what: &str,
) -> Result<()> {
    for report in profile.check_conditions(params, DEFAULT_CHECK_DEPTH)? {
        if let Some((level, cond)) = report.first_failure() {
            return Err(Error::Experiment(format!(
                "{what}: profile violates condition {cond:?} at level {level}"
            )));
        }
    }
    Ok(())
}

/// One observed `l_max` above the ceiling.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CeilingViolation {
    pub experiment: String,
    pub instance: String,
    pub seed: Option<u64>,
    pub round: u64,
    pub l_max: u32,
    pub d: usize,
    pub ceiling: f64,
}

/// Observed `l_max` of every simulated round against the level ceiling.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CeilingAudit {
    pub rounds_checked: u64,
    pub violations: u64,
    /// Violations of the closed-neighborhood ceiling.
    pub closed_violations: u64,
    pub worst_excess: f64,
    /// First few violations, in experiment order.
    pub examples: Vec<CeilingViolation>,
}

const AUDIT_EXAMPLES: usize = 10;

impl CeilingAudit {
    #[allow(clippy::too_many_arguments)]
    fn observe(
        &mut self,
        experiment: &str,
        instance: &str,
        seed: Option<u64>,
        round: u64,
        l_max: Option<u32>,
        d: usize,
        params: &ConditionParams,
    ) {
        let Some(l) = l_max else { return };
        self.rounds_checked += 1;
        let d = d.max(1);
        let ceiling = eq2_ceiling(d, params);
        if f64::from(l) > ceiling {
            self.violations += 1;
            self.worst_excess = self.worst_excess.max(f64::from(l) - ceiling);
            if self.examples.len() < AUDIT_EXAMPLES {
                self.examples.push(CeilingViolation {
                    experiment: experiment.into(),
                    instance: instance.into(),
                    seed,
                    round,
                    l_max: l,
                    d,
                    ceiling,
                });
            }
        }
        if f64::from(l) > closed_neighborhood_ceiling(d, params) {
            self.closed_violations += 1;
        }
    }

    fn merge(&mut self, other: CeilingAudit) {
        self.rounds_checked += other.rounds_checked;
        self.violations += other.violations;
        self.closed_violations += other.closed_violations;
        self.worst_excess = self.worst_excess.max(other.worst_excess);
        for e in other.examples {
            if self.examples.len() < AUDIT_EXAMPLES {
                self.examples.push(e);
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// `l_max` by active set, shared by all runs on one graph.
struct LevelCache<'a> {
    graph: &'a Graph,
    profile: &'a StrengthProfile,
    params: &'a ConditionParams,
    memo: Mutex<HashMap<Vec<u64>, Option<u32>>>,
}

impl<'a> LevelCache<'a> {
    fn new(graph: &'a Graph, profile: &'a StrengthProfile, params: &'a ConditionParams) -> Self {
        LevelCache {
            graph,
            profile,
            params,
            memo: Mutex::new(HashMap::new()),
        }
    }

    fn l_max(&self, active: &[bool]) -> Result<Option<u32>> {
        let mut key = vec![0u64; active.len().div_ceil(64)];
        for (i, _) in active.iter().enumerate().filter(|(_, a)| **a) {
            key[i / 64] |= 1 << (i % 64);
        }
        if let Some(v) = self.memo.lock().expect("level cache poisoned").get(&key) {
            return Ok(*v);
        }
        let v = theory::compute_levels(self.graph, self.profile, active, self.params)?.l_max;
        self.memo
            .lock()
            .expect("level cache poisoned")
            .insert(key, v);
        Ok(v)
    }
}

/// A run together with `l_max` at the start of each of its rounds.
struct TrackedRun {
    result: RunResult,
    l_max: Vec<Option<u32>>,
}

impl TrackedRun {
    /// Per-round edges eliminated, over rounds that started with an active edge.
    fn eliminated(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.result
            .rounds
            .iter()
            .filter(|r| r.active_edges_before > 0)
            .map(|r| {
                (
                    r.active_edges_before - r.active_edges_after,
                    r.active_edges_before,
                )
            })
    }

    fn mean_total_fraction(&self, edges: usize) -> f64 {
        let f: Vec<f64> = self
            .eliminated()
            .map(|(e, _)| e as f64 / edges as f64)
            .collect();
        if f.is_empty() {
            0.0
        } else {
            stats::mean(&f)
        }
    }

    fn active_fractions(&self) -> Vec<f64> {
        self.eliminated()
            .map(|(e, before)| e as f64 / before as f64)
            .collect()
    }

    fn max_total_fraction(&self, edges: usize) -> f64 {
        self.eliminated()
            .map(|(e, _)| e as f64 / edges as f64)
            .fold(0.0, f64::max)
    }
}

/// Runs the protocol to termination, recording levels through `cache` and
/// calling `inspect(before, after)` for every round.
fn run_tracked<F>(
    graph: &Graph,
    profile: &StrengthProfile,
    seed: u64,
    params: &ConditionParams,
    cache: &LevelCache,
    mut inspect: F,
) -> Result<TrackedRun>
where
    F: FnMut(&ProtocolState, &ProtocolState),
{
    let options = RunOptions {
        max_rounds: Some(default_max_rounds(graph, Some(params))),
        ..RunOptions::default()
    };
    let mut l_max = vec![cache.l_max(&vec![true; graph.n()])?];
    let mut prev = ProtocolState::new(graph.n());
    let mut failure = None;
    let result = run_protocol_with(graph, profile, seed, &options, |state, _| {
        inspect(&prev, state);
        prev = state.clone();
        if state.active_count() > 0 && failure.is_none() {
            match cache.l_max(&state.active_mask()) {
                Ok(l) => l_max.push(l),
                Err(e) => failure = Some(e),
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    if !result.terminated {
        return Err(Error::Experiment(format!(
            "run with seed {seed} did not terminate within {} rounds",
            result.total_rounds
        )));
    }
    Ok(TrackedRun { result, l_max })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRunRow {
    pub schema_version: u32,
    pub family: String,
    pub n: usize,
    pub seed_index: u64,
    pub run_seed: u64,
    pub d: usize,
    pub edges: usize,
    pub rounds: u64,
    pub mean_total_fraction: f64,
    pub mean_active_fraction: f64,
    pub max_l_max: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepCellRow {
    pub schema_version: u32,
    pub family: String,
    pub n: usize,
    pub seeds: u64,
    pub cell_seed: u64,
    pub d_min: usize,
    pub d_max: usize,
    pub mean_rounds: f64,
    pub sd_rounds: f64,
    pub upper99_rounds: f64,
    pub p95_rounds: f64,
    /// Evaluated at `d_min`, the most demanding degree among the seeds.
    pub eq0_bound: f64,
    pub within_bound: bool,
    pub mean_total_fraction: f64,
    pub mean_active_fraction: f64,
    pub min_active_fraction: f64,
    pub max_l_max: Option<u32>,
    pub eq2_ceiling_at_d_max: f64,
    pub eq2_violations: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyFit {
    pub family: String,
    /// Rounds regressed on `log2(n) * log2(d)` over all runs of the family.
    pub fit: Option<LinearFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub cells: Vec<SweepCellRow>,
    pub fits: Vec<FamilyFit>,
    pub ceiling: CeilingAudit,
    #[serde(skip)]
    pub runs: Vec<SweepRunRow>,
}

/// Runs every `(family, n)` cell over `seeds` seeds.
pub fn convergence_sweep(
    config: &SweepConfig,
    params: &ConditionParams,
    master_seed: u64,
) -> Result<SweepResult> {
    let stream = derive_seed(master_seed, STREAM_SWEEP);
    let mut cells = Vec::new();
    let mut runs = Vec::new();
    let mut ceiling = CeilingAudit::default();
    let mut cell_index = 0;
    for family in &config.families {
        for &n in &config.sizes {
            let cell_seed = derive_seed(stream, cell_index);
            cell_index += 1;
            let (cell, cell_runs, audit) = sweep_cell(family, n, config, params, cell_seed)?;
            cells.push(cell);
            runs.extend(cell_runs);
            ceiling.merge(audit);
        }
    }
    let fits = config
        .families
        .iter()
        .map(|family| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = runs
                .iter()
                .filter(|r| r.family == family.name())
                .map(|r| {
                    (
                        (r.n as f64).log2() * (r.d.max(1) as f64).log2(),
                        r.rounds as f64,
                    )
                })
                .unzip();
            FamilyFit {
                family: family.name().into(),
                fit: stats::linear_fit(&xs, &ys),
            }
        })
        .collect();
    Ok(SweepResult {
        cells,
        fits,
        ceiling,
        runs,
    })
}

fn sweep_cell(
    family: &SweepFamily,
    n: usize,
    config: &SweepConfig,
    params: &ConditionParams,
    cell_seed: u64,
) -> Result<(SweepCellRow, Vec<SweepRunRow>, CeilingAudit)> {
    let label = format!("{}:{n}", family.name());
    let p = (config.avg_degree / n as f64).min(1.0);
    let shared = match family {
        SweepFamily::CliqueChain { num_cliques } => {
            let spec = CliqueChainSpec::with_cliques(n / num_cliques, *num_cliques);
            let (g, profile) = graph::generate(&GraphKind::CliqueChain(spec), cell_seed)?;
            let profile = profile.expect("clique chains carry a profile");
            ensure_conditions(&profile, params, &label)?;
            Some((g, profile))
        }
        _ => None,
    };
    let shared_cache = shared
        .as_ref()
        .map(|(g, prof)| LevelCache::new(g, prof, params));

    let outcomes: Vec<(SweepRunRow, Vec<Option<u32>>, usize)> = (0..config.seeds)
        .into_par_iter()
        .map(|s| {
            let graph_seed = derive_seed(cell_seed, 3 * s);
            let profile_seed = derive_seed(cell_seed, 3 * s + 1);
            let run_seed = derive_seed(cell_seed, 3 * s + 2);
            let owned;
            let (g, profile) = match (&shared, family) {
                (Some((g, prof)), _) => (g, prof.clone()),
                (None, SweepFamily::GnpBiased { low, high }) => {
                    owned = graph::gnp(n, p, graph_seed)?;
                    let prof = StrengthProfile::uniform_biased(n, *low, *high, profile_seed)?;
                    ensure_conditions(&prof, params, &label)?;
                    (&owned, prof)
                }
                (None, _) => {
                    owned = graph::gnp(n, p, graph_seed)?;
                    (&owned, StrengthProfile::fair(n))
                }
            };
            let local_cache;
            let cache = match &shared_cache {
                Some(c) => c,
                None => {
                    local_cache = LevelCache::new(g, &profile, params);
                    &local_cache
                }
            };
            let run =
                run_tracked(g, &profile, run_seed, params, cache, |_, _| {}).map_err(|e| {
                    Error::Experiment(format!("{label} seed index {s} (seed {run_seed}): {e}"))
                })?;
            let active = run.active_fractions();
            let row = SweepRunRow {
                schema_version: SCHEMA_VERSION,
                family: family.name().into(),
                n,
                seed_index: s,
                run_seed,
                d: g.max_degree(),
                edges: g.edge_count(),
                rounds: run.result.total_rounds,
                mean_total_fraction: run.mean_total_fraction(g.edge_count().max(1)),
                mean_active_fraction: if active.is_empty() {
                    1.0
                } else {
                    stats::mean(&active)
                },
                max_l_max: run.l_max.iter().flatten().copied().max(),
            };
            Ok((row, run.l_max, g.max_degree()))
        })
        .collect::<Result<_>>()?;

    let mut audit = CeilingAudit::default();
    for (row, levels, d) in &outcomes {
        for (r, l) in levels.iter().enumerate() {
            audit.observe(
                "convergence_sweep",
                &label,
                Some(row.run_seed),
                r as u64 + 1,
                *l,
                *d,
                params,
            );
        }
    }
    let rows: Vec<SweepRunRow> = outcomes.into_iter().map(|(r, _, _)| r).collect();
    let rounds: Vec<f64> = rows.iter().map(|r| r.rounds as f64).collect();
    let d_min = rows.iter().map(|r| r.d).min().unwrap_or(0);
    let d_max = rows.iter().map(|r| r.d).max().unwrap_or(0);
    let eq0 = theory::round_bound(n.max(2), d_min.max(1), params)?.eq0_bound;
    let upper = stats::mean_upper_bound(&rounds, Z_99_ONE_SIDED);
    let active: Vec<f64> = rows.iter().map(|r| r.mean_active_fraction).collect();
    let cell = SweepCellRow {
        schema_version: SCHEMA_VERSION,
        family: family.name().into(),
        n,
        seeds: config.seeds,
        cell_seed,
        d_min,
        d_max,
        mean_rounds: stats::mean(&rounds),
        sd_rounds: stats::sample_sd(&rounds),
        upper99_rounds: upper,
        p95_rounds: stats::percentile(&rounds, 0.95),
        eq0_bound: eq0,
        within_bound: upper <= eq0,
        mean_total_fraction: stats::mean(
            &rows
                .iter()
                .map(|r| r.mean_total_fraction)
                .collect::<Vec<_>>(),
        ),
        mean_active_fraction: stats::mean(&active),
        min_active_fraction: active.iter().copied().fold(f64::INFINITY, f64::min),
        max_l_max: rows.iter().filter_map(|r| r.max_l_max).max(),
        eq2_ceiling_at_d_max: eq2_ceiling(d_max.max(1), params),
        eq2_violations: audit.violations,
    };
    Ok((cell, rows, audit))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlowdownRoundRow {
    pub schema_version: u32,
    pub num_cliques: usize,
    pub clique_size: usize,
    pub seed_index: u64,
    pub run_seed: u64,
    pub round: u64,
    pub edges_eliminated: usize,
    pub fraction_of_total: f64,
    pub active_edges_after: usize,
    /// 1-based cliques with an agent joining this round, `;`-separated.
    pub joined_cliques: String,
    /// 1-based cliques with no active agent after this round.
    pub inactive_cliques: String,
    pub l_max: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlowdownSummary {
    pub num_cliques: usize,
    pub clique_size: usize,
    pub n: usize,
    pub edges: usize,
    pub biases: Vec<f64>,
    pub seeds: u64,
    pub mean_rounds: f64,
    /// `(sqrt(log2 clique_size) + 1) / 2`.
    pub predicted_rounds: f64,
    /// Per-run mean of the per-round fraction of all edges eliminated,
    /// averaged over seeds.
    pub mean_fraction: f64,
    pub mean_max_fraction: f64,
    pub pattern_rate: f64,
    pub first_round_rate: f64,
    /// Share of seeds whose largest per-round fraction is at most
    /// `2/(num_cliques-1) + slack`.
    pub max_fraction_rate: f64,
    pub max_fraction_limit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ControlSummary {
    pub n: usize,
    pub p: f64,
    pub mean_edges: f64,
    pub seeds: u64,
    pub mean_rounds: f64,
    pub mean_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlowdownReport {
    pub chains: Vec<SlowdownSummary>,
    pub primary_cliques: usize,
    pub control: ControlSummary,
    pub pattern_ok: bool,
    pub first_round_ok: bool,
    pub max_fraction_ok: bool,
    pub control_ok: bool,
    pub trend_ok: bool,
    pub ceiling: CeilingAudit,
    #[serde(skip)]
    pub rows: Vec<SlowdownRoundRow>,
}

fn clique_list(cliques: impl IntoIterator<Item = usize>) -> String {
    cliques
        .into_iter()
        .map(|c| (c + 1).to_string())
        .collect::<Vec<_>>()
        .join(";")
}

struct ChainRun {
    rows: Vec<SlowdownRoundRow>,
    l_max: Vec<Option<u32>>,
    rounds: u64,
    mean_fraction: f64,
    max_fraction: f64,
    pattern: bool,
    first_round: bool,
}

fn chain_run(
    spec: &CliqueChainSpec,
    g: &Graph,
    profile: &StrengthProfile,
    params: &ConditionParams,
    cache: &LevelCache,
    seed_index: u64,
    run_seed: u64,
) -> Result<ChainRun> {
    let s = spec.clique_size;
    let k = spec.num_cliques;
    // per round: cliques with a joiner, cliques fully inactive, cliques fully active
    let mut per_round: Vec<(BTreeSet<usize>, Vec<bool>, Vec<bool>)> = Vec::new();
    let run = run_tracked(g, profile, run_seed, params, cache, |before, after| {
        let mut joined = BTreeSet::new();
        let mut active_count = vec![0usize; k];
        for i in 0..g.n() {
            if before.status()[i] == Status::Active && after.status()[i] == Status::InMis {
                joined.insert(spec.clique_of(i));
            }
            if after.status()[i] == Status::Active {
                active_count[spec.clique_of(i)] += 1;
            }
        }
        per_round.push((
            joined,
            active_count.iter().map(|&c| c == 0).collect(),
            active_count.iter().map(|&c| c == s).collect(),
        ));
    })?;
    let edges = g.edge_count();
    let rows = run
        .result
        .rounds
        .iter()
        .zip(&per_round)
        .map(|(stats, (joined, inactive, _))| SlowdownRoundRow {
            schema_version: SCHEMA_VERSION,
            num_cliques: k,
            clique_size: s,
            seed_index,
            run_seed,
            round: stats.round,
            edges_eliminated: stats.active_edges_before - stats.active_edges_after,
            fraction_of_total: (stats.active_edges_before - stats.active_edges_after) as f64
                / edges as f64,
            active_edges_after: stats.active_edges_after,
            joined_cliques: clique_list(joined.iter().copied()),
            inactive_cliques: clique_list((0..k).filter(|&c| inactive[c])),
            l_max: run.l_max.get(stats.round as usize - 1).copied().flatten(),
        })
        .collect();
    let pattern = (1..=k / 2).all(|r| {
        per_round
            .get(r - 1)
            .is_some_and(|(joined, inactive, full)| {
                let front = 2 * (r - 1);
                joined.iter().eq([front].iter())
                    && (0..k).all(|c| if c < 2 * r { inactive[c] } else { full[c] })
            })
    });
    let first_round = per_round
        .first()
        .is_some_and(|(joined, _, _)| joined.contains(&0) && !joined.contains(&1));
    Ok(ChainRun {
        rows,
        rounds: run.result.total_rounds,
        mean_fraction: run.mean_total_fraction(edges),
        max_fraction: run.max_total_fraction(edges),
        l_max: run.l_max,
        pattern,
        first_round,
    })
}

/// Clique-chain slowdown: per-round eliminated fraction, front-pair pattern,
/// and comparison with a fair-bits `G(n, p)` control of matching edge count.
pub fn cliquechain_slowdown(
    config: &SlowdownConfig,
    params: &ConditionParams,
    master_seed: u64,
) -> Result<SlowdownReport> {
    let stream = derive_seed(master_seed, STREAM_SLOWDOWN);
    let mut chains = Vec::new();
    let mut rows = Vec::new();
    let mut ceiling = CeilingAudit::default();
    let mut primary_edges = 0;
    for &k in &config.num_cliques {
        let spec = CliqueChainSpec {
            clique_size: config.clique_size,
            num_cliques: k,
            bias_schedule: config.bias_schedule.clone(),
        };
        let label = format!("clique_chain:{}:{k}", config.clique_size);
        let g = graph::clique_chain(&spec)?;
        let profile = spec.profile()?;
        ensure_conditions(&profile, params, &label)?;
        let cache = LevelCache::new(&g, &profile, params);
        let chain_seed = derive_seed(stream, k as u64);
        let runs: Vec<ChainRun> = (0..config.seeds)
            .into_par_iter()
            .map(|s| {
                chain_run(
                    &spec,
                    &g,
                    &profile,
                    params,
                    &cache,
                    s,
                    derive_seed(chain_seed, s),
                )
            })
            .collect::<Result<_>>()?;
        for (s, run) in runs.iter().enumerate() {
            for (r, l) in run.l_max.iter().enumerate() {
                ceiling.observe(
                    "cliquechain_slowdown",
                    &label,
                    Some(derive_seed(chain_seed, s as u64)),
                    r as u64 + 1,
                    *l,
                    g.max_degree(),
                    params,
                );
            }
        }
        let seeds = config.seeds as f64;
        let limit = 2.0 / (k.saturating_sub(1).max(1)) as f64 + config.max_fraction_slack;
        if k == config.primary_cliques {
            primary_edges = g.edge_count();
        }
        chains.push(SlowdownSummary {
            num_cliques: k,
            clique_size: config.clique_size,
            n: g.n(),
            edges: g.edge_count(),
            biases: spec.biases()?,
            seeds: config.seeds,
            mean_rounds: runs.iter().map(|r| r.rounds as f64).sum::<f64>() / seeds,
            predicted_rounds: ((config.clique_size as f64).log2().sqrt() + 1.0) / 2.0,
            mean_fraction: runs.iter().map(|r| r.mean_fraction).sum::<f64>() / seeds,
            mean_max_fraction: runs.iter().map(|r| r.max_fraction).sum::<f64>() / seeds,
            pattern_rate: runs.iter().filter(|r| r.pattern).count() as f64 / seeds,
            first_round_rate: runs.iter().filter(|r| r.first_round).count() as f64 / seeds,
            max_fraction_rate: runs.iter().filter(|r| r.max_fraction <= limit).count() as f64
                / seeds,
            max_fraction_limit: limit,
        });
        rows.extend(runs.into_iter().flat_map(|r| r.rows));
    }

    let n = config.clique_size * config.primary_cliques;
    let pairs = (n * (n - 1) / 2) as f64;
    let p = primary_edges as f64 / pairs;
    let control_seed = derive_seed(master_seed, STREAM_CONTROL);
    let control_runs: Vec<(usize, u64, f64, Vec<Option<u32>>, usize)> = (0..config.seeds)
        .into_par_iter()
        .map(|s| {
            let g = graph::gnp(n, p, derive_seed(control_seed, 2 * s))?;
            let profile = StrengthProfile::fair(n);
            let cache = LevelCache::new(&g, &profile, params);
            let run = run_tracked(
                &g,
                &profile,
                derive_seed(control_seed, 2 * s + 1),
                params,
                &cache,
                |_, _| {},
            )?;
            Ok((
                g.edge_count(),
                run.result.total_rounds,
                run.mean_total_fraction(g.edge_count().max(1)),
                run.l_max,
                g.max_degree(),
            ))
        })
        .collect::<Result<_>>()?;
    for (s, run) in control_runs.iter().enumerate() {
        for (r, l) in run.3.iter().enumerate() {
            ceiling.observe(
                "cliquechain_slowdown_control",
                &format!("gnp:{n}:{p}"),
                Some(derive_seed(control_seed, 2 * s as u64 + 1)),
                r as u64 + 1,
                *l,
                run.4,
                params,
            );
        }
    }
    let seeds = config.seeds as f64;
    let control = ControlSummary {
        n,
        p,
        mean_edges: control_runs.iter().map(|r| r.0 as f64).sum::<f64>() / seeds,
        seeds: config.seeds,
        mean_rounds: control_runs.iter().map(|r| r.1 as f64).sum::<f64>() / seeds,
        mean_fraction: control_runs.iter().map(|r| r.2).sum::<f64>() / seeds,
    };

    let primary = chains
        .iter()
        .find(|c| c.num_cliques == config.primary_cliques)
        .expect("primary clique count is configured");
    let mut by_k: Vec<&SlowdownSummary> = chains.iter().collect();
    by_k.sort_by_key(|c| c.num_cliques);
    Ok(SlowdownReport {
        pattern_ok: primary.pattern_rate >= config.pattern_rate_min,
        first_round_ok: primary.first_round_rate >= config.first_round_rate_min,
        max_fraction_ok: primary.max_fraction_rate >= config.max_fraction_rate_min,
        control_ok: primary.mean_fraction <= config.control_ratio_max * control.mean_fraction,
        trend_ok: by_k
            .windows(2)
            .all(|w| w[1].mean_fraction < w[0].mean_fraction),
        primary_cliques: config.primary_cliques,
        chains,
        control,
        ceiling,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EliminationRow {
    pub schema_version: u32,
    pub instance: usize,
    pub label: String,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub l_max: Option<u32>,
    pub agent: usize,
    pub trials: u64,
    pub eliminated: u64,
    pub frequency: f64,
    pub lower99: f64,
    pub floor: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EliminationSummary {
    pub instances: usize,
    pub agents_checked: usize,
    pub agents_failed: usize,
    pub min_lower_bound: f64,
    pub floor: f64,
    pub passed: bool,
    pub ceiling: CeilingAudit,
    #[serde(skip)]
    pub rows: Vec<EliminationRow>,
}

pub fn elimination_floor(
    config: &EliminationConfig,
    params: &ConditionParams,
    master_seed: u64,
    base_dir: &Path,
) -> Result<EliminationSummary> {
    let stream = derive_seed(master_seed, STREAM_ELIMINATION);
    let mut rows = Vec::new();
    let mut ceiling = CeilingAudit::default();
    for (idx, spec) in config.instances.iter().enumerate() {
        let seed = derive_seed(stream, idx as u64);
        let inst = spec.resolve(seed, base_dir)?;
        ensure_conditions(&inst.profile, params, &inst.label)?;
        let report = check_elimination_floor(
            &inst.graph,
            &inst.profile,
            &inst.active,
            params,
            config.trials,
            seed,
        )?;
        ceiling.observe(
            "elimination_floor",
            &inst.label,
            Some(seed),
            1,
            report.l_max,
            inst.graph.max_degree(),
            params,
        );
        for a in report.agents {
            rows.push(EliminationRow {
                schema_version: SCHEMA_VERSION,
                instance: idx,
                label: inst.label.clone(),
                n: inst.graph.n(),
                d: inst.graph.max_degree(),
                seed,
                l_max: report.l_max,
                agent: a.agent,
                trials: config.trials,
                eliminated: a.eliminated,
                frequency: a.frequency,
                lower99: a.lower_bound,
                floor: report.floor,
                passed: a.passed,
            });
        }
    }
    let failed = rows.iter().filter(|r| !r.passed).count();
    Ok(EliminationSummary {
        instances: config.instances.len(),
        agents_checked: rows.len(),
        agents_failed: failed,
        min_lower_bound: rows.iter().map(|r| r.lower99).fold(f64::INFINITY, f64::min),
        floor: params.eps_lower() / 8.0,
        passed: failed == 0,
        ceiling,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrosscheckRow {
    pub schema_version: u32,
    pub instance: usize,
    pub label: String,
    pub agent: usize,
    pub quantity: String,
    pub exact: f64,
    pub frequency: f64,
    pub sigma: f64,
    pub deviation_sigmas: f64,
    pub passed: bool,
    pub residual_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrosscheckSummary {
    pub instances: usize,
    pub comparisons: usize,
    pub failures: usize,
    pub max_deviation_sigmas: f64,
    pub max_residual_error: f64,
    pub passed: bool,
    pub ceiling: CeilingAudit,
    #[serde(skip)]
    pub rows: Vec<CrosscheckRow>,
}

/// Engine Monte Carlo frequencies against exact single-round probabilities.
pub fn oracle_crosscheck(
    config: &CrosscheckConfig,
    params: &ConditionParams,
    master_seed: u64,
    base_dir: &Path,
) -> Result<CrosscheckSummary> {
    let stream = derive_seed(master_seed, STREAM_ORACLE);
    let mut rows = Vec::new();
    let mut ceiling = CeilingAudit::default();
    let mut max_residual: f64 = 0.0;
    for (idx, spec) in config.instances.iter().enumerate() {
        let seed = derive_seed(stream, idx as u64);
        let inst = spec.resolve(seed, base_dir)?;
        ensure_conditions(&inst.profile, params, &inst.label)?;
        let levels = theory::compute_levels(&inst.graph, &inst.profile, &inst.active, params)?;
        ceiling.observe(
            "oracle_crosscheck",
            &inst.label,
            Some(seed),
            1,
            levels.l_max,
            inst.graph.max_degree(),
            params,
        );
        let exact = exact_round(&inst.graph, &inst.profile, &inst.active, config.depth_cap)?;
        max_residual = max_residual.max(exact.residual_error);
        let n = inst.graph.n();
        let counts = (0..config.rounds)
            .into_par_iter()
            .try_fold(
                || (vec![0u64; n], vec![0u64; n]),
                |(mut j, mut e), t| {
                    let out = sample_round(
                        &inst.graph,
                        &inst.profile,
                        &inst.active,
                        derive_seed(seed, t),
                        0,
                        WinnerRule::Min,
                        DEFAULT_BIT_BUDGET,
                    )?;
                    for i in 0..n {
                        j[i] += u64::from(out.joined[i]);
                        e[i] += u64::from(out.eliminated[i]);
                    }
                    Ok::<_, Error>((j, e))
                },
            )
            .try_reduce(
                || (vec![0u64; n], vec![0u64; n]),
                |(mut j1, mut e1), (j2, e2)| {
                    for i in 0..n {
                        j1[i] += j2[i];
                        e1[i] += e2[i];
                    }
                    Ok((j1, e1))
                },
            )?;
        for &agent in &exact.agents {
            for (quantity, p, count) in [
                ("join", exact.join[agent], counts.0[agent]),
                ("eliminate", exact.eliminate[agent], counts.1[agent]),
            ] {
                let frequency = count as f64 / config.rounds as f64;
                let sigma = stats::binomial_sigma(p.clamp(0.0, 1.0), config.rounds);
                let diff = (frequency - p).abs();
                let tolerance = config.sigma * sigma + exact.residual_error;
                rows.push(CrosscheckRow {
                    schema_version: SCHEMA_VERSION,
                    instance: idx,
                    label: inst.label.clone(),
                    agent,
                    quantity: quantity.into(),
                    exact: p,
                    frequency,
                    sigma,
                    deviation_sigmas: if sigma > 0.0 { diff / sigma } else { 0.0 },
                    passed: diff <= tolerance,
                    residual_error: exact.residual_error,
                });
            }
        }
    }
    let failures = rows.iter().filter(|r| !r.passed).count();
    Ok(CrosscheckSummary {
        instances: config.instances.len(),
        comparisons: rows.len(),
        failures,
        max_deviation_sigmas: rows.iter().map(|r| r.deviation_sigmas).fold(0.0, f64::max),
        max_residual_error: max_residual,
        passed: failures == 0 && max_residual <= config.residual_max,
        ceiling,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NeighborhoodRow {
    pub schema_version: u32,
    pub case: String,
    pub d: usize,
    pub center_q: f64,
    pub leaf_q: f64,
    pub center_join: f64,
    pub approximation: String,
    pub approximation_value: f64,
    pub ratio: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NeighborhoodSummary {
    pub rows: Vec<NeighborhoodRow>,
    pub passed: bool,
}

/// Center-join probability of a star with `d` leaves for the four
/// strong/weak combinations, against `1/d`, `1/d^2`, `1/sqrt(d)` and `1/d`.
pub fn neighborhood_examples(
    config: &NeighborhoodConfig,
    params: &ConditionParams,
) -> Result<NeighborhoodSummary> {
    let (strong, weak) = (config.strong, config.weak);
    let mut rows = Vec::new();
    for &d in &config.degrees {
        let df = d as f64;
        let cases = [
            ("strong_among_strong", strong, strong, "1/d", 1.0 / df),
            ("weak_among_strong", weak, strong, "1/d^2", 1.0 / (df * df)),
            (
                "strong_among_weak",
                strong,
                weak,
                "1/sqrt(d)",
                1.0 / df.sqrt(),
            ),
            ("weak_among_weak", weak, weak, "1/d", 1.0 / df),
        ];
        for (case, qc, ql, approx, value) in cases {
            let mut dists = vec![StrengthDistribution::biased_bits(qc)?];
            dists.extend(std::iter::repeat_n(
                StrengthDistribution::biased_bits(ql)?,
                d,
            ));
            let profile = StrengthProfile::from_distributions(dists);
            ensure_conditions(&profile, params, case)?;
            let exact = exact_round(
                &graph::star(d),
                &profile,
                &vec![true; d + 1],
                DEFAULT_DEPTH_CAP,
            )?;
            let ratio = exact.join[0] / value;
            rows.push(NeighborhoodRow {
                schema_version: SCHEMA_VERSION,
                case: case.into(),
                d,
                center_q: qc,
                leaf_q: ql,
                center_join: exact.join[0],
                approximation: approx.into(),
                approximation_value: value,
                ratio,
                passed: (config.ratio_min..=config.ratio_max).contains(&ratio),
            });
        }
    }
    Ok(NeighborhoodSummary {
        passed: rows.iter().all(|r| r.passed),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub log_base: u32,
    pub master_seed: u64,
    pub seed_derivation: String,
    pub params: ConditionParams,
    pub convergence_sweep: Option<SweepResult>,
    pub cliquechain_slowdown: Option<SlowdownReport>,
    pub elimination_floor: Option<EliminationSummary>,
    pub oracle_crosscheck: Option<CrosscheckSummary>,
    pub neighborhood_examples: Option<NeighborhoodSummary>,
    /// Level ceiling over every simulated round of every experiment.
    pub level_ceiling: CeilingAudit,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl SuiteReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn run_suite(config: &SuiteConfig, base_dir: &Path) -> Result<SuiteReport> {
    let params = &config.params;
    let seed = config.master_seed;
    let mut checks = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        checks.push(Check {
            name: name.into(),
            passed,
            detail,
        })
    };
    let mut ceiling = CeilingAudit::default();

    let sweep = match &config.convergence_sweep {
        Some(c) => {
            let r = convergence_sweep(c, params, seed)?;
            let bad: Vec<String> = r
                .cells
                .iter()
                .filter(|c| !c.within_bound)
                .map(|c| format!("{}:{}", c.family, c.n))
                .collect();
            let worst = r
                .cells
                .iter()
                .map(|c| c.upper99_rounds / c.eq0_bound)
                .fold(0.0, f64::max);
            push(
                "sweep_eq0_bound",
                bad.is_empty(),
                format!(
                    "{} cells, worst upper99/bound = {worst:.4}, failing: {bad:?}",
                    r.cells.len()
                ),
            );
            let fair: Vec<&SweepCellRow> =
                r.cells.iter().filter(|c| c.family == "gnp_fair").collect();
            if !fair.is_empty() {
                let lowest = fair
                    .iter()
                    .map(|c| c.mean_active_fraction)
                    .fold(f64::INFINITY, f64::min);
                push(
                    "sweep_fair_active_fraction",
                    lowest >= c.fair_active_fraction_min,
                    format!(
                        "lowest cell mean active-edge fraction {lowest:.4} vs {}",
                        c.fair_active_fraction_min
                    ),
                );
            }
            let gnp_fits: Vec<&FamilyFit> = r
                .fits
                .iter()
                .filter(|f| f.family.starts_with("gnp"))
                .collect();
            if !gnp_fits.is_empty() {
                push(
                    "sweep_slope_positive",
                    gnp_fits
                        .iter()
                        .all(|f| f.fit.is_some_and(|fit| fit.slope > 0.0)),
                    format!(
                        "{:?}",
                        r.fits
                            .iter()
                            .map(|f| (&f.family, f.fit.map(|x| (x.slope, x.r_squared))))
                            .collect::<Vec<_>>()
                    ),
                );
            }
            ceiling.merge(r.ceiling.clone());
            Some(r)
        }
        None => None,
    };

    let slowdown = match &config.cliquechain_slowdown {
        Some(c) => {
            let r = cliquechain_slowdown(c, params, seed)?;
            let p = r
                .chains
                .iter()
                .find(|x| x.num_cliques == r.primary_cliques)
                .expect("primary");
            push(
                "slowdown_front_pair_pattern",
                r.pattern_ok,
                format!(
                    "rate {:.3} vs {} at {} cliques",
                    p.pattern_rate, c.pattern_rate_min, p.num_cliques
                ),
            );
            push(
                "slowdown_first_round",
                r.first_round_ok,
                format!(
                    "rate {:.3} vs {}",
                    p.first_round_rate, c.first_round_rate_min
                ),
            );
            push(
                "slowdown_max_fraction",
                r.max_fraction_ok,
                format!(
                    "rate {:.3} of seeds with max fraction <= {:.4}, need {}",
                    p.max_fraction_rate, p.max_fraction_limit, c.max_fraction_rate_min
                ),
            );
            push(
                "slowdown_vs_control",
                r.control_ok,
                format!(
                    "chain mean fraction {:.4} vs {} x control {:.4}",
                    p.mean_fraction, c.control_ratio_max, r.control.mean_fraction
                ),
            );
            push(
                "slowdown_trend",
                r.trend_ok,
                format!(
                    "{:?}",
                    r.chains
                        .iter()
                        .map(|x| (x.num_cliques, x.mean_fraction))
                        .collect::<Vec<_>>()
                ),
            );
            ceiling.merge(r.ceiling.clone());
            Some(r)
        }
        None => None,
    };

    let elimination = match &config.elimination_floor {
        Some(c) => {
            let r = elimination_floor(c, params, seed, base_dir)?;
            push(
                "elimination_floor",
                r.passed,
                format!(
                    "{} agents over {} instances, {} failing, min lower bound {:.4} vs {}",
                    r.agents_checked, r.instances, r.agents_failed, r.min_lower_bound, r.floor
                ),
            );
            ceiling.merge(r.ceiling.clone());
            Some(r)
        }
        None => None,
    };

    let crosscheck = match &config.oracle_crosscheck {
        Some(c) => {
            let r = oracle_crosscheck(c, params, seed, base_dir)?;
            push(
                "oracle_crosscheck",
                r.passed,
                format!(
                    "{} comparisons, {} outside {} sigma (max {:.2}), max residual {:.2e}",
                    r.comparisons,
                    r.failures,
                    c.sigma,
                    r.max_deviation_sigmas,
                    r.max_residual_error
                ),
            );
            ceiling.merge(r.ceiling.clone());
            Some(r)
        }
        None => None,
    };

    let neighborhood = match &config.neighborhood_examples {
        Some(c) => {
            let r = neighborhood_examples(c, params)?;
            push(
                "neighborhood_examples",
                r.passed,
                format!(
                    "{:?}",
                    r.rows
                        .iter()
                        .map(|x| (&x.case, x.d, x.ratio))
                        .collect::<Vec<_>>()
                ),
            );
            Some(r)
        }
        None => None,
    };

    push(
        "level_ceiling",
        ceiling.passed(),
        format!(
            "{} rounds, {} above log(2d/eps_l)/log(1/eps_u) (worst excess {:.4}), {} above the closed-neighborhood ceiling",
            ceiling.rounds_checked, ceiling.violations, ceiling.worst_excess, ceiling.closed_violations
        ),
    );

    let passed = checks.iter().all(|c| c.passed);
    Ok(SuiteReport {
        schema_version: SCHEMA_VERSION,
        log_base: 2,
        master_seed: seed,
        seed_derivation: "stream = derive_seed(master, experiment id); cell/instance seeds = derive_seed(stream, index); per-seed values logged in the CSV files".into(),
        params: *params,
        convergence_sweep: sweep,
        cliquechain_slowdown: slowdown,
        elimination_floor: elimination,
        oracle_crosscheck: crosscheck,
        neighborhood_examples: neighborhood,
        level_ceiling: ceiling,
        checks,
        passed,
    })
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `report.json` plus one CSV per experiment that ran.
pub fn write_outputs(report: &SuiteReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let mut emit = |name: &str, f: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
        let path = out_dir.join(name);
        f(&path)?;
        written.push(path);
        Ok(())
    };
    if let Some(s) = &report.convergence_sweep {
        emit("sweep.csv", &|p| write_csv(p, &s.cells))?;
        emit("sweep_runs.csv", &|p| write_csv(p, &s.runs))?;
    }
    if let Some(s) = &report.cliquechain_slowdown {
        emit("slowdown.csv", &|p| write_csv(p, &s.rows))?;
    }
    if let Some(s) = &report.elimination_floor {
        emit("elimination.csv", &|p| write_csv(p, &s.rows))?;
    }
    if let Some(s) = &report.oracle_crosscheck {
        emit("oracle.csv", &|p| write_csv(p, &s.rows))?;
    }
    if let Some(s) = &report.neighborhood_examples {
        emit("neighborhood.csv", &|p| write_csv(p, &s.rows))?;
    }
    emit("report.json", &|p| {
        let mut text = serde_json::to_string_pretty(report)?;
        text.push('\n');
        std::fs::write(p, text)?;
        Ok(())
    })?;
    Ok(written)
}
