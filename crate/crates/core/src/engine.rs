//! Exact execution of the synchronous MIS protocol.
//!
//! Each round every active agent draws a fresh value as a lazy bit stream.
//! An agent joins the MIS iff its value is strictly smaller than the value of
//! every active neighbor; active neighbors of new members are deactivated.
//! Values are compared lexicographically, 64 bits at a time, extending both
//! streams only while they agree.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{active_edge_count, Graph, StrengthProfile};
use crate::rng;
use crate::strength::ConditionParams;
use crate::theory;

/// Longest prefix, in bits, compared before a tie is declared an internal error.
pub const DEFAULT_BIT_BUDGET: u32 = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Active,
    InMis,
    Deactivated,
}

/// Which extreme wins a local contest.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WinnerRule {
    /// Strictly smallest value among active neighbors joins.
    #[default]
    Min,
    /// Strictly largest value joins; only meaningful for fair bits.
    Max,
}

impl std::str::FromStr for WinnerRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(WinnerRule::Min),
            "max" => Ok(WinnerRule::Max),
            _ => Err(Error::Parse(format!(
                "winner rule must be `min` or `max`, got `{s}`"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtocolState {
    status: Vec<Status>,
    round: u64,
}

impl ProtocolState {
    /// All agents active, round 0.
    pub fn new(n: usize) -> Self {
        ProtocolState {
            status: vec![Status::Active; n],
            round: 0,
        }
    }

    /// State in which only the agents in `active` compete; the rest are
    /// marked deactivated. Used to analyze a round from an arbitrary
    /// surviving set, so the "deactivated agents have an MIS neighbor"
    /// invariant is not required of the initial non-active agents.
    pub fn with_active(active: &[bool]) -> Self {
        ProtocolState {
            status: active
                .iter()
                .map(|&a| {
                    if a {
                        Status::Active
                    } else {
                        Status::Deactivated
                    }
                })
                .collect(),
            round: 0,
        }
    }

    pub fn status(&self) -> &[Status] {
        &self.status
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn n(&self) -> usize {
        self.status.len()
    }

    pub fn is_active(&self, agent: usize) -> bool {
        self.status[agent] == Status::Active
    }

    pub fn active_mask(&self) -> Vec<bool> {
        self.status.iter().map(|s| *s == Status::Active).collect()
    }

    pub fn active_count(&self) -> usize {
        self.status.iter().filter(|s| **s == Status::Active).count()
    }

    pub fn mis(&self) -> Vec<usize> {
        self.status
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == Status::InMis)
            .map(|(i, _)| i)
            .collect()
    }

    /// Independence of the MIS members and coverage of every deactivated agent.
    pub fn invariant_violations(&self, graph: &Graph) -> Vec<String> {
        let mut out = Vec::new();
        for (i, s) in self.status.iter().enumerate() {
            let nb = graph.neighbors(i);
            match s {
                Status::InMis => {
                    if let Some(&j) = nb
                        .iter()
                        .find(|&&j| self.status[j as usize] == Status::InMis)
                    {
                        out.push(format!("MIS members {i} and {j} are adjacent"));
                    }
                }
                Status::Deactivated => {
                    if !nb.iter().any(|&j| self.status[j as usize] == Status::InMis) {
                        out.push(format!("deactivated agent {i} has no MIS neighbor"));
                    }
                }
                Status::Active => {}
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundStats {
    pub round: u64,
    pub mis_added: usize,
    pub deactivated: usize,
    pub active_edges_before: usize,
    pub active_edges_after: usize,
    /// Highest agent level at the start of the round, when condition
    /// parameters were supplied.
    pub l_max: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub terminated: bool,
    pub total_rounds: u64,
    pub mis: Vec<usize>,
    pub rounds: Vec<RoundStats>,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    /// `None` means 64 times the expected-round bound.
    pub max_rounds: Option<u64>,
    pub winner: WinnerRule,
    /// Enables per-round level tracking.
    pub params: Option<ConditionParams>,
    pub bit_budget: u32,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            max_rounds: None,
            winner: WinnerRule::Min,
            params: None,
            bit_budget: DEFAULT_BIT_BUDGET,
        }
    }
}

impl RunOptions {
    pub fn with_params(params: ConditionParams) -> Self {
        RunOptions {
            params: Some(params),
            ..RunOptions::default()
        }
    }
}

/// Round cap used when none is given: 64 times the expected-round bound
/// (evaluated with `n >= 2`, `d >= 1`).
pub fn default_max_rounds(graph: &Graph, params: Option<&ConditionParams>) -> u64 {
    let params = params
        .copied()
        .unwrap_or_else(ConditionParams::quarter_half);
    let n = graph.n().max(2);
    let d = graph.max_degree().max(1);
    let bound = theory::round_bound(n, d, &params)
        .map(|b| b.eq0_bound)
        .unwrap_or(1.0);
    (64.0 * bound).ceil() as u64
}

/// Per-class zero-bit thresholds by bit position.
struct ClassBits {
    head: Vec<u128>,
    tail: u128,
}

impl ClassBits {
    #[inline]
    fn threshold(&self, position: usize) -> u128 {
        self.head.get(position).copied().unwrap_or(self.tail)
    }
}

fn class_bits(profile: &StrengthProfile) -> Result<Vec<ClassBits>> {
    profile
        .classes()
        .iter()
        .map(|d| {
            let head_len = match d {
                crate::strength::StrengthDistribution::BitSchedule { biases } => biases.len(),
                _ => 0,
            };
            let head = (0..head_len as u32)
                .map(|k| d.zero_probability(k).map(rng::zero_threshold))
                .collect::<Result<Vec<_>>>()?;
            let tail = rng::zero_threshold(d.zero_probability(head_len as u32)?);
            Ok(ClassBits { head, tail })
        })
        .collect()
}

/// Lazily materialized values of the active agents in one round.
struct RoundValues<'a> {
    profile: &'a StrengthProfile,
    bits: &'a [ClassBits],
    seed: u64,
    round: u64,
    words_budget: usize,
    bit_budget: u32,
    keys: Vec<u64>,
    words: Vec<Vec<u64>>,
}

impl<'a> RoundValues<'a> {
    fn new(
        profile: &'a StrengthProfile,
        bits: &'a [ClassBits],
        seed: u64,
        round: u64,
        bit_budget: u32,
    ) -> Self {
        let n = profile.len();
        RoundValues {
            profile,
            bits,
            seed,
            round,
            words_budget: (bit_budget as usize).div_ceil(64).max(1),
            bit_budget,
            keys: vec![0; n],
            words: vec![Vec::new(); n],
        }
    }

    fn word(&mut self, agent: usize, index: usize) -> u64 {
        let words = &mut self.words[agent];
        if words.is_empty() {
            self.keys[agent] = rng::stream_key(self.seed, agent as u64, self.round);
        }
        while words.len() <= index {
            let class = &self.bits[self.profile.class_of(agent)];
            let key = self.keys[agent];
            let base = words.len() * 64;
            let mut w = 0u64;
            for k in base..base + 64 {
                let zero = rng::is_zero_bit(rng::draw(key, k as u64), class.threshold(k));
                w = (w << 1) | u64::from(!zero);
            }
            words.push(w);
        }
        words[index]
    }

    fn compare(&mut self, a: usize, b: usize) -> Result<Ordering> {
        for index in 0..self.words_budget {
            let (wa, wb) = (self.word(a, index), self.word(b, index));
            if wa != wb {
                return Ok(wa.cmp(&wb));
            }
        }
        Err(Error::BitBudgetExceeded {
            budget: self.bit_budget,
            a,
            b,
            round: self.round,
        })
    }
}

/// Which active agents join the MIS in a round, and which leave the active set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundOutcome {
    pub joined: Vec<bool>,
    pub eliminated: Vec<bool>,
}

/// Samples one round from the active set `active` without touching any state.
pub fn sample_round(
    graph: &Graph,
    profile: &StrengthProfile,
    active: &[bool],
    seed: u64,
    round: u64,
    winner: WinnerRule,
    bit_budget: u32,
) -> Result<RoundOutcome> {
    profile.ensure_covers(graph)?;
    if winner == WinnerRule::Max && !profile.all_fair() {
        return Err(Error::WinnerRule);
    }
    let bits = class_bits(profile)?;
    let mut values = RoundValues::new(profile, &bits, seed, round, bit_budget);
    let wanted = match winner {
        WinnerRule::Min => Ordering::Less,
        WinnerRule::Max => Ordering::Greater,
    };
    let n = graph.n();
    let mut joined = vec![false; n];
    for i in (0..n).filter(|&i| active[i]) {
        let mut wins = true;
        for &j in graph.neighbors(i) {
            let j = j as usize;
            if active[j] && values.compare(i, j)? != wanted {
                wins = false;
                break;
            }
        }
        joined[i] = wins;
    }
    let mut eliminated = joined.clone();
    for i in (0..n).filter(|&i| joined[i]) {
        for &j in graph.neighbors(i) {
            if active[j as usize] {
                eliminated[j as usize] = true;
            }
        }
    }
    Ok(RoundOutcome { joined, eliminated })
}

/// Executes one synchronous round from `state`.
pub fn run_round(
    graph: &Graph,
    profile: &StrengthProfile,
    state: &ProtocolState,
    seed: u64,
    options: &RunOptions,
) -> Result<(ProtocolState, RoundStats)> {
    let before = active_edge_count(graph, &state.active_mask());
    advance(graph, profile, state, seed, options, before)
}

/// Active edges lost when the agents in `removed` leave; `after` is the
/// active mask once they have left.
fn removed_edge_count(graph: &Graph, before: &[bool], after: &[bool], removed: &[usize]) -> usize {
    let mut incident = 0;
    let mut internal = 0;
    for &i in removed {
        for &j in graph.neighbors(i) {
            let j = j as usize;
            if before[j] {
                incident += 1;
                if !after[j] {
                    internal += 1;
                }
            }
        }
    }
    incident - internal / 2
}

fn advance(
    graph: &Graph,
    profile: &StrengthProfile,
    state: &ProtocolState,
    seed: u64,
    options: &RunOptions,
    active_edges_before: usize,
) -> Result<(ProtocolState, RoundStats)> {
    let active = state.active_mask();
    let l_max = match &options.params {
        Some(params) => theory::compute_levels(graph, profile, &active, params)?.l_max,
        None => None,
    };
    let outcome = sample_round(
        graph,
        profile,
        &active,
        seed,
        state.round,
        options.winner,
        options.bit_budget,
    )?;
    let mut next = state.clone();
    let mut mis_added = 0;
    let mut removed = Vec::new();
    for i in 0..graph.n() {
        if outcome.joined[i] {
            next.status[i] = Status::InMis;
            mis_added += 1;
            removed.push(i);
        } else if outcome.eliminated[i] {
            next.status[i] = Status::Deactivated;
            removed.push(i);
        }
    }
    next.round += 1;
    let lost = removed_edge_count(graph, &active, &next.active_mask(), &removed);
    let stats = RoundStats {
        round: next.round,
        mis_added,
        deactivated: removed.len() - mis_added,
        active_edges_before,
        active_edges_after: active_edges_before - lost,
        l_max,
    };
    Ok((next, stats))
}

/// Runs rounds until no agent is active or the round cap is reached.
///
/// A capped run is returned with `terminated == false`.
pub fn run_protocol(
    graph: &Graph,
    profile: &StrengthProfile,
    seed: u64,
    options: &RunOptions,
) -> Result<RunResult> {
    run_protocol_with(graph, profile, seed, options, |_, _| {})
}

/// [`run_protocol`] with a callback observing the state after every round.
pub fn run_protocol_with<F>(
    graph: &Graph,
    profile: &StrengthProfile,
    seed: u64,
    options: &RunOptions,
    mut observe: F,
) -> Result<RunResult>
where
    F: FnMut(&ProtocolState, &RoundStats),
{
    profile.ensure_covers(graph)?;
    let max_rounds = options
        .max_rounds
        .unwrap_or_else(|| default_max_rounds(graph, options.params.as_ref()));
    let mut state = ProtocolState::new(graph.n());
    let mut edges = graph.edge_count();
    let mut rounds = Vec::new();
    while state.active_count() > 0 && state.round < max_rounds {
        let (next, stats) = advance(graph, profile, &state, seed, options, edges)?;
        observe(&next, &stats);
        edges = stats.active_edges_after;
        rounds.push(stats);
        state = next;
    }
    Ok(RunResult {
        seed,
        terminated: state.active_count() == 0,
        total_rounds: state.round,
        mis: state.mis(),
        rounds,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct MisVerdict {
    /// Edges with both endpoints in the set.
    pub independence_violations: Vec<(usize, usize)>,
    /// Agents with neither themselves nor a neighbor in the set.
    pub maximality_violations: Vec<usize>,
}

impl MisVerdict {
    pub fn passed(&self) -> bool {
        self.independence_violations.is_empty() && self.maximality_violations.is_empty()
    }
}

pub fn verify_mis(graph: &Graph, mis: &[usize]) -> MisVerdict {
    let mut member = vec![false; graph.n()];
    for &i in mis {
        member[i] = true;
    }
    let independence_violations = graph
        .edges()
        .filter(|&(u, v)| member[u] && member[v])
        .collect();
    let maximality_violations = (0..graph.n())
        .filter(|&i| !member[i] && !graph.neighbors(i).iter().any(|&j| member[j as usize]))
        .collect();
    MisVerdict {
        independence_violations,
        maximality_violations,
    }
}
