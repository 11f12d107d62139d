//! Exact single-round probabilities on tiny instances.
//!
//! Bits are revealed one position at a time for every agent still involved in
//! an undecided comparison. The state is the orientation of each active edge
//! (tied so far, or decided either way) together with the set of agents that
//! have already lost a comparison. Edges between two losers no longer matter
//! and are forgotten, which keeps the state space small. A state is resolved
//! once no relevant edge is tied.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Graph, StrengthProfile};

pub const MAX_AGENTS: usize = 8;
pub const DEFAULT_DEPTH_CAP: u32 = 64;

/// States lighter than this are dropped and their mass counted as residual.
const PRUNE_MASS: f64 = 1e-24;

/// Edge orientations occupy the low 56 bits; the loser mask sits above them.
const LOSER_SHIFT: u32 = 56;

const TIED: u64 = 0;
const FIRST_SMALLER: u64 = 1;
const SECOND_SMALLER: u64 = 2;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactRoundDistribution {
    /// Active agents, in increasing id order.
    pub agents: Vec<usize>,
    /// Probability of joining the MIS this round, indexed by agent id.
    pub join: Vec<f64>,
    /// Probability of leaving the active set this round, indexed by agent id.
    pub eliminate: Vec<f64>,
    /// Probability that no active agent remains after the round.
    pub terminate: f64,
    /// Probability that at least one agent joins.
    pub any_join: f64,
    /// Mass of outcomes still unresolved after `depth_cap` bit positions,
    /// including states dropped for having negligible mass.
    pub residual_error: f64,
    pub depth_cap: u32,
}

struct Instance {
    /// Local endpoints of each active edge, first < second.
    edges: Vec<(usize, usize)>,
    /// Zero probability by local agent and bit position.
    zero: Vec<Vec<f64>>,
    adjacency: Vec<Vec<usize>>,
}

impl Instance {
    #[inline]
    fn orientation(state: u64, e: usize) -> u64 {
        (state >> (2 * e)) & 3
    }

    #[inline]
    fn losers(state: u64) -> u32 {
        (state >> LOSER_SHIFT) as u32
    }

    /// Folds decided edges into the loser mask and forgets every edge whose
    /// endpoints have both lost; returns the canonical state and the mask of
    /// edges that are still tied and relevant.
    fn canonical(&self, state: u64) -> (u64, u32) {
        let mut losers = Self::losers(state);
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            match Self::orientation(state, e) {
                FIRST_SMALLER => losers |= 1 << b,
                SECOND_SMALLER => losers |= 1 << a,
                _ => {}
            }
        }
        let mut out = u64::from(losers) << LOSER_SHIFT;
        let mut open = 0u32;
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            if losers & (1 << a) != 0 && losers & (1 << b) != 0 {
                continue;
            }
            let o = Self::orientation(state, e);
            out |= o << (2 * e);
            if o == TIED {
                open |= 1 << e;
            }
        }
        (out, open)
    }
}

/// Exact join, elimination and termination probabilities of a single round
/// from the active set `active`.
pub fn exact_round(
    graph: &Graph,
    profile: &StrengthProfile,
    active: &[bool],
    depth_cap: u32,
) -> Result<ExactRoundDistribution> {
    profile.ensure_covers(graph)?;
    let agents: Vec<usize> = (0..graph.n()).filter(|&i| active[i]).collect();
    if agents.len() > MAX_AGENTS {
        return Err(Error::TooLarge {
            cap: MAX_AGENTS,
            got: agents.len(),
        });
    }
    let mut local = vec![usize::MAX; graph.n()];
    for (k, &i) in agents.iter().enumerate() {
        local[i] = k;
        let dist = profile.get(i);
        if !dist.is_bit_generable() {
            return Err(Error::UnsupportedSampling(dist.kind_name()));
        }
    }
    let mut edges = Vec::new();
    let mut adjacency = vec![Vec::new(); agents.len()];
    for (a, &i) in agents.iter().enumerate() {
        for &j in graph.neighbors(i) {
            let b = local[j as usize];
            if b != usize::MAX {
                adjacency[a].push(b);
                if a < b {
                    edges.push((a, b));
                }
            }
        }
    }
    let zero = agents
        .iter()
        .map(|&i| {
            (0..depth_cap)
                .map(|k| profile.get(i).zero_probability(k))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let inst = Instance {
        edges,
        zero,
        adjacency,
    };

    let n = graph.n();
    let m = agents.len();
    let mut join = vec![0.0; n];
    let mut eliminate = vec![0.0; n];
    let mut terminate = 0.0;
    let mut any_join = 0.0;
    let mut settle = |losers: u32, mass: f64| {
        let winners = !losers & ((1u32 << m) - 1);
        let mut gone = winners;
        for a in 0..m {
            if winners & (1 << a) != 0 {
                join[agents[a]] += mass;
                for &b in &inst.adjacency[a] {
                    gone |= 1 << b;
                }
            }
        }
        for a in 0..m {
            if gone & (1 << a) != 0 {
                eliminate[agents[a]] += mass;
            }
        }
        if gone.count_ones() as usize == m {
            terminate += mass;
        }
        if winners != 0 {
            any_join += mass;
        }
    };

    let mut pruned = 0.0;
    let mut frontier: BTreeMap<u64, f64> = BTreeMap::new();
    let (start, open) = inst.canonical(0);
    if open == 0 {
        settle(Instance::losers(start), 1.0);
    } else {
        frontier.insert(start, 1.0);
    }
    for depth in 0..depth_cap as usize {
        if frontier.is_empty() {
            break;
        }
        let mut next: BTreeMap<u64, f64> = BTreeMap::new();
        for (&state, &mass) in &frontier {
            if mass < PRUNE_MASS {
                pruned += mass;
                continue;
            }
            let (_, open) = inst.canonical(state);
            let open_edges: Vec<usize> = (0..inst.edges.len())
                .filter(|e| open & (1 << e) != 0)
                .collect();
            let mut involved = 0u32;
            for &e in &open_edges {
                let (a, b) = inst.edges[e];
                involved |= (1 << a) | (1 << b);
            }
            let members: Vec<usize> = (0..m).filter(|a| involved & (1 << a) != 0).collect();
            for pattern in 0u32..(1 << members.len()) {
                // bit of member k is (pattern >> k) & 1; a set bit is a one
                let mut bits = 0u32;
                let mut p = mass;
                for (k, &a) in members.iter().enumerate() {
                    let q = inst.zero[a][depth];
                    if pattern & (1 << k) != 0 {
                        bits |= 1 << a;
                        p *= 1.0 - q;
                    } else {
                        p *= q;
                    }
                }
                if p == 0.0 {
                    continue;
                }
                let mut s = state;
                for &e in &open_edges {
                    let (a, b) = inst.edges[e];
                    let (ba, bb) = ((bits >> a) & 1, (bits >> b) & 1);
                    if ba != bb {
                        let o = if ba == 0 {
                            FIRST_SMALLER
                        } else {
                            SECOND_SMALLER
                        };
                        s |= o << (2 * e);
                    }
                }
                let (s, still_open) = inst.canonical(s);
                if still_open == 0 {
                    settle(Instance::losers(s), p);
                } else {
                    *next.entry(s).or_insert(0.0) += p;
                }
            }
        }
        frontier = next;
    }
    let residual_error = pruned + frontier.values().sum::<f64>();
    Ok(ExactRoundDistribution {
        agents,
        join,
        eliminate,
        terminate,
        any_join,
        residual_error,
        depth_cap,
    })
}
