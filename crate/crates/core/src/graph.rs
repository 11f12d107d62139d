//! Undirected simple graphs, strength profiles and the generators used by
//! the simulator, including the clique-chain slowdown construction.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::strength::{check_conditions, ConditionParams, ConditionReport, StrengthDistribution};

/// Undirected simple graph stored as sorted adjacency lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<u32>>,
    edge_count: usize,
    max_degree: usize,
}

impl Graph {
    /// Graph with `n` agents and no edges.
    pub fn empty(n: usize) -> Self {
        Graph {
            adjacency: vec![Vec::new(); n],
            edge_count: 0,
            max_degree: 0,
        }
    }

    /// Builds a graph from an edge list, rejecting self-loops, duplicate
    /// edges and out-of-range endpoints.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n > u32::MAX as usize {
            return Err(Error::InvalidGraph(format!(
                "{n} agents exceed the id range"
            )));
        }
        let mut adjacency = vec![Vec::new(); n];
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) has an endpoint outside 0..{n}"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at agent {u}")));
            }
            adjacency[u].push(v as u32);
            adjacency[v].push(u as u32);
        }
        for (u, list) in adjacency.iter_mut().enumerate() {
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge ({u}, {})",
                    w[0]
                )));
            }
        }
        Ok(Self::from_sorted_adjacency(adjacency))
    }

    fn from_sorted_adjacency(adjacency: Vec<Vec<u32>>) -> Self {
        let total: usize = adjacency.iter().map(Vec::len).sum();
        let max_degree = adjacency.iter().map(Vec::len).max().unwrap_or(0);
        Graph {
            adjacency,
            edge_count: total / 2,
            max_degree,
        }
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, agent: usize) -> &[u32] {
        &self.adjacency[agent]
    }

    pub fn degree(&self, agent: usize) -> usize {
        self.adjacency[agent].len()
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&(v as u32)).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(u, list)| {
            list.iter()
                .filter(move |&&v| (v as usize) > u)
                .map(move |&v| (u, v as usize))
        })
    }

    /// Edge-list text: a header `n <count>` followed by one `u v` per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("n {}\n", self.n());
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .enumerate()
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Parse("empty graph file".into()))?;
        let n = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["n", count] => count
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("bad agent count `{count}`: {e}")))?,
            _ => {
                return Err(Error::Parse(format!(
                    "expected header `n <count>`, got `{header}`"
                )))
            }
        };
        let mut edges = Vec::new();
        for (lineno, line) in lines {
            let parts: Vec<_> = line.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|e| {
                    Error::Parse(format!("line {}: bad agent id `{s}`: {e}", lineno + 1))
                })
            };
            match parts.as_slice() {
                [u, v] => edges.push((parse(u)?, parse(v)?)),
                _ => {
                    return Err(Error::Parse(format!(
                        "line {}: expected `u v`, got `{line}`",
                        lineno + 1
                    )))
                }
            }
        }
        Graph::from_edges(n, edges)
    }
}

/// Number of edges with both endpoints active.
pub fn active_edge_count(graph: &Graph, active: &[bool]) -> usize {
    debug_assert_eq!(active.len(), graph.n());
    (0..graph.n())
        .filter(|&u| active[u])
        .map(|u| {
            graph
                .neighbors(u)
                .iter()
                .filter(|&&v| (v as usize) > u && active[v as usize])
                .count()
        })
        .sum()
}

/// Assignment of a strength distribution to every agent.
///
/// Identical distributions share one class so that per-class tables can be
/// reused by the engine and the level computations.
#[derive(Clone, Debug, PartialEq)]
pub struct StrengthProfile {
    classes: Vec<StrengthDistribution>,
    class_of: Vec<u32>,
}

fn dist_key(d: &StrengthDistribution) -> (u8, Vec<u64>) {
    match d {
        StrengthDistribution::FairBits => (0, Vec::new()),
        StrengthDistribution::BiasedBits { q } => (1, vec![q.to_bits()]),
        StrengthDistribution::BitSchedule { biases } => {
            (2, biases.iter().map(|q| q.to_bits()).collect())
        }
        StrengthDistribution::Tabulated { cdf } => (3, cdf.iter().map(|q| q.to_bits()).collect()),
    }
}

impl StrengthProfile {
    pub fn uniform(n: usize, dist: StrengthDistribution) -> Self {
        StrengthProfile {
            classes: vec![dist],
            class_of: vec![0; n],
        }
    }

    pub fn fair(n: usize) -> Self {
        Self::uniform(n, StrengthDistribution::FairBits)
    }

    pub fn from_distributions(dists: Vec<StrengthDistribution>) -> Self {
        let mut index: HashMap<(u8, Vec<u64>), u32> = HashMap::new();
        let mut classes = Vec::new();
        let mut class_of = Vec::with_capacity(dists.len());
        for d in dists {
            let id = *index.entry(dist_key(&d)).or_insert_with(|| {
                classes.push(d);
                classes.len() as u32 - 1
            });
            class_of.push(id);
        }
        StrengthProfile { classes, class_of }
    }

    /// One biased-bits distribution per agent with `q` drawn uniformly from
    /// `[low, high]`.
    pub fn uniform_biased(n: usize, low: f64, high: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&low) || !(low..=1.0).contains(&high) {
            return Err(Error::InvalidDistribution(format!(
                "bias range [{low}, {high}] is not a probability interval"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dists = (0..n)
            .map(|_| {
                let q = if low == high {
                    low
                } else {
                    rng.gen_range(low..=high)
                };
                StrengthDistribution::BiasedBits { q }
            })
            .collect();
        Ok(Self::from_distributions(dists))
    }

    pub fn len(&self) -> usize {
        self.class_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_of.is_empty()
    }

    pub fn get(&self, agent: usize) -> &StrengthDistribution {
        &self.classes[self.class_of[agent] as usize]
    }

    pub fn class_of(&self, agent: usize) -> usize {
        self.class_of[agent] as usize
    }

    pub fn classes(&self) -> &[StrengthDistribution] {
        &self.classes
    }

    pub fn all_bit_generable(&self) -> bool {
        self.classes
            .iter()
            .all(StrengthDistribution::is_bit_generable)
    }

    pub fn all_fair(&self) -> bool {
        self.classes
            .iter()
            .all(|d| matches!(d, StrengthDistribution::FairBits))
    }

    pub fn to_distributions(&self) -> Vec<StrengthDistribution> {
        (0..self.len()).map(|i| self.get(i).clone()).collect()
    }

    pub fn ensure_covers(&self, graph: &Graph) -> Result<()> {
        if self.len() != graph.n() {
            return Err(Error::ProfileMismatch {
                profile: self.len(),
                graph: graph.n(),
            });
        }
        Ok(())
    }

    /// Condition reports for every distinct distribution in the profile.
    pub fn check_conditions(
        &self,
        params: &ConditionParams,
        depth: u32,
    ) -> Result<Vec<ConditionReport>> {
        self.classes
            .iter()
            .map(|d| check_conditions(d, params, depth.min(d.max_level().unwrap_or(depth))))
            .collect()
    }

    /// Parses a profile file: either a JSON array with one distribution per
    /// agent, or a single distribution applied to all `n` agents.
    pub fn from_json(text: &str, n: usize) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        if value.is_array() {
            let dists: Vec<StrengthDistribution> = serde_json::from_value(value)?;
            let profile = Self::from_distributions(dists);
            if profile.len() != n {
                return Err(Error::ProfileMismatch {
                    profile: profile.len(),
                    graph: n,
                });
            }
            Ok(profile)
        } else {
            Ok(Self::uniform(n, serde_json::from_value(value)?))
        }
    }
}

impl Serialize for StrengthProfile {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq((0..self.len()).map(|i| self.get(i)))
    }
}

impl<'de> Deserialize<'de> for StrengthProfile {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(Self::from_distributions(Vec::deserialize(d)?))
    }
}

/// Line of equal cliques, consecutive cliques joined by complete bipartite
/// graphs, with zero-bit biases decreasing from front to back.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CliqueChainSpec {
    pub clique_size: usize,
    pub num_cliques: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias_schedule: Option<Vec<f64>>,
}

/// `round(sqrt(log2 n))`, the rounded chain-length parameter.
pub fn rounded_sqrt_log2(n: usize) -> usize {
    (n.max(1) as f64).log2().sqrt().round() as usize
}

impl CliqueChainSpec {
    /// Chain with the default `round(sqrt(log2 n)) + 1` cliques.
    pub fn new(clique_size: usize) -> Self {
        Self::with_cliques(clique_size, rounded_sqrt_log2(clique_size) + 1)
    }

    pub fn with_cliques(clique_size: usize, num_cliques: usize) -> Self {
        CliqueChainSpec {
            clique_size,
            num_cliques,
            bias_schedule: None,
        }
    }

    pub fn n(&self) -> usize {
        self.clique_size * self.num_cliques
    }

    pub fn clique_of(&self, agent: usize) -> usize {
        agent / self.clique_size
    }

    /// Zero-bit bias of each clique, front to back.
    ///
    /// Default: clique `j` (1-based) uses `1/2 - (j-1) / (4 (k-1))` for `k`
    /// cliques, so the first clique has fair bits and the last has 1/4.
    pub fn biases(&self) -> Result<Vec<f64>> {
        let biases = match &self.bias_schedule {
            Some(custom) => {
                if custom.len() != self.num_cliques {
                    return Err(Error::InvalidSpec(format!(
                        "bias schedule has {} entries for {} cliques",
                        custom.len(),
                        self.num_cliques
                    )));
                }
                custom.clone()
            }
            None if self.num_cliques == 1 => vec![0.5],
            None => {
                let denom = 4.0 * (self.num_cliques - 1) as f64;
                (0..self.num_cliques)
                    .map(|j| 0.5 - j as f64 / denom)
                    .collect()
            }
        };
        if let Some((j, q)) = biases
            .iter()
            .enumerate()
            .find(|(_, q)| !(0.25..=0.5).contains(*q))
        {
            return Err(Error::InvalidSpec(format!(
                "clique {} bias {q} is outside [1/4, 1/2]",
                j + 1
            )));
        }
        Ok(biases)
    }

    fn validate(&self) -> Result<()> {
        if self.clique_size == 0 || self.num_cliques == 0 {
            return Err(Error::InvalidSpec(
                "clique_size and num_cliques must be positive".into(),
            ));
        }
        self.biases().map(|_| ())
    }

    pub fn profile(&self) -> Result<StrengthProfile> {
        let biases = self.biases()?;
        let mut classes = Vec::with_capacity(biases.len());
        for q in biases {
            classes.push(StrengthDistribution::biased_bits(q)?);
        }
        let class_of = (0..self.n()).map(|a| self.clique_of(a) as u32).collect();
        Ok(StrengthProfile { classes, class_of })
    }
}

/// Graph families understood by [`generate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphKind {
    Complete {
        n: usize,
    },
    /// Center 0 joined to leaves `1..=leaves`.
    Star {
        leaves: usize,
    },
    Path {
        n: usize,
    },
    Gnp {
        n: usize,
        p: f64,
    },
    CliqueChain(CliqueChainSpec),
}

impl GraphKind {
    pub fn n(&self) -> usize {
        match self {
            GraphKind::Complete { n } | GraphKind::Path { n } | GraphKind::Gnp { n, .. } => *n,
            GraphKind::Star { leaves } => leaves + 1,
            GraphKind::CliqueChain(spec) => spec.n(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            GraphKind::Complete { n } => format!("complete:{n}"),
            GraphKind::Star { leaves } => format!("star:{leaves}"),
            GraphKind::Path { n } => format!("path:{n}"),
            GraphKind::Gnp { n, p } => format!("gnp:{n}:{p}"),
            GraphKind::CliqueChain(s) => {
                format!("clique_chain:{}:{}", s.clique_size, s.num_cliques)
            }
        }
    }
}

impl FromStr for GraphKind {
    type Err = Error;

    /// `complete:<n>`, `star:<leaves>`, `path:<n>`, `gnp:<n>:<p>`,
    /// `clique_chain:<size>[:<cliques>]`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |x: &str| {
            x.parse::<usize>()
                .map_err(|e| Error::Parse(format!("bad size `{x}` in graph spec `{s}`: {e}")))
        };
        match parts.as_slice() {
            ["complete", n] => Ok(GraphKind::Complete { n: num(n)? }),
            ["star", d] => Ok(GraphKind::Star { leaves: num(d)? }),
            ["path", n] => Ok(GraphKind::Path { n: num(n)? }),
            ["gnp", n, p] => Ok(GraphKind::Gnp {
                n: num(n)?,
                p: p.parse()
                    .map_err(|e| Error::Parse(format!("bad p `{p}` in graph spec `{s}`: {e}")))?,
            }),
            ["clique_chain", size] => Ok(GraphKind::CliqueChain(CliqueChainSpec::new(num(size)?))),
            ["clique_chain", size, k] => Ok(GraphKind::CliqueChain(CliqueChainSpec::with_cliques(
                num(size)?,
                num(k)?,
            ))),
            _ => Err(Error::Parse(format!("unrecognized graph spec `{s}`"))),
        }
    }
}

pub fn complete(n: usize) -> Graph {
    let adjacency = (0..n)
        .map(|u| (0..n as u32).filter(|&v| v as usize != u).collect())
        .collect();
    Graph::from_sorted_adjacency(adjacency)
}

pub fn star(leaves: usize) -> Graph {
    let mut adjacency = vec![(1..=leaves as u32).collect::<Vec<_>>()];
    adjacency.extend((0..leaves).map(|_| vec![0]));
    Graph::from_sorted_adjacency(adjacency)
}

pub fn path(n: usize) -> Graph {
    let adjacency = (0..n)
        .map(|u| {
            let mut l = Vec::with_capacity(2);
            if u > 0 {
                l.push(u as u32 - 1);
            }
            if u + 1 < n {
                l.push(u as u32 + 1);
            }
            l
        })
        .collect();
    Graph::from_sorted_adjacency(adjacency)
}

/// Erdős–Rényi G(n, p) by geometric edge skipping, O(n + m).
pub fn gnp(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidGraph(format!(
            "edge probability {p} outside [0, 1]"
        )));
    }
    if p == 0.0 || n < 2 {
        return Ok(Graph::empty(n));
    }
    if p == 1.0 {
        return Ok(complete(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); n];
    let log_q = (1.0 - p).ln();
    let (mut v, mut w) = (1usize, -1i64);
    while v < n {
        let r: f64 = rng.gen();
        w += 1 + ((1.0 - r).ln() / log_q).floor() as i64;
        while w >= v as i64 && v < n {
            w -= v as i64;
            v += 1;
        }
        if v < n {
            adjacency[v].push(w as u32);
            adjacency[w as usize].push(v as u32);
        }
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }
    Ok(Graph::from_sorted_adjacency(adjacency))
}

pub fn clique_chain(spec: &CliqueChainSpec) -> Result<Graph> {
    spec.validate()?;
    let s = spec.clique_size;
    let k = spec.num_cliques;
    let adjacency = (0..spec.n())
        .map(|a| {
            let j = a / s;
            let lo = j.saturating_sub(1) * s;
            let hi = ((j + 2).min(k)) * s;
            (lo..hi).filter(|&b| b != a).map(|b| b as u32).collect()
        })
        .collect();
    Ok(Graph::from_sorted_adjacency(adjacency))
}

/// Generates a graph; the clique chain also yields its strength profile.
pub fn generate(kind: &GraphKind, seed: u64) -> Result<(Graph, Option<StrengthProfile>)> {
    Ok(match kind {
        GraphKind::Complete { n } => (complete(*n), None),
        GraphKind::Star { leaves } => (star(*leaves), None),
        GraphKind::Path { n } => (path(*n), None),
        GraphKind::Gnp { n, p } => (gnp(*n, *p, seed)?, None),
        GraphKind::CliqueChain(spec) => (clique_chain(spec)?, Some(spec.profile()?)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_simple(g: &Graph) {
        let mut total = 0;
        let mut max = 0;
        for u in 0..g.n() {
            let nb = g.neighbors(u);
            assert!(
                nb.windows(2).all(|w| w[0] < w[1]),
                "unsorted or duplicate at {u}"
            );
            for &v in nb {
                assert_ne!(v as usize, u, "self-loop");
                assert!(g.has_edge(v as usize, u), "asymmetric edge {u}-{v}");
            }
            total += nb.len();
            max = max.max(nb.len());
        }
        assert_eq!(total, 2 * g.edge_count());
        assert_eq!(max, g.max_degree());
    }

    #[test]
    fn single_agent_complete_graph() {
        let g = complete(1);
        assert_eq!((g.n(), g.edge_count(), g.max_degree()), (1, 0, 0));
    }

    #[test]
    fn clique_chain_bias_of_second_clique() {
        let spec = CliqueChainSpec::with_cliques(16, 3);
        assert_eq!(rounded_sqrt_log2(16), 2);
        let b = spec.biases().unwrap();
        assert_eq!(b, vec![0.5, 0.375, 0.25]);
        assert_eq!(CliqueChainSpec::new(16).num_cliques, 3);
        assert_eq!(CliqueChainSpec::new(256).num_cliques, 4);
    }

    #[test]
    fn clique_chain_edge_count_by_hand() {
        let g = clique_chain(&CliqueChainSpec::with_cliques(4, 3)).unwrap();
        assert_eq!(g.edge_count(), 50);
        assert_simple(&g);
        assert_eq!(g.max_degree(), 3 + 8);
    }

    #[test]
    fn clique_chain_rejects_out_of_range_schedules() {
        let mut spec = CliqueChainSpec::with_cliques(4, 3);
        spec.bias_schedule = Some(vec![0.5, 0.3, 0.2]);
        assert!(matches!(clique_chain(&spec), Err(Error::InvalidSpec(_))));
        spec.bias_schedule = Some(vec![0.6, 0.3, 0.25]);
        assert!(matches!(spec.profile(), Err(Error::InvalidSpec(_))));
        spec.bias_schedule = Some(vec![0.5, 0.25]);
        assert!(spec.biases().is_err());
        assert!(clique_chain(&CliqueChainSpec::with_cliques(0, 3)).is_err());
    }

    #[test]
    fn single_clique_chain_is_a_fair_clique() {
        let spec = CliqueChainSpec::with_cliques(5, 1);
        let (g, p) = generate(&GraphKind::CliqueChain(spec), 0).unwrap();
        assert_eq!(g, complete(5));
        assert_eq!(
            p.unwrap().get(3),
            &StrengthDistribution::BiasedBits { q: 0.5 }
        );
    }

    #[test]
    fn active_edge_count_examples() {
        let tri = complete(3);
        assert_eq!(active_edge_count(&tri, &[true; 3]), 3);
        assert_eq!(active_edge_count(&tri, &[true, false, false]), 0);
        let g = clique_chain(&CliqueChainSpec::with_cliques(4, 3)).unwrap();
        let mut active = vec![true; 12];
        active[..4].iter_mut().for_each(|a| *a = false);
        assert_eq!(active_edge_count(&g, &active), 28);
    }

    #[test]
    fn edge_list_round_trip_and_errors() {
        let g = gnp(30, 0.2, 9).unwrap();
        assert_eq!(Graph::parse_edge_list(&g.to_edge_list()).unwrap(), g);
        assert!(Graph::parse_edge_list("n 3\n0 0\n").is_err());
        assert!(Graph::parse_edge_list("n 3\n0 1\n1 0\n").is_err());
        assert!(Graph::parse_edge_list("n 3\n0 5\n").is_err());
        assert!(Graph::parse_edge_list("3\n0 1\n").is_err());
        let g = Graph::parse_edge_list("# comment\nn 3\n\n0 1\n1 2\n").unwrap();
        assert_eq!(g, path(3));
    }

    #[test]
    fn graph_specs_parse() {
        assert_eq!(
            "complete:4".parse::<GraphKind>().unwrap(),
            GraphKind::Complete { n: 4 }
        );
        assert_eq!(
            "clique_chain:16:3".parse::<GraphKind>().unwrap(),
            GraphKind::CliqueChain(CliqueChainSpec::with_cliques(16, 3))
        );
        assert_eq!(
            "gnp:10:0.5".parse::<GraphKind>().unwrap(),
            GraphKind::Gnp { n: 10, p: 0.5 }
        );
        assert!("wheel:5".parse::<GraphKind>().is_err());
        assert!("gnp:10".parse::<GraphKind>().is_err());
    }

    #[test]
    fn gnp_mean_degree_is_plausible() {
        let n = 2000;
        let p = 0.01;
        let g = gnp(n, p, 1).unwrap();
        let expected = p * (n * (n - 1) / 2) as f64;
        let sd = (expected * (1.0 - p)).sqrt();
        assert!((g.edge_count() as f64 - expected).abs() < 4.0 * sd);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gnp(300, 0.05, 11).unwrap();
        let b = gnp(300, 0.05, 11).unwrap();
        let c = gnp(300, 0.05, 12).unwrap();
        assert_eq!(a.to_edge_list(), b.to_edge_list());
        assert_ne!(a, c);
    }

    #[test]
    fn profile_deduplicates_classes() {
        let p = StrengthProfile::from_distributions(vec![
            StrengthDistribution::FairBits,
            StrengthDistribution::BiasedBits { q: 0.3 },
            StrengthDistribution::FairBits,
        ]);
        assert_eq!(p.classes().len(), 2);
        assert_eq!(p.class_of(2), 0);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(StrengthProfile::from_json(&json, 3).unwrap(), p);
        assert!(StrengthProfile::from_json(&json, 4).is_err());
        let uni = StrengthProfile::from_json(r#"{"kind":"fair_bits"}"#, 5).unwrap();
        assert_eq!(uni.len(), 5);
    }

    proptest! {
        #[test]
        fn generated_graphs_are_simple(
            which in 0usize..5,
            n in 1usize..60,
            p in 0.0f64..=1.0,
            k in 1usize..5,
            seed in any::<u64>(),
        ) {
            let kind = match which {
                0 => GraphKind::Complete { n },
                1 => GraphKind::Star { leaves: n },
                2 => GraphKind::Path { n },
                3 => GraphKind::Gnp { n, p },
                _ => GraphKind::CliqueChain(CliqueChainSpec::with_cliques(n.min(12), k)),
            };
            let (g, profile) = generate(&kind, seed).unwrap();
            assert_simple(&g);
            prop_assert_eq!(g.n(), kind.n());
            if let Some(profile) = profile {
                prop_assert_eq!(profile.len(), g.n());
            }
        }

        #[test]
        fn default_schedule_is_decreasing_and_bounded(size in 2usize..5000, extra in 0usize..6) {
            let spec = CliqueChainSpec::with_cliques(size, 2 + extra);
            let b = spec.biases().unwrap();
            prop_assert_eq!(b[0], 0.5);
            prop_assert_eq!(*b.last().unwrap(), 0.25);
            prop_assert!(b.windows(2).all(|w| w[0] > w[1]));
            let d = CliqueChainSpec::new(size).biases().unwrap();
            prop_assert!(d.iter().all(|q| (0.25..=0.5).contains(q)));
        }

        #[test]
        fn active_edge_count_is_monotone(n in 1usize..40, p in 0.0f64..=1.0, seed in any::<u64>(), mask in any::<u64>()) {
            let g = gnp(n, p, seed).unwrap();
            let all = vec![true; n];
            let none = vec![false; n];
            let sub: Vec<bool> = (0..n).map(|i| mask >> (i % 64) & 1 == 1).collect();
            let smaller: Vec<bool> = sub.iter().enumerate().map(|(i, &a)| a && i % 2 == 0).collect();
            prop_assert_eq!(active_edge_count(&g, &all), g.edge_count());
            prop_assert_eq!(active_edge_count(&g, &none), 0);
            prop_assert!(active_edge_count(&g, &smaller) <= active_edge_count(&g, &sub));
        }
    }
}
