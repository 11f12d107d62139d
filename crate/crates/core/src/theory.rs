//! Analytical quantities: neighborhood CDF totals, agent levels and the
//! round bounds, plus a Monte Carlo check of the per-round elimination floor.
//!
//! All logarithms are base 2.

use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{sample_round, WinnerRule, DEFAULT_BIT_BUDGET};
use crate::error::{Error, Result};
use crate::graph::{Graph, StrengthProfile};
use crate::rng::derive_seed;
use crate::stats::{wilson_lower, Z_99_ONE_SIDED};
use crate::strength::{exact, ConditionParams};

/// Relative distance to the level threshold below which float sums are
/// re-evaluated exactly.
const EXACT_FALLBACK: f64 = 1e-9;

fn closed_active_neighborhood<'a>(
    graph: &'a Graph,
    active: &'a [bool],
    agent: usize,
) -> impl Iterator<Item = usize> + 'a {
    std::iter::once(agent).chain(
        graph
            .neighbors(agent)
            .iter()
            .map(|&j| j as usize)
            .filter(move |&j| active[j]),
    )
}

/// `t_i(1/2^level)`: sum of `cdf_dyadic(level)` over the active closed
/// neighborhood of `agent` (the agent itself included).
pub fn neighborhood_total_cdf(
    graph: &Graph,
    profile: &StrengthProfile,
    active: &[bool],
    agent: usize,
    level: u32,
) -> Result<f64> {
    closed_active_neighborhood(graph, active, agent)
        .map(|j| profile.get(j).cdf_dyadic(level))
        .sum()
}

/// Exact rational form of [`neighborhood_total_cdf`].
pub fn neighborhood_total_cdf_exact(
    graph: &Graph,
    profile: &StrengthProfile,
    active: &[bool],
    agent: usize,
    level: u32,
) -> Result<BigRational> {
    let mut acc = BigRational::zero();
    for j in closed_active_neighborhood(graph, active, agent) {
        acc += profile.get(j).cdf_dyadic_exact(level)?;
    }
    Ok(acc)
}

/// Upper bound on the maximum level: `log(2d/eps_l) / log(1/eps_u)`.
pub fn eq2_ceiling(d: usize, params: &ConditionParams) -> f64 {
    (2.0 * d as f64 / params.eps_lower()).log2() / (1.0 / params.eps_upper()).log2()
}

/// The same ceiling with the closed neighborhood size `d + 1` in place of `d`.
///
/// This is what the decay bound `t_i(1/2^l) <= (d+1) eps_u^l` actually
/// implies, since the neighborhood sum includes the agent itself.
pub fn closed_neighborhood_ceiling(d: usize, params: &ConditionParams) -> f64 {
    eq2_ceiling(d + 1, params)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelReport {
    /// Level of each active agent; `None` for inactive agents.
    pub levels: Vec<Option<u32>>,
    pub l_max: Option<u32>,
    /// `1/2^l_max`.
    pub x_max: Option<f64>,
    /// `eps_l / 2`.
    pub threshold: f64,
}

impl LevelReport {
    /// Agents whose level equals `l_max`.
    pub fn top_agents(&self) -> Vec<usize> {
        match self.l_max {
            None => Vec::new(),
            Some(top) => self
                .levels
                .iter()
                .enumerate()
                .filter(|(_, l)| **l == Some(top))
                .map(|(i, _)| i)
                .collect(),
        }
    }
}

/// Largest level probed before the search is declared divergent.
pub fn level_search_limit(graph: &Graph, params: &ConditionParams) -> u32 {
    (2.0 * eq2_ceiling(graph.max_degree().max(1), params)).floor() as u32
}

/// Level of every active agent: the largest `l` with `t_i(1/2^l) >= eps_l/2`.
///
/// Float sums are used, with an exact recomputation whenever a sum lies
/// within a relative `1e-9` of the threshold.
pub fn compute_levels(
    graph: &Graph,
    profile: &StrengthProfile,
    active: &[bool],
    params: &ConditionParams,
) -> Result<LevelReport> {
    profile.ensure_covers(graph)?;
    let threshold = params.eps_lower() / 2.0;
    let threshold_exact = exact(params.eps_lower()) / BigRational::from_integer(2.into());
    let limit = level_search_limit(graph, params);

    // cdf tables per class, truncated at the tabulated range.
    let tables: Vec<Vec<f64>> = profile
        .classes()
        .iter()
        .map(|d| {
            let top = d.max_level().map_or(limit + 1, |m| m.min(limit + 1));
            (0..=top)
                .map(|l| d.cdf_dyadic(l))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut counts = vec![0u32; tables.len()];
    let mut touched: Vec<usize> = Vec::new();
    let mut levels = vec![None; graph.n()];
    for i in (0..graph.n()).filter(|&i| active[i]) {
        for j in closed_active_neighborhood(graph, active, i) {
            let c = profile.class_of(j);
            if counts[c] == 0 {
                touched.push(c);
            }
            counts[c] += 1;
        }
        let total = |level: u32| -> Result<f64> {
            touched
                .iter()
                .map(|&c| {
                    let table = &tables[c];
                    table
                        .get(level as usize)
                        .map(|v| counts[c] as f64 * v)
                        .ok_or(Error::LevelOutOfRange {
                            level,
                            max: table.len() as u32 - 1,
                        })
                })
                .sum()
        };
        let reaches = |level: u32| -> Result<bool> {
            let t = total(level)?;
            if (t - threshold).abs() <= EXACT_FALLBACK * threshold {
                Ok(
                    neighborhood_total_cdf_exact(graph, profile, active, i, level)?
                        >= threshold_exact,
                )
            } else {
                Ok(t >= threshold)
            }
        };
        let mut level = 0;
        loop {
            if level >= limit {
                return Err(Error::LevelSearchOverflow { agent: i, limit });
            }
            if !reaches(level + 1)? {
                break;
            }
            level += 1;
        }
        levels[i] = Some(level);
        for c in touched.drain(..) {
            counts[c] = 0;
        }
    }
    let l_max = levels.iter().flatten().copied().max();
    Ok(LevelReport {
        levels,
        l_max,
        x_max: l_max.map(|l| 0.5f64.powi(l as i32)),
        threshold,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub n: usize,
    pub d: usize,
    pub eps_lower: f64,
    pub eps_upper: f64,
    /// Expected-round bound `8 log n log(2d/eps_l) / (eps_l log(1/eps_u))`.
    pub eq0_bound: f64,
    /// `log(2d/eps_l) / log(1/eps_u)`.
    pub eq2_ceiling: f64,
    /// [`closed_neighborhood_ceiling`].
    pub closed_neighborhood_ceiling: f64,
    /// `log n log d / (eps_l (1 - eps_u))`, no hidden constant.
    pub corollary_form: f64,
    /// `eps_l / 8`.
    pub elim_prob_floor: f64,
    pub log_base: u32,
}

pub fn round_bound(n: usize, d: usize, params: &ConditionParams) -> Result<BoundReport> {
    if n < 2 || d < 1 {
        return Err(Error::InvalidArgument(format!(
            "round bound needs n >= 2 and d >= 1, got n = {n}, d = {d}"
        )));
    }
    let (el, eu) = (params.eps_lower(), params.eps_upper());
    let log_n = (n as f64).log2();
    let eq2 = eq2_ceiling(d, params);
    Ok(BoundReport {
        n,
        d,
        eps_lower: el,
        eps_upper: eu,
        eq0_bound: 8.0 * log_n * (2.0 * d as f64 / el).log2() / (el * (1.0 / eu).log2()),
        eq2_ceiling: eq2,
        closed_neighborhood_ceiling: closed_neighborhood_ceiling(d, params),
        corollary_form: log_n * (d as f64).log2() / (el * params.eps_upper_gap()),
        elim_prob_floor: el / 8.0,
        log_base: 2,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AgentElimination {
    pub agent: usize,
    pub eliminated: u64,
    pub frequency: f64,
    /// One-sided 99% Wilson lower bound.
    pub lower_bound: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EliminationReport {
    pub l_max: Option<u32>,
    pub floor: f64,
    pub trials: u64,
    pub agents: Vec<AgentElimination>,
    pub passed: bool,
}

/// Minimum number of trials accepted by [`check_elimination_floor`].
pub const MIN_ELIMINATION_TRIALS: u64 = 1000;

/// Runs `trials` independent single rounds from `active` and checks that
/// every agent at level `l_max` leaves the active set with probability at
/// least `eps_l/8`, judged by a 99% lower confidence bound.
///
/// Trial `t` uses seed `derive_seed(seed, t)`, so the result does not depend
/// on how trials are scheduled across threads.
pub fn check_elimination_floor(
    graph: &Graph,
    profile: &StrengthProfile,
    active: &[bool],
    params: &ConditionParams,
    trials: u64,
    seed: u64,
) -> Result<EliminationReport> {
    if trials < MIN_ELIMINATION_TRIALS {
        return Err(Error::InvalidArgument(format!(
            "elimination floor needs at least {MIN_ELIMINATION_TRIALS} trials, got {trials}"
        )));
    }
    let floor = params.eps_lower() / 8.0;
    let levels = compute_levels(graph, profile, active, params)?;
    let top = levels.top_agents();
    if top.is_empty() {
        return Ok(EliminationReport {
            l_max: None,
            floor,
            trials,
            agents: Vec::new(),
            passed: true,
        });
    }
    let n = graph.n();
    let counts = (0..trials)
        .into_par_iter()
        .try_fold(
            || vec![0u64; n],
            |mut acc, t| {
                let outcome = sample_round(
                    graph,
                    profile,
                    active,
                    derive_seed(seed, t),
                    0,
                    WinnerRule::Min,
                    DEFAULT_BIT_BUDGET,
                )?;
                for (a, e) in acc.iter_mut().zip(&outcome.eliminated) {
                    *a += u64::from(*e);
                }
                Ok::<_, Error>(acc)
            },
        )
        .try_reduce(
            || vec![0u64; n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                Ok(a)
            },
        )?;
    let agents: Vec<AgentElimination> = top
        .into_iter()
        .map(|agent| {
            let eliminated = counts[agent];
            let lower_bound = wilson_lower(eliminated, trials, Z_99_ONE_SIDED);
            AgentElimination {
                agent,
                eliminated,
                frequency: eliminated as f64 / trials as f64,
                lower_bound,
                passed: lower_bound >= floor,
            }
        })
        .collect();
    Ok(EliminationReport {
        l_max: levels.l_max,
        floor,
        trials,
        passed: agents.iter().all(|a| a.passed),
        agents,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{self, CliqueChainSpec, GraphKind};
    use crate::strength::StrengthDistribution;
    use proptest::prelude::*;

    fn qh() -> ConditionParams {
        ConditionParams::quarter_half()
    }

    fn all(n: usize) -> Vec<bool> {
        vec![true; n]
    }

    #[test]
    fn neighborhood_totals() {
        let g = Graph::empty(1);
        let t = neighborhood_total_cdf(&g, &StrengthProfile::fair(1), &all(1), 0, 1).unwrap();
        assert_eq!(t, 0.5);

        let star = graph::star(3);
        let p = StrengthProfile::uniform(4, StrengthDistribution::biased_bits(0.25).unwrap());
        assert_eq!(
            neighborhood_total_cdf(&star, &p, &all(4), 0, 1).unwrap(),
            1.0
        );
        let exact_t = neighborhood_total_cdf_exact(&star, &p, &all(4), 0, 1).unwrap();
        assert_eq!(exact_t, BigRational::from_integer(1.into()));

        let mut active = all(4);
        active[2] = false;
        assert_eq!(
            neighborhood_total_cdf(&star, &p, &active, 0, 0).unwrap(),
            3.0
        );
        assert_eq!(
            neighborhood_total_cdf(&star, &p, &active, 1, 0).unwrap(),
            2.0
        );
    }

    #[test]
    fn isolated_fair_agent_has_level_three() {
        let g = Graph::empty(1);
        let r = compute_levels(&g, &StrengthProfile::fair(1), &all(1), &qh()).unwrap();
        assert_eq!(r.levels, vec![Some(3)]);
        assert_eq!(r.l_max, Some(3));
        assert_eq!(r.x_max, Some(0.125));
        assert_eq!(r.threshold, 0.125);
    }

    #[test]
    fn fair_clique_levels_follow_closed_form() {
        for d in 1..40usize {
            let g = graph::complete(d + 1);
            let r = compute_levels(&g, &StrengthProfile::fair(d + 1), &all(d + 1), &qh()).unwrap();
            // (d+1)/2^l >= 1/8  <=>  l <= log2(8(d+1))
            let expected = (8 * (d + 1)).ilog2();
            assert!(r.levels.iter().all(|l| *l == Some(expected)), "d = {d}");
        }
    }

    #[test]
    fn inactive_agents_have_no_level() {
        let g = graph::path(3);
        let r =
            compute_levels(&g, &StrengthProfile::fair(3), &[true, false, false], &qh()).unwrap();
        assert_eq!(r.levels, vec![Some(3), None, None]);
        let none = compute_levels(&g, &StrengthProfile::fair(3), &[false; 3], &qh()).unwrap();
        assert_eq!(none.l_max, None);
        assert!(none.top_agents().is_empty());
    }

    #[test]
    fn open_neighborhood_ceiling_is_exceeded_by_small_fair_instances() {
        // Both endpoints of a fair edge have t(1/16) = 2/16 = eps_l/2, so
        // their level is 4, above log(2*1/(1/4)) = 3.
        let g = graph::complete(2);
        let r = compute_levels(&g, &StrengthProfile::fair(2), &all(2), &qh()).unwrap();
        assert_eq!(r.l_max, Some(4));
        assert!(f64::from(4) > eq2_ceiling(1, &qh()));
        assert!(f64::from(4) <= closed_neighborhood_ceiling(1, &qh()));

        let s = graph::star(7);
        let r = compute_levels(&s, &StrengthProfile::fair(8), &all(8), &qh()).unwrap();
        assert_eq!(r.levels[0], Some(6));
        assert!(6.0 > eq2_ceiling(7, &qh()));
        assert!(6.0 <= closed_neighborhood_ceiling(7, &qh()));
    }

    #[test]
    fn tabulated_profiles_are_bounded_by_their_table() {
        let g = Graph::empty(1);
        let short = StrengthDistribution::tabulated(vec![1.0, 0.5]).unwrap();
        let err = compute_levels(&g, &StrengthProfile::uniform(1, short), &all(1), &qh());
        assert!(matches!(err, Err(Error::LevelOutOfRange { max: 1, .. })));
        let long = StrengthDistribution::tabulated(vec![1.0, 0.5, 0.25, 0.125, 0.0625]).unwrap();
        let r = compute_levels(&g, &StrengthProfile::uniform(1, long), &all(1), &qh()).unwrap();
        assert_eq!(r.l_max, Some(3));
    }

    #[test]
    fn flat_distributions_overflow_the_level_search() {
        let g = Graph::empty(1);
        let flat = StrengthDistribution::biased_bits(0.99).unwrap();
        let err = compute_levels(&g, &StrengthProfile::uniform(1, flat), &all(1), &qh());
        assert!(matches!(
            err,
            Err(Error::LevelSearchOverflow { agent: 0, .. })
        ));
    }

    #[test]
    fn bound_examples() {
        let r = round_bound(2, 1, &qh()).unwrap();
        assert!((r.eq0_bound - 96.0).abs() < 1e-12);
        assert_eq!(r.elim_prob_floor, 1.0 / 32.0);
        assert_eq!(r.eq2_ceiling, 3.0);
        assert_eq!(r.log_base, 2);
        for (n, d) in [(256usize, 8usize), (1000, 17), (4096, 3)] {
            let r = round_bound(n, d, &qh()).unwrap();
            let simplified = 32.0 * (n as f64).log2() * (8.0 * d as f64).log2();
            assert!((r.eq0_bound - simplified).abs() < 1e-9 * simplified);
            assert!((r.corollary_form - 8.0 * (n as f64).log2() * (d as f64).log2()).abs() < 1e-9);
        }
        assert!(round_bound(1, 1, &qh()).is_err());
        assert!(round_bound(2, 0, &qh()).is_err());
    }

    #[test]
    fn corollary_form_vanishes_at_unit_degree() {
        let r = round_bound(16, 1, &qh()).unwrap();
        assert_eq!(r.corollary_form, 0.0);
        assert!(r.eq0_bound > 0.0 && r.eq2_ceiling > 0.0 && r.elim_prob_floor > 0.0);
    }

    #[test]
    fn elimination_floor_on_a_clique_is_certain() {
        let g = graph::complete(4);
        let r = check_elimination_floor(&g, &StrengthProfile::fair(4), &all(4), &qh(), 1000, 1)
            .unwrap();
        assert_eq!(r.agents.len(), 4);
        assert!(r.agents.iter().all(|a| a.frequency == 1.0));
        assert!(r.passed);
    }

    #[test]
    fn elimination_floor_on_path_and_chain() {
        let g = graph::path(5);
        let r = check_elimination_floor(&g, &StrengthProfile::fair(5), &all(5), &qh(), 10_000, 2)
            .unwrap();
        assert!(r.passed, "{r:?}");
        assert!(!r.agents.is_empty());

        let (g, p) = graph::generate(
            &GraphKind::CliqueChain(CliqueChainSpec::with_cliques(16, 3)),
            0,
        )
        .unwrap();
        let p = p.unwrap();
        let r = check_elimination_floor(&g, &p, &all(48), &qh(), 10_000, 3).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn elimination_floor_rejects_few_trials_and_accepts_empty_sets() {
        let g = graph::path(3);
        assert!(
            check_elimination_floor(&g, &StrengthProfile::fair(3), &all(3), &qh(), 999, 0).is_err()
        );
        let r = check_elimination_floor(&g, &StrengthProfile::fair(3), &[false; 3], &qh(), 1000, 0)
            .unwrap();
        assert!(r.agents.is_empty() && r.passed);
    }

    #[test]
    fn elimination_trials_are_schedule_independent() {
        let g = graph::star(5);
        let p = StrengthProfile::uniform_biased(6, 0.25, 0.5, 9).unwrap();
        let a = check_elimination_floor(&g, &p, &all(6), &qh(), 2000, 77).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let b = pool.install(|| check_elimination_floor(&g, &p, &all(6), &qh(), 2000, 77).unwrap());
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]
        #[test]
        fn levels_match_their_definition(
            n in 1usize..40,
            p in 0.0f64..0.6,
            seed in any::<u64>(),
            drop in proptest::collection::vec(any::<bool>(), 40),
            low in 0.25f64..0.5,
        ) {
            let params = qh();
            let g = graph::gnp(n, p, seed).unwrap();
            let profile = StrengthProfile::uniform_biased(n, low, 0.5, seed).unwrap();
            let active: Vec<bool> = (0..n).map(|i| !drop[i]).collect();
            let r = compute_levels(&g, &profile, &active, &params).unwrap();
            let half = exact(params.eps_lower()) / BigRational::from_integer(2.into());
            let one_half = BigRational::new(1.into(), 2.into());
            for i in (0..n).filter(|&i| active[i]) {
                let l = r.levels[i].unwrap();
                prop_assert!(neighborhood_total_cdf_exact(&g, &profile, &active, i, l).unwrap() >= half);
                prop_assert!(neighborhood_total_cdf_exact(&g, &profile, &active, i, l + 1).unwrap() < half);
            }
            if let Some(top) = r.l_max {
                prop_assert!(f64::from(top) <= closed_neighborhood_ceiling(g.max_degree().max(1), &params) + 1e-12);
                for i in (0..n).filter(|&i| active[i]) {
                    let above = neighborhood_total_cdf_exact(&g, &profile, &active, i, top + 1).unwrap();
                    prop_assert!(above < half);
                    let at = neighborhood_total_cdf_exact(&g, &profile, &active, i, top).unwrap();
                    prop_assert!(at < one_half);
                }
            }
        }
    }
}
