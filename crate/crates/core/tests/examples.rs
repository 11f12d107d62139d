//! Worked examples checked end to end through the public API.

use mixed_mis::experiments::{neighborhood_examples, NeighborhoodConfig};
use mixed_mis::graph::{complete, star, StrengthProfile};
use mixed_mis::oracle::{exact_round, DEFAULT_DEPTH_CAP};
use mixed_mis::strength::{ConditionParams, StrengthDistribution};
use mixed_mis::theory::{closed_neighborhood_ceiling, compute_levels, eq2_ceiling};

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Probability that a center with bias `qc` draws a smaller value than all
/// `d` leaves with bias `ql`, by conditioning on the first bit.
fn star_center_wins(qc: f64, ql: f64, d: usize) -> f64 {
    let mut f = vec![1.0];
    for k in 1..=d {
        let below: f64 = (0..k)
            .map(|m| binomial(k, m) * ql.powi(m as i32) * (1.0 - ql).powi((k - m) as i32) * f[m])
            .sum();
        let stay = qc * ql.powi(k as i32) + (1.0 - qc) * (1.0 - ql).powi(k as i32);
        f.push(qc * below / (1.0 - stay));
    }
    f[d]
}

fn star_profile(d: usize, qc: f64, ql: f64) -> StrengthProfile {
    let dist = |q: f64| StrengthDistribution::biased_bits(q).unwrap();
    StrengthProfile::from_distributions(
        std::iter::once(dist(qc))
            .chain((0..d).map(|_| dist(ql)))
            .collect(),
    )
}

/// Center-join probabilities recorded as ground truth.
const STAR_TABLE: [(usize, f64, f64, f64); 8] = [
    (4, 0.5, 0.5, 0.2),
    (4, 0.25, 0.5, 0.050892857142857),
    (4, 0.5, 0.25, 0.468532769556025),
    (4, 0.25, 0.25, 0.2),
    (7, 0.5, 0.5, 0.125),
    (7, 0.25, 0.5, 0.021196510119954),
    (7, 0.5, 0.25, 0.365372371867586),
    (7, 0.25, 0.25, 0.125),
];

#[test]
fn star_table_matches_oracle_and_recursion() {
    for (d, qc, ql, want) in STAR_TABLE {
        let g = star(d);
        let exact = exact_round(
            &g,
            &star_profile(d, qc, ql),
            &vec![true; d + 1],
            DEFAULT_DEPTH_CAP,
        )
        .unwrap();
        assert!(
            (exact.join[0] - want).abs() < 1e-12,
            "d={d} qc={qc} ql={ql}: {}",
            exact.join[0]
        );
        assert!((star_center_wins(qc, ql, d) - want).abs() < 1e-12);
    }
}

#[test]
fn neighborhood_summary_reports_the_table() {
    let config = NeighborhoodConfig {
        degrees: vec![4, 7],
        strong: 0.5,
        weak: 0.25,
        ratio_min: 0.25,
        ratio_max: 4.0,
    };
    let summary = neighborhood_examples(&config, &ConditionParams::quarter_half()).unwrap();
    assert!(summary.passed);
    assert_eq!(summary.rows.len(), 8);
    for (row, (d, qc, ql, want)) in summary.rows.iter().zip(STAR_TABLE) {
        assert_eq!((row.d, row.center_q, row.leaf_q), (d, qc, ql));
        assert!((row.center_join - want).abs() < 1e-12);
    }
}

#[test]
fn fair_cliques_join_with_probability_one_over_size() {
    for k in 1..=8 {
        let exact = exact_round(
            &complete(k),
            &StrengthProfile::fair(k),
            &vec![true; k],
            DEFAULT_DEPTH_CAP,
        )
        .unwrap();
        assert!((exact.any_join - 1.0).abs() < 1e-12);
        for p in &exact.join {
            assert!((p - 1.0 / k as f64).abs() < 1e-12);
        }
    }
}

#[test]
fn single_edge_exceeds_open_neighborhood_ceiling() {
    let params = ConditionParams::quarter_half();
    let report = compute_levels(
        &complete(2),
        &StrengthProfile::fair(2),
        &[true, true],
        &params,
    )
    .unwrap();
    // Two fair agents: the closed-neighborhood total at level 4 is 2/16 >= 1/8.
    assert_eq!(report.l_max, Some(4));
    assert_eq!(eq2_ceiling(1, &params), 3.0);
    assert!(f64::from(report.l_max.unwrap()) <= closed_neighborhood_ceiling(1, &params));
}
