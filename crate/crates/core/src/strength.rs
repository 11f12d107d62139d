//! Per-agent strength distributions and the decay conditions on their CDFs.
//!
//! Every distribution is described only at dyadic points: `cdf_dyadic(l)` is
//! the probability that a sample is at most `1/2^l`, which for bit-generated
//! values is the probability that the first `l` bits are all zero. The
//! bit-generable kinds (fair bits, biased bits, per-position schedules) are
//! evaluated in exact rational arithmetic; tabulated CDFs are analysis-only
//! and compared with a `1e-12` tolerance.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Default number of levels inspected by [`check_conditions`].
pub const DEFAULT_CHECK_DEPTH: u32 = 64;

/// Slack used for comparisons involving tabulated CDF values.
pub const TABULATED_TOLERANCE: f64 = 1e-12;

/// Lower and upper decay constants of conditions (L) and (U).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct ConditionParams {
    eps_lower: f64,
    eps_upper: f64,
}

#[derive(Deserialize)]
struct RawParams {
    eps_lower: f64,
    eps_upper: f64,
}

impl TryFrom<RawParams> for ConditionParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        ConditionParams::new(raw.eps_lower, raw.eps_upper)
    }
}

impl ConditionParams {
    pub fn new(eps_lower: f64, eps_upper: f64) -> Result<Self> {
        if !(eps_lower > 0.0 && eps_lower <= eps_upper && eps_upper < 1.0) {
            return Err(Error::InvalidParams(format!(
                "need 0 < eps_lower <= eps_upper < 1, got eps_lower={eps_lower}, eps_upper={eps_upper}"
            )));
        }
        Ok(ConditionParams {
            eps_lower,
            eps_upper,
        })
    }

    /// The pair (1/4, 1/2) used for the worked bounds.
    pub fn quarter_half() -> Self {
        ConditionParams {
            eps_lower: 0.25,
            eps_upper: 0.5,
        }
    }

    pub fn eps_lower(&self) -> f64 {
        self.eps_lower
    }

    pub fn eps_upper(&self) -> f64 {
        self.eps_upper
    }

    /// Gap between `eps_upper` and one.
    pub fn eps_upper_gap(&self) -> f64 {
        1.0 - self.eps_upper
    }

    /// Whether a per-bit zero probability lies in `[eps_lower, eps_upper]`.
    pub fn admits_bias(&self, q: f64) -> bool {
        q >= self.eps_lower && q <= self.eps_upper
    }
}

/// Sampling law of one agent's per-round value in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "RawDistribution")]
pub enum StrengthDistribution {
    /// Every bit is zero with probability 1/2: the uniform distribution.
    FairBits,
    /// Every bit is zero with probability `q`.
    BiasedBits { q: f64 },
    /// Bit `k` is zero with probability `biases[k]`; the last bias repeats
    /// for every later position.
    BitSchedule { biases: Vec<f64> },
    /// CDF values at `1/2^l` for `l = 0..cdf.len()`. Not samplable.
    Tabulated { cdf: Vec<f64> },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawDistribution {
    FairBits,
    BiasedBits { q: f64 },
    BitSchedule { biases: Vec<f64> },
    Tabulated { cdf: Vec<f64> },
}

impl TryFrom<RawDistribution> for StrengthDistribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        match raw {
            RawDistribution::FairBits => Ok(StrengthDistribution::FairBits),
            RawDistribution::BiasedBits { q } => StrengthDistribution::biased_bits(q),
            RawDistribution::BitSchedule { biases } => {
                validate_schedule(&biases)?;
                Ok(StrengthDistribution::BitSchedule { biases })
            }
            RawDistribution::Tabulated { cdf } => StrengthDistribution::tabulated(cdf),
        }
    }
}

fn is_probability(p: f64) -> bool {
    (0.0..=1.0).contains(&p)
}

fn validate_schedule(biases: &[f64]) -> Result<()> {
    if biases.is_empty() {
        return Err(Error::InvalidDistribution(
            "bit schedule needs at least one bias".into(),
        ));
    }
    if let Some(bad) = biases.iter().find(|q| !is_probability(**q)) {
        return Err(Error::InvalidDistribution(format!(
            "bit schedule bias {bad} is not a probability"
        )));
    }
    Ok(())
}

impl StrengthDistribution {
    pub fn fair_bits() -> Self {
        StrengthDistribution::FairBits
    }

    pub fn biased_bits(q: f64) -> Result<Self> {
        if !is_probability(q) {
            return Err(Error::InvalidDistribution(format!(
                "bias {q} is not a probability"
            )));
        }
        Ok(StrengthDistribution::BiasedBits { q })
    }

    /// Per-position biases, each of which must lie in `[eps_lower, eps_upper]`.
    pub fn bit_schedule(biases: Vec<f64>, params: &ConditionParams) -> Result<Self> {
        validate_schedule(&biases)?;
        if let Some((k, q)) = biases
            .iter()
            .enumerate()
            .find(|(_, q)| !params.admits_bias(**q))
        {
            return Err(Error::InvalidDistribution(format!(
                "bias {q} at position {k} is outside [{}, {}]",
                params.eps_lower(),
                params.eps_upper()
            )));
        }
        Ok(StrengthDistribution::BitSchedule { biases })
    }

    /// Tabulated CDF at levels `0..=L`; must start at 1 and never increase.
    pub fn tabulated(cdf: Vec<f64>) -> Result<Self> {
        match cdf.first() {
            Some(&1.0) => {}
            Some(&first) => {
                return Err(Error::InvalidDistribution(format!(
                    "tabulated cdf must equal 1 at level 0, got {first}"
                )))
            }
            None => {
                return Err(Error::InvalidDistribution(
                    "tabulated cdf needs at least the level-0 value".into(),
                ))
            }
        }
        if let Some(bad) = cdf.iter().find(|p| !is_probability(**p)) {
            return Err(Error::InvalidDistribution(format!(
                "tabulated value {bad} is not a probability"
            )));
        }
        if let Some(w) = cdf.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::InvalidDistribution(format!(
                "tabulated cdf increases between levels {w} and {}",
                w + 1
            )));
        }
        Ok(StrengthDistribution::Tabulated { cdf })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            StrengthDistribution::FairBits => "fair_bits",
            StrengthDistribution::BiasedBits { .. } => "biased_bits",
            StrengthDistribution::BitSchedule { .. } => "bit_schedule",
            StrengthDistribution::Tabulated { .. } => "tabulated",
        }
    }

    pub fn is_bit_generable(&self) -> bool {
        !matches!(self, StrengthDistribution::Tabulated { .. })
    }

    /// Largest level the distribution can be queried at, if bounded.
    pub fn max_level(&self) -> Option<u32> {
        match self {
            StrengthDistribution::Tabulated { cdf } => Some(cdf.len() as u32 - 1),
            _ => None,
        }
    }

    /// Probability that bit `position` (0-based, most significant first) is 0.
    pub fn zero_probability(&self, position: u32) -> Result<f64> {
        match self {
            StrengthDistribution::FairBits => Ok(0.5),
            StrengthDistribution::BiasedBits { q } => Ok(*q),
            StrengthDistribution::BitSchedule { biases } => {
                Ok(biases[(position as usize).min(biases.len() - 1)])
            }
            StrengthDistribution::Tabulated { .. } => {
                Err(Error::UnsupportedSampling(self.kind_name()))
            }
        }
    }

    fn check_level(&self, level: u32) -> Result<()> {
        match self.max_level() {
            Some(max) if level > max => Err(Error::LevelOutOfRange { level, max }),
            _ => Ok(()),
        }
    }

    /// `Pr[sample <= 1/2^level]` as a float.
    pub fn cdf_dyadic(&self, level: u32) -> Result<f64> {
        self.check_level(level)?;
        Ok(match self {
            StrengthDistribution::FairBits => 0.5f64.powi(level as i32),
            StrengthDistribution::BiasedBits { q } => q.powi(level as i32),
            StrengthDistribution::BitSchedule { biases } => {
                let explicit = (level as usize).min(biases.len());
                let head: f64 = biases[..explicit].iter().product();
                let tail = level as usize - explicit;
                head * biases[biases.len() - 1].powi(tail as i32)
            }
            StrengthDistribution::Tabulated { cdf } => cdf[level as usize],
        })
    }

    /// `Pr[sample <= 1/2^level]` in exact rational arithmetic.
    ///
    /// For tabulated kinds this is the exact value of the stored float.
    pub fn cdf_dyadic_exact(&self, level: u32) -> Result<BigRational> {
        self.check_level(level)?;
        Ok(match self {
            StrengthDistribution::FairBits => {
                BigRational::new(BigInt::one(), BigInt::one() << level as usize)
            }
            StrengthDistribution::BiasedBits { q } => pow(&exact(*q), level),
            StrengthDistribution::BitSchedule { biases } => {
                let mut acc = BigRational::one();
                for k in 0..level as usize {
                    acc *= exact(biases[k.min(biases.len() - 1)]);
                }
                acc
            }
            StrengthDistribution::Tabulated { cdf } => exact(cdf[level as usize]),
        })
    }
}

/// Exact value of a finite float.
pub fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

fn pow(base: &BigRational, exp: u32) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..exp {
        acc *= base;
    }
    acc
}

/// Free-function form of [`StrengthDistribution::cdf_dyadic`].
pub fn cdf_dyadic(dist: &StrengthDistribution, level: u32) -> Result<f64> {
    dist.cdf_dyadic(level)
}

/// Exact non-negative dyadic rational `mantissa * 2^exponent`.
///
/// Every finite float is one, and products stay dyadic, so the condition
/// checks run without the gcd normalization a general rational would need.
#[derive(Clone, Debug)]
struct Dyadic {
    mantissa: BigUint,
    exponent: i64,
}

impl Dyadic {
    fn one() -> Self {
        Dyadic {
            mantissa: BigUint::one(),
            exponent: 0,
        }
    }

    fn from_f64(x: f64) -> Self {
        debug_assert!(x >= 0.0 && x.is_finite());
        let (mantissa, exponent, _) = num_traits::Float::integer_decode(x);
        Dyadic {
            mantissa: BigUint::from(mantissa),
            exponent: i64::from(exponent),
        }
    }

    fn mul(&self, other: &Dyadic) -> Dyadic {
        Dyadic {
            mantissa: &self.mantissa * &other.mantissa,
            exponent: self.exponent + other.exponent,
        }
    }
}

impl PartialEq for Dyadic {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}

impl Eq for Dyadic {}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let e = self.exponent.min(other.exponent);
        let a = &self.mantissa << (self.exponent - e) as usize;
        let b = &other.mantissa << (other.exponent - e) as usize;
        a.cmp(&b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Lower,
    Upper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LevelCheck {
    pub level: u32,
    pub lower_holds: bool,
    pub upper_holds: bool,
}

/// Outcome of checking (L) and (U) at levels `0..checked_depth`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub checked_depth: u32,
    pub exact: bool,
    pub levels: Vec<LevelCheck>,
    pub passed: bool,
}

impl ConditionReport {
    pub fn first_failure(&self) -> Option<(u32, Condition)> {
        self.levels.iter().find_map(|c| {
            if !c.lower_holds {
                Some((c.level, Condition::Lower))
            } else if !c.upper_holds {
                Some((c.level, Condition::Upper))
            } else {
                None
            }
        })
    }

    pub fn upper_passed(&self) -> bool {
        self.levels.iter().all(|c| c.upper_holds)
    }
}

/// Checks `eps_lower * cdf(l) <= cdf(l+1) <= eps_upper * cdf(l)` for every
/// `l` in `0..max_level`.
pub fn check_conditions(
    dist: &StrengthDistribution,
    params: &ConditionParams,
    max_level: u32,
) -> Result<ConditionReport> {
    if max_level == 0 {
        return Err(Error::InvalidArgument(
            "max_level must be at least 1".into(),
        ));
    }
    dist.check_level(max_level)?;
    let mut levels = Vec::with_capacity(max_level as usize);
    let exact_mode = dist.is_bit_generable();
    if exact_mode {
        let lo = Dyadic::from_f64(params.eps_lower());
        let hi = Dyadic::from_f64(params.eps_upper());
        let mut cur = Dyadic::one();
        for level in 0..max_level {
            let next = cur.mul(&Dyadic::from_f64(dist.zero_probability(level)?));
            levels.push(LevelCheck {
                level,
                lower_holds: lo.mul(&cur) <= next,
                upper_holds: next <= hi.mul(&cur),
            });
            cur = next;
        }
    } else {
        for level in 0..max_level {
            let cur = dist.cdf_dyadic(level)?;
            let next = dist.cdf_dyadic(level + 1)?;
            levels.push(LevelCheck {
                level,
                lower_holds: params.eps_lower() * cur <= next + TABULATED_TOLERANCE,
                upper_holds: next <= params.eps_upper() * cur + TABULATED_TOLERANCE,
            });
        }
    }
    let passed = levels.iter().all(|c| c.lower_holds && c.upper_holds);
    Ok(ConditionReport {
        checked_depth: max_level,
        exact: exact_mode,
        levels,
        passed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayReport {
    pub holds: bool,
    pub first_violation: Option<u32>,
    pub checked_depth: u32,
}

/// Checks `cdf(l) <= eps_upper^l` for every `l <= max_level`.
pub fn decay_upper_bound_check(
    dist: &StrengthDistribution,
    params: &ConditionParams,
    max_level: u32,
) -> Result<DecayReport> {
    dist.check_level(max_level)?;
    let mut first_violation = None;
    if dist.is_bit_generable() {
        let hi = Dyadic::from_f64(params.eps_upper());
        let mut bound = Dyadic::one();
        let mut cur = Dyadic::one();
        for level in 0..=max_level {
            if level > 0 {
                bound = bound.mul(&hi);
                cur = cur.mul(&Dyadic::from_f64(dist.zero_probability(level - 1)?));
            }
            if cur > bound {
                first_violation = Some(level);
                break;
            }
        }
    } else {
        for level in 0..=max_level {
            let bound = params.eps_upper().powi(level as i32);
            if dist.cdf_dyadic(level)? > bound + TABULATED_TOLERANCE {
                first_violation = Some(level);
                break;
            }
        }
    }
    Ok(DecayReport {
        holds: first_violation.is_none(),
        first_violation,
        checked_depth: max_level,
    })
}

/// One agent's value in one round, viewed as an on-demand binary expansion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BitStreamSample {
    pub seed: u64,
    pub owner: usize,
    pub round: u64,
}

impl BitStreamSample {
    pub fn new(seed: u64, owner: usize, round: u64) -> Self {
        BitStreamSample { seed, owner, round }
    }

    pub fn key(&self) -> u64 {
        rng::stream_key(self.seed, self.owner as u64, self.round)
    }

    /// Bit at `position`; the same request always yields the same bit.
    pub fn bit(&self, dist: &StrengthDistribution, position: u32) -> Result<u8> {
        let p = dist.zero_probability(position)?;
        let u = rng::draw(self.key(), position as u64);
        Ok(if rng::is_zero_bit(u, rng::zero_threshold(p)) {
            0
        } else {
            1
        })
    }
}

/// Free-function form of [`BitStreamSample::bit`].
pub fn next_bit(
    sample: &BitStreamSample,
    dist: &StrengthDistribution,
    position: u32,
) -> Result<u8> {
    sample.bit(dist, position)
}
