//! Finite joint distributions of asset gross returns.
//!
//! A [`ScenarioSet`] is a list of `(probability, returns)` atoms over `K`
//! assets. A safe asset is just a column with the same return in every
//! scenario. Expectations are reduced by pairwise summation in a fixed
//! order so parallel and serial evaluation give identical bits.

use itertools::Itertools;
use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul, CheckedSub, One, ToPrimitive, Zero};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest `K` for which independent assets are enumerated exactly.
pub const MAX_EXACT_ASSETS: usize = 20;

const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReturnsError {
    #[error("too many assets for exact enumeration: {k} > {max}")]
    TooManyAssets { k: usize, max: usize },
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("probabilities sum to {sum}, not 1")]
    ProbabilitySum { sum: f64 },
    #[error("scenario {index}: {reason}")]
    BadScenario { index: usize, reason: String },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

impl From<serde_json::Error> for ReturnsError {
    fn from(e: serde_json::Error) -> Self {
        ReturnsError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

/// One atom of the distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(rename = "probability")]
    pub prob: f64,
    pub returns: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplingMode {
    Exact,
    MonteCarlo { sample_count: usize, seed: u64 },
}

/// The m-correlation family over `n_c` proprietary assets plus a safe one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCorrelationSpec {
    pub n_c: usize,
    pub theta: f64,
    pub m: usize,
    /// High gross return of a proprietary asset.
    pub r_high: f64,
    /// Net risk-free rate; the safe asset returns `1 + r`.
    pub r: f64,
}

/// A finite return distribution with exact or seeded-sample access.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    k: usize,
    support: Vec<Scenario>,
    draws: Vec<Scenario>,
    mode: SamplingMode,
    rational: Option<Vec<Ratio<i128>>>,
}

/// Sum in a fixed binary tree order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

// Exact rational for "nice" floats like 0.8; None when the float is not
// the nearest double of a small fraction.
fn as_rational(x: f64) -> Option<Ratio<i128>> {
    let r = Ratio::<i64>::approximate_float(x)?;
    if *r.denom() > 1_000_000 || r.to_f64()? != x {
        return None;
    }
    Some(Ratio::new(*r.numer() as i128, *r.denom() as i128))
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

impl ScenarioSet {
    /// Validates and wraps an explicit list of atoms.
    pub fn new(scenarios: Vec<Scenario>) -> Result<Self, ReturnsError> {
        let k = scenarios.first().map_or(0, |s| s.returns.len());
        for (index, s) in scenarios.iter().enumerate() {
            if s.returns.len() != k {
                return Err(ReturnsError::BadScenario {
                    index,
                    reason: format!("expected {k} returns, got {}", s.returns.len()),
                });
            }
            if !(0.0..=1.0).contains(&s.prob) {
                return Err(ReturnsError::BadScenario {
                    index,
                    reason: format!("probability {} outside [0, 1]", s.prob),
                });
            }
            if s.returns.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return Err(ReturnsError::BadScenario {
                    index,
                    reason: "returns must be finite and nonnegative".into(),
                });
            }
        }
        let sum = pairwise_sum(&scenarios.iter().map(|s| s.prob).collect::<Vec<_>>());
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(ReturnsError::ProbabilitySum { sum });
        }
        Ok(ScenarioSet {
            k,
            support: scenarios,
            draws: Vec::new(),
            mode: SamplingMode::Exact,
            rational: None,
        })
    }

    /// A single scenario with probability one.
    pub fn deterministic(returns: Vec<f64>) -> Result<Self, ReturnsError> {
        ScenarioSet::new(vec![Scenario { prob: 1.0, returns }])
    }

    /// `K` independent assets, each `r_high` with probability `theta`, else
    /// `r_low`. Scenarios are ordered by the binary pattern with asset 0 as
    /// the most significant bit and "high" before "low".
    pub fn independent_two_point(k: usize, theta: f64, r_high: f64, r_low: f64) -> Result<Self, ReturnsError> {
        if k > MAX_EXACT_ASSETS {
            return Err(ReturnsError::TooManyAssets { k, max: MAX_EXACT_ASSETS });
        }
        ScenarioSet::independent_two_point_each(theta, &vec![r_high; k], r_low)
    }

    /// Like [`Self::independent_two_point`], but asset `a` pays
    /// `r_highs[a]` when high.
    pub fn independent_two_point_each(theta: f64, r_highs: &[f64], r_low: f64) -> Result<Self, ReturnsError> {
        let k = r_highs.len();
        if k == 0 {
            check_two_point(theta, 1.0, 0.0)?;
        }
        for &h in r_highs {
            check_two_point(theta, h, r_low)?;
        }
        if k > MAX_EXACT_ASSETS {
            return Err(ReturnsError::TooManyAssets { k, max: MAX_EXACT_ASSETS });
        }
        let rat = as_rational(theta);
        let mut support = Vec::with_capacity(1 << k);
        let mut rational = rat.map(|_| Vec::with_capacity(1 << k));
        for mask in 0..(1usize << k) {
            let mut prob = 1.0;
            let mut exact = Some(Ratio::<i128>::one());
            let mut returns = Vec::with_capacity(k);
            for (a, &r_high) in r_highs.iter().enumerate() {
                let low = mask >> (k - 1 - a) & 1 == 1;
                if low {
                    prob *= 1.0 - theta;
                    returns.push(r_low);
                } else {
                    prob *= theta;
                    returns.push(r_high);
                }
                if let (Some(e), Some(t)) = (exact, rat) {
                    let f = if low { Ratio::one() - t } else { t };
                    exact = e.checked_mul(&f);
                }
            }
            support.push(Scenario { prob, returns });
            match (&mut rational, exact) {
                (Some(v), Some(e)) => v.push(e),
                _ => rational = None,
            }
        }
        Ok(ScenarioSet {
            k,
            support,
            draws: Vec::new(),
            mode: SamplingMode::Exact,
            rational,
        })
    }

    /// Seeded sampling of independent two-point assets; works for any `K`.
    pub fn independent_two_point_sampled(
        k: usize,
        theta: f64,
        r_high: f64,
        r_low: f64,
        sample_count: usize,
        seed: u64,
    ) -> Result<Self, ReturnsError> {
        check_two_point(theta, r_high, r_low)?;
        if sample_count == 0 {
            return Err(ReturnsError::InvalidSpec("sample_count must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = 1.0 / sample_count as f64;
        let draws = (0..sample_count)
            .map(|_| Scenario {
                prob: w,
                returns: (0..k)
                    .map(|_| if rng.gen::<f64>() < theta { r_high } else { r_low })
                    .collect(),
            })
            .collect();
        Ok(ScenarioSet {
            k,
            support: Vec::new(),
            draws,
            mode: SamplingMode::MonteCarlo { sample_count, seed },
            rational: None,
        })
    }

    /// The m-correlation family: all proprietary assets pay `R` with
    /// probability `1 - n_c(1-θ)/m`; otherwise a uniformly chosen m-subset
    /// pays 0 and the rest pay `R`. Asset `b < n_c` belongs to core bank
    /// `b`; asset `n_c` is safe with return `1 + r`. Failure subsets follow
    /// lexicographic order.
    pub fn m_correlated(spec: &MCorrelationSpec) -> Result<Self, ReturnsError> {
        let MCorrelationSpec { n_c, theta, m, r_high, r } = *spec;
        if n_c == 0 || m == 0 || m > n_c {
            return Err(ReturnsError::InvalidSpec(format!("need 1 <= m <= n_c, got m={m}, n_c={n_c}")));
        }
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(ReturnsError::InvalidSpec(format!("theta {theta} outside (0, 1]")));
        }
        let fail_mass = n_c as f64 * (1.0 - theta) / m as f64;
        if fail_mass > 1.0 + PROB_TOL {
            return Err(ReturnsError::InvalidSpec(format!(
                "theta {theta} below 1 - m/n_c = {}",
                1.0 - m as f64 / n_c as f64
            )));
        }
        if !(theta * r_high > 1.0 + r) || !(r > -1.0) {
            return Err(ReturnsError::InvalidSpec(format!(
                "need theta*R > 1+r, got theta*R={} and 1+r={}",
                theta * r_high,
                1.0 + r
            )));
        }
        let subsets = binomial(n_c, m);
        let each = fail_mass / subsets as f64;
        let safe = 1.0 + r;
        let mut support = Vec::with_capacity(subsets as usize + 1);
        let mut all_high = vec![r_high; n_c];
        all_high.push(safe);
        support.push(Scenario { prob: (1.0 - fail_mass).max(0.0), returns: all_high });
        for fail in (0..n_c).combinations(m) {
            let mut ret = vec![r_high; n_c];
            for &b in &fail {
                ret[b] = 0.0;
            }
            ret.push(safe);
            support.push(Scenario { prob: each, returns: ret });
        }
        let rational = as_rational(theta).and_then(|t| {
            let mass = Ratio::from_integer(n_c as i128)
                .checked_mul(&(Ratio::one() - t))?
                .checked_mul(&Ratio::new(1, m as i128))?;
            let each = mass.checked_mul(&Ratio::new(1, subsets as i128))?;
            let mut v = vec![Ratio::<i128>::one().checked_sub(&mass)?];
            v.extend(std::iter::repeat(each).take(subsets as usize));
            Some(v)
        });
        Ok(ScenarioSet {
            k: n_c + 1,
            support,
            draws: Vec::new(),
            mode: SamplingMode::Exact,
            rational,
        })
    }

    /// Appends a safe asset column paying `gross` in every scenario.
    pub fn with_safe_asset(mut self, gross: f64) -> Self {
        for s in self.support.iter_mut().chain(self.draws.iter_mut()) {
            s.returns.push(gross);
        }
        self.k += 1;
        self
    }

    /// Switches to seeded Monte Carlo: `sample_count` categorical draws from
    /// the support, each weighted `1 / sample_count`.
    pub fn with_monte_carlo(mut self, sample_count: usize, seed: u64) -> Result<Self, ReturnsError> {
        if sample_count == 0 {
            return Err(ReturnsError::InvalidSpec("sample_count must be positive".into()));
        }
        if self.support.is_empty() {
            return Err(ReturnsError::InvalidSpec("no enumerable support to resample".into()));
        }
        let index = WeightedIndex::new(self.support.iter().map(|s| s.prob))
            .map_err(|e| ReturnsError::InvalidSpec(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = 1.0 / sample_count as f64;
        self.draws = (0..sample_count)
            .map(|_| Scenario {
                prob: w,
                returns: self.support[index.sample(&mut rng)].returns.clone(),
            })
            .collect();
        self.mode = SamplingMode::MonteCarlo { sample_count, seed };
        Ok(self)
    }

    /// Number of assets.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    /// The exact support (empty for directly sampled sets).
    pub fn support(&self) -> &[Scenario] {
        &self.support
    }

    /// The atoms expectations run over: the support in exact mode, the
    /// weighted draws in Monte Carlo mode.
    pub fn points(&self) -> &[Scenario] {
        match self.mode {
            SamplingMode::Exact => &self.support,
            SamplingMode::MonteCarlo { .. } => &self.draws,
        }
    }

    /// Exact rational probabilities of the support, when the constructor
    /// inputs were simple fractions.
    pub fn rational_probs(&self) -> Option<&[Ratio<i128>]> {
        self.rational.as_deref()
    }

    /// Smallest and largest return over all points and assets.
    pub fn return_range(&self) -> (f64, f64) {
        self.points()
            .iter()
            .flat_map(|s| s.returns.iter().copied())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
    }

    /// `E[f(p)]`, reduced pairwise.
    pub fn expectation(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let terms: Vec<f64> = self.points().iter().map(|s| s.prob * f(&s.returns)).collect();
        pairwise_sum(&terms)
    }

    /// Parallel `E[f(p)]`; bit-identical to [`Self::expectation`].
    pub fn par_expectation(&self, f: impl Fn(&[f64]) -> f64 + Sync) -> f64 {
        let terms: Vec<f64> = self.points().par_iter().map(|s| s.prob * f(&s.returns)).collect();
        pairwise_sum(&terms)
    }

    /// Sample mean and its standard error. In exact mode the error is 0.
    pub fn expectation_with_error(&self, f: impl Fn(&[f64]) -> f64) -> (f64, f64) {
        let mean = self.expectation(&f);
        match self.mode {
            SamplingMode::Exact => (mean, 0.0),
            SamplingMode::MonteCarlo { sample_count, .. } => {
                let sq: Vec<f64> = self.draws.iter().map(|s| (f(&s.returns) - mean).powi(2)).collect();
                let n = sample_count as f64;
                let var = if sample_count > 1 { pairwise_sum(&sq) / (n - 1.0) } else { 0.0 };
                (mean, (var / n).sqrt())
            }
        }
    }

    /// Parses a JSON list of `{probability, returns}`.
    pub fn from_json(text: &str) -> Result<Self, ReturnsError> {
        let scenarios: Vec<Scenario> = serde_json::from_str(text)?;
        ScenarioSet::new(scenarios)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self.points()).expect("scenarios serialize")
    }
}

fn check_two_point(theta: f64, r_high: f64, r_low: f64) -> Result<(), ReturnsError> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(ReturnsError::InvalidSpec(format!("theta {theta} outside (0, 1)")));
    }
    if !(r_high > r_low && r_low >= 0.0) || !r_high.is_finite() {
        return Err(ReturnsError::InvalidSpec(format!(
            "need R_high > R_low >= 0, got {r_high} and {r_low}"
        )));
    }
    Ok(())
}

/// Sums rational probabilities exactly; `None` on overflow.
pub fn rational_sum<'a>(xs: impl IntoIterator<Item = &'a Ratio<i128>>) -> Option<Ratio<i128>> {
    xs.into_iter().try_fold(Ratio::zero(), |acc, x| acc.checked_add(x))
}
