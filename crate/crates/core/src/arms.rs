//! Arm distributions, bandit instances and points on the probability simplex.
//!
//! Two one-parameter families are supported: Gaussian arms with a known
//! variance (only the mean is unknown) and Bernoulli arms. All arms of an
//! instance belong to the same family, and a valid instance has exactly one
//! arm with the largest mean. Arm indices are 0-based throughout the crate.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Means closer than this are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Tolerance on the sum of a weight vector.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArmError {
    #[error("arm families differ: arm {index} is {found}, expected {expected}")]
    FamilyMismatch {
        index: usize,
        expected: ArmFamily,
        found: ArmFamily,
    },
    #[error("an instance needs at least two arms, got {k}")]
    TooFewArms { k: usize },
    #[error("arm {index} has a non-finite parameter")]
    NonFinite { index: usize },
    #[error("Bernoulli mean {mean} of arm {index} is outside the open interval (0, 1)")]
    BoundaryMean { index: usize, mean: f64 },
    #[error("Gaussian variance {variance} of arm {index} is not positive")]
    NonPositiveVariance { index: usize, variance: f64 },
    #[error("no unique best arm: arms {first} and {second} both attain the maximal mean")]
    NonUniqueBest { first: usize, second: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeightsError {
    #[error("weight vector is empty")]
    Empty,
    #[error("weight {index} is {value}, expected a finite nonnegative number")]
    Negative { index: usize, value: f64 },
    #[error("weights sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArmFamily {
    GaussianKnownVariance,
    Bernoulli,
}

impl fmt::Display for ArmFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArmFamily::GaussianKnownVariance => f.write_str("gaussian"),
            ArmFamily::Bernoulli => f.write_str("bernoulli"),
        }
    }
}

/// A single arm. Gaussian arms carry their known variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Arm {
    Gaussian { mean: f64, variance: f64 },
    Bernoulli { mean: f64 },
}

impl Arm {
    pub fn gaussian(mean: f64, variance: f64) -> Self {
        Arm::Gaussian { mean, variance }
    }

    pub fn bernoulli(mean: f64) -> Self {
        Arm::Bernoulli { mean }
    }

    pub fn family(&self) -> ArmFamily {
        match self {
            Arm::Gaussian { .. } => ArmFamily::GaussianKnownVariance,
            Arm::Bernoulli { .. } => ArmFamily::Bernoulli,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Arm::Gaussian { mean, .. } | Arm::Bernoulli { mean } => mean,
        }
    }

    /// Variance of one observation.
    pub fn variance(&self) -> f64 {
        match *self {
            Arm::Gaussian { variance, .. } => variance,
            Arm::Bernoulli { mean } => mean * (1.0 - mean),
        }
    }

    /// Same family (and known variance), different mean.
    pub fn with_mean(&self, mean: f64) -> Self {
        match *self {
            Arm::Gaussian { variance, .. } => Arm::Gaussian { mean, variance },
            Arm::Bernoulli { .. } => Arm::Bernoulli { mean },
        }
    }

    /// Checks the per-arm invariants. `index` is only used for error reporting.
    pub fn validate(&self, index: usize) -> Result<(), ArmError> {
        match *self {
            Arm::Gaussian { mean, variance } => {
                if !mean.is_finite() || !variance.is_finite() {
                    return Err(ArmError::NonFinite { index });
                }
                if variance <= 0.0 {
                    return Err(ArmError::NonPositiveVariance { index, variance });
                }
            }
            Arm::Bernoulli { mean } => {
                if !mean.is_finite() {
                    return Err(ArmError::NonFinite { index });
                }
                if mean <= 0.0 || mean >= 1.0 {
                    return Err(ArmError::BoundaryMean { index, mean });
                }
            }
        }
        Ok(())
    }

    /// Draws one observation.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Arm::Gaussian { mean, variance } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + variance.sqrt() * z
            }
            Arm::Bernoulli { mean } => {
                if rng.random::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `KL(p || q)` for Bernoulli distributions, with `0 ln 0 = 0`.
///
/// `p` may sit on the boundary of `[0, 1]`; `q` must be strictly inside.
pub fn bernoulli_kl(p: f64, q: f64) -> f64 {
    let term = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    (term(p, q) + term(1.0 - p, 1.0 - q)).max(0.0)
}

/// `KL(N(mean_a, var_a) || N(mean_b, var_b))`.
pub fn gaussian_kl(mean_a: f64, var_a: f64, mean_b: f64, var_b: f64) -> f64 {
    let diff = mean_a - mean_b;
    (0.5 * (var_b / var_a).ln() + (var_a + diff * diff) / (2.0 * var_b) - 0.5).max(0.0)
}

/// Kullback-Leibler divergence `KL(a || b)` between two arms of one family.
pub fn kl(a: &Arm, b: &Arm) -> Result<f64, ArmError> {
    match (*a, *b) {
        (
            Arm::Gaussian {
                mean: ma,
                variance: va,
            },
            Arm::Gaussian {
                mean: mb,
                variance: vb,
            },
        ) => {
            a.validate(0)?;
            b.validate(1)?;
            Ok(gaussian_kl(ma, va, mb, vb))
        }
        (Arm::Bernoulli { mean: p }, Arm::Bernoulli { mean: q }) => {
            a.validate(0)?;
            b.validate(1)?;
            Ok(bernoulli_kl(p, q))
        }
        _ => Err(ArmError::FamilyMismatch {
            index: 1,
            expected: a.family(),
            found: b.family(),
        }),
    }
}

/// Index of the unique largest mean.
pub fn best_arm(arms: &[Arm]) -> Result<usize, ArmError> {
    if arms.is_empty() {
        return Err(ArmError::TooFewArms { k: 0 });
    }
    let mut best = 0;
    for (i, arm) in arms.iter().enumerate().skip(1) {
        if arm.mean() > arms[best].mean() {
            best = i;
        }
    }
    let top = arms[best].mean();
    for (i, arm) in arms.iter().enumerate() {
        if i != best && top - arm.mean() <= TIE_TOLERANCE {
            let (first, second) = if i < best { (i, best) } else { (best, i) };
            return Err(ArmError::NonUniqueBest { first, second });
        }
    }
    Ok(best)
}

/// Checks every instance invariant, reporting the first violation.
pub fn validate(arms: &[Arm]) -> Result<(), ArmError> {
    if arms.len() < 2 {
        return Err(ArmError::TooFewArms { k: arms.len() });
    }
    let family = arms[0].family();
    for (index, arm) in arms.iter().enumerate() {
        if arm.family() != family {
            return Err(ArmError::FamilyMismatch {
                index,
                expected: family,
                found: arm.family(),
            });
        }
        arm.validate(index)?;
    }
    best_arm(arms).map(|_| ())
}

/// A validated bandit instance: `k >= 2` arms of one family with a unique best arm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BanditInstance {
    arms: Vec<Arm>,
    #[serde(skip)]
    best: usize,
}

impl BanditInstance {
    pub fn new(arms: Vec<Arm>) -> Result<Self, ArmError> {
        validate(&arms)?;
        let best = best_arm(&arms)?;
        Ok(Self { arms, best })
    }

    pub fn gaussian(means: &[f64], variances: &[f64]) -> Result<Self, ArmError> {
        Self::new(
            means
                .iter()
                .zip(variances)
                .map(|(&m, &v)| Arm::gaussian(m, v))
                .collect(),
        )
    }

    pub fn bernoulli(means: &[f64]) -> Result<Self, ArmError> {
        Self::new(means.iter().map(|&m| Arm::bernoulli(m)).collect())
    }

    pub fn arms(&self) -> &[Arm] {
        &self.arms
    }

    pub fn arm(&self, index: usize) -> &Arm {
        &self.arms[index]
    }

    pub fn k(&self) -> usize {
        self.arms.len()
    }

    pub fn family(&self) -> ArmFamily {
        self.arms[0].family()
    }

    pub fn best_arm(&self) -> usize {
        self.best
    }

    pub fn means(&self) -> Vec<f64> {
        self.arms.iter().map(Arm::mean).collect()
    }

    /// Known variances, `None` for Bernoulli instances.
    pub fn variances(&self) -> Option<Vec<f64>> {
        match self.family() {
            ArmFamily::GaussianKnownVariance => Some(self.arms.iter().map(Arm::variance).collect()),
            ArmFamily::Bernoulli => None,
        }
    }

    /// Relabels arms: arm `i` of the result is arm `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, ArmError> {
        Self::new(perm.iter().map(|&i| self.arms[i]).collect())
    }
}

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(w: Vec<f64>) -> Result<Self, WeightsError> {
        if w.is_empty() {
            return Err(WeightsError::Empty);
        }
        for (index, &value) in w.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(WeightsError::Negative { index, value });
            }
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(WeightsError::NotNormalized { sum });
        }
        Ok(Self(w))
    }

    /// Rescales a nonnegative vector with positive sum onto the simplex.
    pub fn normalized(w: Vec<f64>) -> Result<Self, WeightsError> {
        if w.is_empty() {
            return Err(WeightsError::Empty);
        }
        for (index, &value) in w.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(WeightsError::Negative { index, value });
            }
        }
        let sum: f64 = w.iter().sum();
        if sum <= 0.0 {
            return Err(WeightsError::NotNormalized { sum });
        }
        Self::new(w.into_iter().map(|x| x / sum).collect())
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for Weights {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}
