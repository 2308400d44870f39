//! Sampling, stopping and recommendation rules.
//!
//! A [`Policy`] is an immutable blueprint: every decision is a function of
//! the [`HistoryState`] alone, so one policy value can drive any number of
//! concurrent episodes.

use thiserror::Error;

use crate::arms::{self, Arm, ArmFamily, BanditInstance, Weights, WeightsError};
use crate::complexity::{self, Direction, SolverError, SolverOptions};

/// Solver tolerance used when recomputing the target allocation each step.
pub const TRACKING_SOLVER_TOLERANCE: f64 = 1e-6;

/// Default cap on the stopping time of fixed-confidence policies.
pub const DEFAULT_MAX_STEPS: u64 = 10_000_000;

/// Empirical Bernoulli means are clamped into `[EPS, 1 - EPS]` before solving.
const BERNOULLI_MEAN_CLAMP: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("policy is configured for {expected} arms but the history has {found}")]
    ArmCount { expected: usize, found: usize },
    #[error("sigma-proportional sampling needs exactly two arms, got {0}")]
    NotTwoArms(usize),
    #[error("variance {0} is not a positive finite number")]
    InvalidVariance(f64),
    #[error("confidence level {0} must lie in (0, 1)")]
    InvalidDelta(f64),
    #[error("policy returned arm {arm} for an instance with {k} arms")]
    ArmOutOfRange { arm: usize, k: usize },
    #[error("policy `{0}` has no stopping rule")]
    NoStoppingRule(&'static str),
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Pull counts and observation sums after `t` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryState {
    t: u64,
    counts: Vec<u64>,
    sums: Vec<f64>,
}

impl HistoryState {
    pub fn new(k: usize) -> Self {
        Self {
            t: 0,
            counts: vec![0; k],
            sums: vec![0.0; k],
        }
    }

    /// Builds a state from explicit counts and sums (`t` is their total count).
    pub fn from_parts(counts: Vec<u64>, sums: Vec<f64>) -> Self {
        assert_eq!(counts.len(), sums.len());
        Self {
            t: counts.iter().sum(),
            counts,
            sums,
        }
    }

    pub fn record(&mut self, arm: usize, observation: f64) {
        self.t += 1;
        self.counts[arm] += 1;
        self.sums[arm] += observation;
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn empirical_mean(&self, arm: usize) -> Option<f64> {
        (self.counts[arm] > 0).then(|| self.sums[arm] / self.counts[arm] as f64)
    }

    pub fn all_sampled(&self) -> bool {
        self.counts.iter().all(|&n| n > 0)
    }

    fn least_sampled(&self) -> usize {
        argmin_lowest(self.counts.iter().copied())
    }
}

fn argmin_lowest(values: impl Iterator<Item = u64>) -> usize {
    let mut best = (0, u64::MAX);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Arm with the largest empirical mean; unsampled arms count as `-inf`,
/// ties go to the lowest index.
pub fn empirical_best(state: &HistoryState) -> usize {
    let mut best = 0;
    let mut best_mean = f64::NEG_INFINITY;
    for i in 0..state.k() {
        let mean = state.empirical_mean(i).unwrap_or(f64::NEG_INFINITY);
        if mean > best_mean {
            best = i;
            best_mean = mean;
        }
    }
    best
}

/// Deterministic tracking: `argmax_i (t + 1) w_i - N_i`, ties to the lowest index.
pub fn track(weights: &[f64], state: &HistoryState) -> usize {
    let next = (state.t() + 1) as f64;
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, (&w, &n)) in weights.iter().zip(state.counts()).enumerate() {
        let score = next * w - n as f64;
        if score > best_score {
            best = i;
            best_score = score;
        }
    }
    best
}

pub trait Policy: Send + Sync {
    fn name(&self) -> &'static str;

    /// Arm to pull at step `state.t()`.
    fn next_arm(&self, state: &HistoryState) -> Result<usize, PolicyError>;

    /// Stopping rule; only fixed-confidence policies have one.
    fn should_stop(&self, _state: &HistoryState) -> Result<bool, PolicyError> {
        Err(PolicyError::NoStoppingRule(self.name()))
    }

    fn recommend(&self, state: &HistoryState) -> usize {
        empirical_best(state)
    }

    /// Confidence level `δ` of a fixed-confidence policy.
    fn confidence(&self) -> Option<f64> {
        None
    }

    /// Hard cap on the stopping time, if the policy sets one.
    fn max_steps(&self) -> Option<u64> {
        None
    }
}

/// Round-robin sampling.
#[derive(Debug, Clone, Copy, Default)]
pub struct Uniform;

pub fn uniform_policy() -> Uniform {
    Uniform
}

impl Policy for Uniform {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn next_arm(&self, state: &HistoryState) -> Result<usize, PolicyError> {
        Ok((state.t() % state.k() as u64) as usize)
    }
}

/// Tracks a fixed allocation; counts stay within `k` of `n w_i`.
#[derive(Debug, Clone)]
pub struct FixedWeight {
    weights: Weights,
    label: &'static str,
}

pub fn fixed_weight_policy(weights: Weights) -> FixedWeight {
    FixedWeight {
        weights,
        label: "fixed_weight",
    }
}

impl FixedWeight {
    pub fn weights(&self) -> &Weights {
        &self.weights
    }
}

impl Policy for FixedWeight {
    fn name(&self) -> &'static str {
        self.label
    }

    fn next_arm(&self, state: &HistoryState) -> Result<usize, PolicyError> {
        if state.k() != self.weights.len() {
            return Err(PolicyError::ArmCount {
                expected: self.weights.len(),
                found: state.k(),
            });
        }
        Ok(track(self.weights.as_slice(), state))
    }
}

/// Two-armed allocation proportional to the standard deviations,
/// `(σ_1 / (σ_1 + σ_2), σ_2 / (σ_1 + σ_2))`. Takes the variances.
pub fn sigma_proportional_policy(variances: &[f64]) -> Result<FixedWeight, PolicyError> {
    if variances.len() != 2 {
        return Err(PolicyError::NotTwoArms(variances.len()));
    }
    for &v in variances {
        if !(v.is_finite() && v > 0.0) {
            return Err(PolicyError::InvalidVariance(v));
        }
    }
    let sd: Vec<f64> = variances.iter().map(|v| v.sqrt()).collect();
    Ok(FixedWeight {
        weights: Weights::normalized(sd)?,
        label: "sigma_proportional",
    })
}

/// What a fixed-confidence policy knows about the arms: the family and,
/// for Gaussians, the variances. Never the means.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilyModel {
    Gaussian { variances: Vec<f64> },
    Bernoulli { k: usize },
}

impl FamilyModel {
    pub fn from_instance(instance: &BanditInstance) -> Self {
        match instance.family() {
            ArmFamily::GaussianKnownVariance => FamilyModel::Gaussian {
                variances: instance
                    .variances()
                    .expect("gaussian instance has variances"),
            },
            ArmFamily::Bernoulli => FamilyModel::Bernoulli { k: instance.k() },
        }
    }

    pub fn k(&self) -> usize {
        match self {
            FamilyModel::Gaussian { variances } => variances.len(),
            FamilyModel::Bernoulli { k } => *k,
        }
    }

    /// Arms at the empirical means; requires every arm sampled.
    fn empirical_arms(&self, state: &HistoryState) -> Vec<Arm> {
        (0..state.k())
            .map(|i| {
                let mean = state.empirical_mean(i).unwrap_or(0.0);
                match self {
                    FamilyModel::Gaussian { variances } => Arm::gaussian(mean, variances[i]),
                    FamilyModel::Bernoulli { .. } => {
                        Arm::bernoulli(mean.clamp(BERNOULLI_MEAN_CLAMP, 1.0 - BERNOULLI_MEAN_CLAMP))
                    }
                }
            })
            .collect()
    }
}

/// Track-and-Stop: D-tracking of the plug-in optimal allocation with forced
/// exploration, a generalized likelihood ratio stopping rule, and the
/// empirical best arm as recommendation.
#[derive(Debug, Clone)]
pub struct TrackAndStop {
    delta: f64,
    model: FamilyModel,
    solver: SolverOptions,
    max_steps: u64,
}

pub fn track_and_stop_policy(delta: f64, model: FamilyModel) -> Result<TrackAndStop, PolicyError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(PolicyError::InvalidDelta(delta));
    }
    if let FamilyModel::Gaussian { variances } = &model {
        if let Some(&v) = variances.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(PolicyError::InvalidVariance(v));
        }
    }
    Ok(TrackAndStop {
        delta,
        model,
        solver: SolverOptions::with_tol(TRACKING_SOLVER_TOLERANCE),
        max_steps: DEFAULT_MAX_STEPS,
    })
}

impl TrackAndStop {
    pub fn with_max_steps(mut self, max_steps: u64) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `β(t, δ) = ln((1 + ln(t + 1)) / δ)`.
    pub fn threshold(&self, t: u64) -> f64 {
        ((1.0 + ((t + 1) as f64).ln()) / self.delta).ln()
    }

    /// GLR statistic `min_{j ≠ î} N_î d(θ̂_î, x) + N_j d(θ̂_j, x)`; `None`
    /// until every arm is sampled or while the empirical best is tied.
    pub fn glr_statistic(&self, state: &HistoryState) -> Option<f64> {
        if !state.all_sampled() {
            return None;
        }
        let arms = self.model.empirical_arms(state);
        let best = arms::best_arm(&arms).ok()?;
        let counts: Vec<f64> = state.counts().iter().map(|&n| n as f64).collect();
        Some(complexity::objective_for_arms(
            &arms,
            best,
            &counts,
            Direction::FixedConfidence,
        ))
    }

    fn check_arms(&self, state: &HistoryState) -> Result<(), PolicyError> {
        if state.k() != self.model.k() {
            return Err(PolicyError::ArmCount {
                expected: self.model.k(),
                found: state.k(),
            });
        }
        Ok(())
    }
}

impl Policy for TrackAndStop {
    fn name(&self) -> &'static str {
        "track_and_stop"
    }

    fn next_arm(&self, state: &HistoryState) -> Result<usize, PolicyError> {
        self.check_arms(state)?;
        if let Some(unsampled) = state.counts().iter().position(|&n| n == 0) {
            return Ok(unsampled);
        }
        let k = state.k();
        let floor = (state.t() as f64).sqrt() - k as f64 / 2.0;
        if state.counts().iter().any(|&n| (n as f64) < floor) {
            return Ok(state.least_sampled());
        }
        let arms = self.model.empirical_arms(state);
        let Ok(best) = arms::best_arm(&arms) else {
            return Ok(state.least_sampled());
        };
        let target = complexity::solve_arms(&arms, best, Direction::FixedConfidence, &self.solver)?;
        Ok(track(target.optimal_weights.as_slice(), state))
    }

    fn should_stop(&self, state: &HistoryState) -> Result<bool, PolicyError> {
        self.check_arms(state)?;
        Ok(self
            .glr_statistic(state)
            .is_some_and(|z| z > self.threshold(state.t())))
    }

    fn confidence(&self) -> Option<f64> {
        Some(self.delta)
    }

    fn max_steps(&self) -> Option<u64> {
        Some(self.max_steps)
    }
}
