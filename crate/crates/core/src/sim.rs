//! Seeded Monte-Carlo estimation of fixed-budget error probabilities and
//! fixed-confidence stopping behaviour, plus the rate regression and the
//! probes built on top of them.
//!
//! # Seeding
//!
//! Every episode owns a seed `derive_seed(master, budget, replication)`
//! (fixed-confidence runs use `budget = u64::MAX`). The episode seed keys a
//! ChaCha8 generator and arm `i` draws from stream `i` of that key, so two
//! policies run on the same seeds see the same per-arm observation sequences.
//! Results are gathered in replication order, which makes every report
//! independent of the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::arms::{Arm, BanditInstance};
use crate::complexity::{self, Direction, SolverError, SolverOptions};
use crate::policy::{
    fixed_weight_policy, uniform_policy, HistoryState, Policy, PolicyError, DEFAULT_MAX_STEPS,
};

/// Two-sided 95% standard normal quantile.
pub const WILSON_Z: f64 = 1.959_963_984_540_054;

const FIXED_CONFIDENCE_SLOT: u64 = u64::MAX;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("budgets must be positive and strictly increasing")]
    InvalidBudgets,
    #[error("at least one replication is required")]
    NoReplications,
    #[error("{context}: {source}")]
    Policy {
        context: String,
        #[source]
        source: PolicyError,
    },
    #[error("policy `{0}` is not a fixed-confidence policy")]
    NotFixedConfidence(&'static str),
    #[error(
        "insufficient data for a rate estimate: {qualifying} budget(s) with p_hat in [{p_min}, {p_max}], at least 3 needed"
    )]
    InsufficientData {
        qualifying: usize,
        p_min: f64,
        p_max: f64,
    },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("could not build worker pool: {0}")]
    ThreadPool(String),
}

impl SimError {
    fn policy(context: String, source: PolicyError) -> Self {
        SimError::Policy { context, source }
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Episode seed: `sm(sm(sm(master) ^ budget) ^ replication)`.
pub fn derive_seed(master: u64, budget: u64, replication: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ budget) ^ replication)
}

/// One independent observation stream per arm.
pub struct ArmStreams {
    rngs: Vec<ChaCha8Rng>,
}

impl ArmStreams {
    pub fn new(seed: u64, k: usize) -> Self {
        let base = ChaCha8Rng::seed_from_u64(seed);
        let rngs = (0..k)
            .map(|i| {
                let mut rng = base.clone();
                rng.set_stream(i as u64);
                rng
            })
            .collect();
        Self { rngs }
    }

    pub fn draw(&mut self, arm_index: usize, arm: &Arm) -> f64 {
        arm.sample(&mut self.rngs[arm_index])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub replications: u64,
    pub master_seed: u64,
    /// Worker count; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl SimConfig {
    pub fn new(replications: u64, master_seed: u64) -> Self {
        Self {
            replications,
            master_seed,
            threads: None,
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }

    fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T, SimError> {
        match self.threads {
            None => Ok(f()),
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map(|pool| pool.install(f))
                .map_err(|e| SimError::ThreadPool(e.to_string())),
        }
    }
}

/// Wilson score interval at 95%.
pub fn wilson_interval(errors: u64, replications: u64) -> (f64, f64) {
    let n = replications as f64;
    let p = errors as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let low = if errors == 0 {
        0.0
    } else {
        (center - half).clamp(0.0, p)
    };
    let high = if errors == replications {
        1.0
    } else {
        (center + half).clamp(p, 1.0)
    };
    (low, high)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetRow {
    pub n: u64,
    pub replications: u64,
    pub errors: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `-ln(p_hat)`, absent when no error was observed.
    pub neg_log_p: Option<f64>,
}

impl BudgetRow {
    pub fn new(n: u64, replications: u64, errors: u64) -> Self {
        let p_hat = errors as f64 / replications as f64;
        let (ci_low, ci_high) = wilson_interval(errors, replications);
        Self {
            n,
            replications,
            errors,
            p_hat,
            ci_low,
            ci_high,
            neg_log_p: (errors > 0).then(|| -p_hat.ln()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedBudgetReport {
    pub policy: String,
    pub rows: Vec<BudgetRow>,
}

fn check_budgets(budgets: &[u64]) -> Result<(), SimError> {
    if budgets.is_empty() || budgets[0] == 0 || budgets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SimError::InvalidBudgets);
    }
    Ok(())
}

/// Runs `budget` steps and reports whether the recommendation is wrong.
pub fn fixed_budget_episode(
    instance: &BanditInstance,
    policy: &dyn Policy,
    budget: u64,
    seed: u64,
) -> Result<bool, PolicyError> {
    let k = instance.k();
    let mut streams = ArmStreams::new(seed, k);
    let mut state = HistoryState::new(k);
    for _ in 0..budget {
        let arm = policy.next_arm(&state)?;
        if arm >= k {
            return Err(PolicyError::ArmOutOfRange { arm, k });
        }
        let obs = streams.draw(arm, instance.arm(arm));
        state.record(arm, obs);
    }
    Ok(policy.recommend(&state) != instance.best_arm())
}

/// Estimates `p_n = P(recommendation after n samples is wrong)` for each budget.
pub fn run_fixed_budget(
    instance: &BanditInstance,
    policy: &dyn Policy,
    budgets: &[u64],
    cfg: &SimConfig,
) -> Result<FixedBudgetReport, SimError> {
    check_budgets(budgets)?;
    if cfg.replications == 0 {
        return Err(SimError::NoReplications);
    }
    let rows = cfg.install(|| {
        budgets
            .iter()
            .map(|&n| {
                let outcomes: Result<Vec<bool>, SimError> = (0..cfg.replications)
                    .into_par_iter()
                    .map(|r| {
                        fixed_budget_episode(
                            instance,
                            policy,
                            n,
                            derive_seed(cfg.master_seed, n, r),
                        )
                        .map_err(|e| SimError::policy(format!("budget {n}, replication {r}"), e))
                    })
                    .collect();
                let errors = outcomes?.into_iter().filter(|&wrong| wrong).count() as u64;
                Ok(BudgetRow::new(n, cfg.replications, errors))
            })
            .collect::<Result<Vec<_>, SimError>>()
    })??;
    Ok(FixedBudgetReport {
        policy: policy.name().to_string(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateWindow {
    pub p_min: f64,
    pub p_max: f64,
}

impl Default for RateWindow {
    fn default() -> Self {
        Self {
            p_min: 1e-4,
            p_max: 0.3,
        }
    }
}

/// Least-squares fit of `-ln p_hat` against `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEstimate {
    /// Decay rate; `1 / slope` estimates `n / ln(1 / p_n)`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Standard error of the slope (zero with exactly three collinear points).
    pub standard_error: f64,
    pub inverse_slope: f64,
    pub budgets_used: Vec<u64>,
    pub window: RateWindow,
}

pub fn estimate_rate(
    report: &FixedBudgetReport,
    window: RateWindow,
) -> Result<RateEstimate, SimError> {
    let points: Vec<(u64, f64)> = report
        .rows
        .iter()
        .filter(|r| r.errors > 0 && r.p_hat >= window.p_min && r.p_hat <= window.p_max)
        .map(|r| (r.n, -r.p_hat.ln()))
        .collect();
    if points.len() < 3 {
        return Err(SimError::InsufficientData {
            qualifying: points.len(),
            p_min: window.p_min,
            p_max: window.p_max,
        });
    }
    let m = points.len() as f64;
    let mean_x = points.iter().map(|&(n, _)| n as f64).sum::<f64>() / m;
    let mean_y = points.iter().map(|&(_, y)| y).sum::<f64>() / m;
    let sxx: f64 = points
        .iter()
        .map(|&(n, _)| (n as f64 - mean_x).powi(2))
        .sum();
    let sxy: f64 = points
        .iter()
        .map(|&(n, y)| (n as f64 - mean_x) * (y - mean_y))
        .sum();
    let syy: f64 = points.iter().map(|&(_, y)| (y - mean_y).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ssr: f64 = points
        .iter()
        .map(|&(n, y)| (y - intercept - slope * n as f64).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    let standard_error = (ssr / (m - 2.0) / sxx).sqrt();
    Ok(RateEstimate {
        slope,
        intercept,
        r_squared,
        standard_error,
        inverse_slope: 1.0 / slope,
        budgets_used: points.iter().map(|&(n, _)| n).collect(),
        window,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceOutcome {
    pub tau: u64,
    pub correct: bool,
    pub timed_out: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedConfidenceReport {
    pub policy: String,
    pub delta: f64,
    pub outcomes: Vec<ConfidenceOutcome>,
    /// Mean stopping time; timed-out replications count at the cap.
    pub mean_tau: f64,
    pub error_rate: f64,
    /// `mean_tau / ln(1 / δ)`.
    pub ratio: f64,
    pub timeouts: u64,
}

fn fixed_confidence_episode(
    instance: &BanditInstance,
    policy: &dyn Policy,
    max_steps: u64,
    seed: u64,
) -> Result<ConfidenceOutcome, PolicyError> {
    let k = instance.k();
    let mut streams = ArmStreams::new(seed, k);
    let mut state = HistoryState::new(k);
    let mut timed_out = false;
    loop {
        if state.all_sampled() && policy.should_stop(&state)? {
            break;
        }
        if state.t() >= max_steps {
            timed_out = true;
            break;
        }
        let arm = policy.next_arm(&state)?;
        if arm >= k {
            return Err(PolicyError::ArmOutOfRange { arm, k });
        }
        let obs = streams.draw(arm, instance.arm(arm));
        state.record(arm, obs);
    }
    Ok(ConfidenceOutcome {
        tau: state.t(),
        correct: policy.recommend(&state) == instance.best_arm(),
        timed_out,
    })
}

/// Runs a fixed-confidence policy until it stops (or hits its step cap).
pub fn run_fixed_confidence(
    instance: &BanditInstance,
    policy: &dyn Policy,
    cfg: &SimConfig,
) -> Result<FixedConfidenceReport, SimError> {
    let delta = policy
        .confidence()
        .ok_or(SimError::NotFixedConfidence(policy.name()))?;
    if cfg.replications == 0 {
        return Err(SimError::NoReplications);
    }
    let max_steps = policy.max_steps().unwrap_or(DEFAULT_MAX_STEPS);
    let outcomes = cfg.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|r| {
                fixed_confidence_episode(
                    instance,
                    policy,
                    max_steps,
                    derive_seed(cfg.master_seed, FIXED_CONFIDENCE_SLOT, r),
                )
                .map_err(|e| SimError::policy(format!("replication {r}"), e))
            })
            .collect::<Result<Vec<_>, SimError>>()
    })??;
    let reps = outcomes.len() as f64;
    let total_tau: u64 = outcomes.iter().map(|o| o.tau).sum();
    let mean_tau = total_tau as f64 / reps;
    let wrong = outcomes.iter().filter(|o| !o.correct).count();
    Ok(FixedConfidenceReport {
        policy: policy.name().to_string(),
        delta,
        mean_tau,
        error_rate: wrong as f64 / reps,
        ratio: mean_tau / (1.0 / delta).ln(),
        timeouts: outcomes.iter().filter(|o| o.timed_out).count() as u64,
        outcomes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub candidate: String,
    pub gamma_fc: f64,
    pub gamma_na: f64,
    pub inverse_gamma_fc: f64,
    pub inverse_gamma_na: f64,
    pub rate_uniform: RateEstimate,
    pub rate_candidate: RateEstimate,
    /// `rate_candidate.slope - rate_uniform.slope`.
    pub rate_difference: f64,
    pub combined_standard_error: f64,
    pub uniform: FixedBudgetReport,
    pub candidate_report: FixedBudgetReport,
}

/// Compares a candidate against uniform sampling on shared seeds.
pub fn probe_uniform_dominance(
    instance: &BanditInstance,
    candidate: &dyn Policy,
    budgets: &[u64],
    cfg: &SimConfig,
    window: RateWindow,
    solver: &SolverOptions,
) -> Result<DominanceReport, SimError> {
    let fc = complexity::gamma(instance, Direction::FixedConfidence, solver)?;
    let na = complexity::gamma(instance, Direction::NonAdaptive, solver)?;
    let uniform = run_fixed_budget(instance, &uniform_policy(), budgets, cfg)?;
    let candidate_report = run_fixed_budget(instance, candidate, budgets, cfg)?;
    let rate_uniform = estimate_rate(&uniform, window)?;
    let rate_candidate = estimate_rate(&candidate_report, window)?;
    Ok(DominanceReport {
        candidate: candidate.name().to_string(),
        gamma_fc: fc.gamma,
        gamma_na: na.gamma,
        inverse_gamma_fc: fc.objective_value,
        inverse_gamma_na: na.objective_value,
        rate_difference: rate_candidate.slope - rate_uniform.slope,
        combined_standard_error: rate_candidate
            .standard_error
            .hypot(rate_uniform.standard_error),
        rate_uniform,
        rate_candidate,
        uniform,
        candidate_report,
    })
}

pub const CONJECTURE_LABEL: &str = "empirical evidence, not a resolution";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjectureRow {
    pub policy: String,
    pub weights: Vec<f64>,
    pub rate: RateEstimate,
    /// `1 / slope`, the finite-budget counterpart of `n / ln(1 / p_n)`.
    pub empirical_complexity: f64,
    pub ratio_to_gamma_fc: f64,
    pub ratio_to_gamma_na: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjectureReport {
    pub label: &'static str,
    pub gamma_fc: f64,
    pub gamma_na: f64,
    pub weights_fc: Vec<f64>,
    pub weights_na: Vec<f64>,
    pub rows: Vec<ConjectureRow>,
}

/// Tabulates empirical decay of uniform, `w*_fc`- and `w*_na`-tracking
/// beside both solver complexities.
pub fn probe_conjectures(
    instance: &BanditInstance,
    budgets: &[u64],
    cfg: &SimConfig,
    window: RateWindow,
    solver: &SolverOptions,
) -> Result<ConjectureReport, SimError> {
    let fc = complexity::gamma(instance, Direction::FixedConfidence, solver)?;
    let na = complexity::gamma(instance, Direction::NonAdaptive, solver)?;
    let k = instance.k();
    let candidates = [
        ("uniform", vec![1.0 / k as f64; k]),
        ("fixed_weight_fc", fc.optimal_weights.as_slice().to_vec()),
        ("fixed_weight_na", na.optimal_weights.as_slice().to_vec()),
    ];
    let mut rows = Vec::with_capacity(candidates.len());
    for (name, weights) in candidates {
        let report = if name == "uniform" {
            run_fixed_budget(instance, &uniform_policy(), budgets, cfg)?
        } else {
            let policy = fixed_weight_policy(
                crate::arms::Weights::normalized(weights.clone())
                    .expect("solver weights lie on the simplex"),
            );
            run_fixed_budget(instance, &policy, budgets, cfg)?
        };
        let rate = estimate_rate(&report, window)?;
        let empirical_complexity = rate.inverse_slope;
        rows.push(ConjectureRow {
            policy: name.to_string(),
            weights,
            empirical_complexity,
            ratio_to_gamma_fc: empirical_complexity / fc.gamma,
            ratio_to_gamma_na: empirical_complexity / na.gamma,
            rate,
        });
    }
    Ok(ConjectureReport {
        label: CONJECTURE_LABEL,
        gamma_fc: fc.gamma,
        gamma_na: na.gamma,
        weights_fc: fc.optimal_weights.into_inner(),
        weights_na: na.optimal_weights.into_inner(),
        rows,
    })
}
