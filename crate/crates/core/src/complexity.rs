//! Fixed-confidence and non-adaptive complexity functionals.
//!
//! Both functionals have the shape
//!
//! ```text
//! 1 / Γ* = sup_{w ∈ Σ_k}  min_{j ≠ i*}  inf_x [ w_{i*} d(i*, x) + w_j d(j, x) ]
//! ```
//!
//! where `d(i, x)` is `KL(μ_i || μ_i@x)` for the fixed-confidence direction and
//! `KL(μ_i@x || μ_i)` for the non-adaptive direction, and `μ_i@x` denotes arm
//! `i` moved to mean `x`. The infimum over alternatives reduces to one
//! two-arm problem per challenger `j`, each solved in closed form.
//!
//! The outer problem is solved on the curve where all challenger costs are
//! equal. Each challenger cost is positively homogeneous in its two weights,
//! so with `w_{i*}` normalised to 1 the challenger weight `r_j(y)` reaching a
//! common level `y` is unique, and the objective along the curve is
//! `y / (1 + Σ r_j(y))`. Its derivative has the sign of
//! `1 - Σ_j d(i*, x_j) / d(j, x_j)`, which is bisected.

use serde::Serialize;
use thiserror::Error;

use crate::arms::{bernoulli_kl, Arm, BanditInstance, Weights};

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_ITERATIONS: u64 = 100_000;
pub const MIN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `KL(μ_i || ν_i)`.
    FixedConfidence,
    /// `KL(ν_i || μ_i)`.
    NonAdaptive,
}

#[derive(Debug, Clone, Error)]
pub enum SolverError {
    #[error("challenger {0} is the best arm")]
    ChallengerIsBest(usize),
    #[error("arm index {index} out of range for an instance with {k} arms")]
    IndexOutOfRange { index: usize, k: usize },
    #[error("weights have {found} entries but the instance has {expected} arms")]
    WeightsLength { expected: usize, found: usize },
    #[error("tolerance {0} must lie in [1e-10, 1)")]
    InvalidTolerance(f64),
    #[error("closed form unavailable: {0}")]
    ClosedFormUnavailable(&'static str),
    #[error("no convergence to tolerance {tol} within {iterations} iterations")]
    NoConvergence {
        tol: f64,
        iterations: u64,
        best: Box<ComplexityResult>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iterations: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<(), SolverError> {
        if !(self.tol >= MIN_TOLERANCE && self.tol < 1.0) {
            return Err(SolverError::InvalidTolerance(self.tol));
        }
        Ok(())
    }
}

/// Minimal cost of making `challenger` at least as good as the best arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransportCost {
    pub challenger: usize,
    pub value: f64,
    /// Common mean at which the infimum is attained.
    pub minimizer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub iterations: u64,
    /// Relative width of the final bracket on the equalised cost level.
    pub achieved_tolerance: f64,
    /// `(max_j cost_j - min_j cost_j) / min_j cost_j` at the returned weights.
    pub equalization_residual: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityResult {
    pub direction: Direction,
    pub gamma: f64,
    pub optimal_weights: Weights,
    pub challenger_costs: Vec<TransportCost>,
    pub objective_value: f64,
    pub diagnostics: Diagnostics,
}

/// Cost of moving one arm to mean `x`, unweighted.
pub(crate) fn arm_term(direction: Direction, arm: &Arm, x: f64) -> f64 {
    match *arm {
        Arm::Gaussian { mean, variance } => (mean - x) * (mean - x) / (2.0 * variance),
        Arm::Bernoulli { mean } => match direction {
            Direction::FixedConfidence => bernoulli_kl(mean, x),
            Direction::NonAdaptive => bernoulli_kl(x, mean),
        },
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Stationary point of `wb d(best, x) + wj d(challenger, x)`.
fn pair_minimizer(direction: Direction, best: &Arm, challenger: &Arm, wb: f64, wj: f64) -> f64 {
    let (tb, tj) = (best.mean(), challenger.mean());
    if wj == 0.0 {
        return tb;
    }
    if wb == 0.0 {
        return tj;
    }
    let x = match (*best, *challenger) {
        (Arm::Gaussian { variance: vb, .. }, Arm::Gaussian { variance: vj, .. }) => {
            let (pb, pj) = (wb / vb, wj / vj);
            (pb * tb + pj * tj) / (pb + pj)
        }
        _ => match direction {
            Direction::FixedConfidence => (wb * tb + wj * tj) / (wb + wj),
            Direction::NonAdaptive => sigmoid((wb * logit(tb) + wj * logit(tj)) / (wb + wj)),
        },
    };
    x.clamp(tb.min(tj), tb.max(tj))
}

/// Value and minimiser of `inf_x wb d(best, x) + wj d(challenger, x)`.
pub(crate) fn pair_cost(
    direction: Direction,
    best: &Arm,
    challenger: &Arm,
    wb: f64,
    wj: f64,
) -> (f64, f64) {
    let x = pair_minimizer(direction, best, challenger, wb, wj);
    let mut value = 0.0;
    if wb > 0.0 {
        value += wb * arm_term(direction, best, x);
    }
    if wj > 0.0 {
        value += wj * arm_term(direction, challenger, x);
    }
    (value, x)
}

pub fn transport_cost(
    instance: &BanditInstance,
    weights: &Weights,
    challenger: usize,
    direction: Direction,
) -> Result<TransportCost, SolverError> {
    let k = instance.k();
    if weights.len() != k {
        return Err(SolverError::WeightsLength {
            expected: k,
            found: weights.len(),
        });
    }
    if challenger >= k {
        return Err(SolverError::IndexOutOfRange {
            index: challenger,
            k,
        });
    }
    let best = instance.best_arm();
    if challenger == best {
        return Err(SolverError::ChallengerIsBest(challenger));
    }
    let (value, minimizer) = pair_cost(
        direction,
        instance.arm(best),
        instance.arm(challenger),
        weights[best],
        weights[challenger],
    );
    Ok(TransportCost {
        challenger,
        value,
        minimizer,
    })
}

/// Fixed-confidence transport cost, `KL(μ_i || ν_i)` ordering.
pub fn transport_cost_fc(
    instance: &BanditInstance,
    weights: &Weights,
    challenger: usize,
) -> Result<TransportCost, SolverError> {
    transport_cost(instance, weights, challenger, Direction::FixedConfidence)
}

/// Non-adaptive transport cost, `KL(ν_i || μ_i)` ordering.
pub fn transport_cost_na(
    instance: &BanditInstance,
    weights: &Weights,
    challenger: usize,
) -> Result<TransportCost, SolverError> {
    transport_cost(instance, weights, challenger, Direction::NonAdaptive)
}

/// `min_{j ≠ best} cost_j(w)`: the objective maximised over the simplex.
pub fn objective(instance: &BanditInstance, weights: &[f64], direction: Direction) -> f64 {
    objective_for_arms(instance.arms(), instance.best_arm(), weights, direction)
}

pub(crate) fn objective_for_arms(
    arms: &[Arm],
    best: usize,
    weights: &[f64],
    direction: Direction,
) -> f64 {
    arms.iter()
        .enumerate()
        .filter(|&(j, _)| j != best)
        .map(|(j, arm)| pair_cost(direction, &arms[best], arm, weights[best], weights[j]).0)
        .fold(f64::INFINITY, f64::min)
}

/// Challenger weight `r` (best arm weight 1) whose cost reaches `level`;
/// infinite when `level` is at or above the supremum of the cost.
fn ratio_for_level(direction: Direction, best: &Arm, challenger: &Arm, level: f64) -> f64 {
    if let (Arm::Gaussian { variance: vb, .. }, Arm::Gaussian { variance: vj, .. }) =
        (*best, *challenger)
    {
        // cost(1, r) = Δ² / (2 (vb + vj / r))
        let gap = best.mean() - challenger.mean();
        let denom = gap * gap / (2.0 * level) - vb;
        return if denom > 0.0 {
            vj / denom
        } else {
            f64::INFINITY
        };
    }

    // cost(1, r) is increasing in r; bisect on ln r.
    let cost = |t: f64| pair_cost(direction, best, challenger, 1.0, t.exp()).0;
    const LOG_LIMIT: f64 = 700.0;
    let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
    while cost(lo) > level {
        lo *= 2.0;
        if lo < -LOG_LIMIT {
            return 0.0;
        }
    }
    while cost(hi) < level {
        hi *= 2.0;
        if hi > LOG_LIMIT {
            return f64::INFINITY;
        }
    }
    for _ in 0..200 {
        if hi - lo <= 1e-14 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if cost(mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// Weights on the equal-cost curve at `level`, or `None` if some challenger
/// cannot reach it.
fn weights_at_level(
    arms: &[Arm],
    best: usize,
    direction: Direction,
    level: f64,
) -> Option<Vec<f64>> {
    let mut ratios = vec![0.0; arms.len()];
    ratios[best] = 1.0;
    for (j, arm) in arms.iter().enumerate() {
        if j == best {
            continue;
        }
        let r = ratio_for_level(direction, &arms[best], arm, level);
        if !r.is_finite() {
            return None;
        }
        ratios[j] = r;
    }
    let total: f64 = ratios.iter().sum();
    Some(ratios.into_iter().map(|r| r / total).collect())
}

/// Sign of `-d/dy objective(y)` along the equal-cost curve.
fn stationarity_gap(arms: &[Arm], best: usize, direction: Direction, weights: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (j, arm) in arms.iter().enumerate() {
        if j == best {
            continue;
        }
        let (_, x) = pair_cost(direction, &arms[best], arm, weights[best], weights[j]);
        let challenger_term = arm_term(direction, arm, x);
        if challenger_term <= 0.0 {
            return f64::INFINITY;
        }
        sum += arm_term(direction, &arms[best], x) / challenger_term;
    }
    sum - 1.0
}

fn build_result(
    arms: &[Arm],
    best: usize,
    direction: Direction,
    weights: Vec<f64>,
    iterations: u64,
    achieved_tolerance: f64,
) -> ComplexityResult {
    let challenger_costs: Vec<TransportCost> = arms
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != best)
        .map(|(j, arm)| {
            let (value, minimizer) =
                pair_cost(direction, &arms[best], arm, weights[best], weights[j]);
            TransportCost {
                challenger: j,
                value,
                minimizer,
            }
        })
        .collect();
    let min = challenger_costs
        .iter()
        .map(|c| c.value)
        .fold(f64::INFINITY, f64::min);
    let max = challenger_costs
        .iter()
        .map(|c| c.value)
        .fold(f64::NEG_INFINITY, f64::max);
    ComplexityResult {
        direction,
        gamma: 1.0 / min,
        optimal_weights: Weights::normalized(weights).expect("equal-cost weights are nonnegative"),
        challenger_costs,
        objective_value: min,
        diagnostics: Diagnostics {
            iterations,
            achieved_tolerance,
            equalization_residual: if min > 0.0 {
                (max - min) / min
            } else {
                f64::INFINITY
            },
            exact: false,
        },
    }
}

/// Solves the outer problem for raw arms whose best arm is `best`.
///
/// The arms are not validated beyond what the closed forms need: means must
/// be pairwise distinct from the best mean and Bernoulli means inside (0, 1).
pub(crate) fn solve_arms(
    arms: &[Arm],
    best: usize,
    direction: Direction,
    opts: &SolverOptions,
) -> Result<ComplexityResult, SolverError> {
    opts.check()?;
    let level_cap = arms
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != best)
        .map(|(_, arm)| arm_term(direction, &arms[best], arm.mean()))
        .fold(f64::INFINITY, f64::min);

    let (mut lo, mut hi) = (0.0, level_cap);
    let stop_width = (1e-2 * opts.tol).max(1e-15);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        if hi - lo <= stop_width * hi {
            converged = true;
            break;
        }
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        match weights_at_level(arms, best, direction, mid) {
            Some(w) if stationarity_gap(arms, best, direction, &w) < 0.0 => lo = mid,
            _ => hi = mid,
        }
    }

    let level = 0.5 * (lo + hi);
    let weights = weights_at_level(arms, best, direction, level)
        .or_else(|| weights_at_level(arms, best, direction, lo))
        .unwrap_or_else(|| vec![1.0 / arms.len() as f64; arms.len()]);
    let achieved = if hi > 0.0 { (hi - lo) / hi } else { 0.0 };
    let result = build_result(arms, best, direction, weights, iterations, achieved);
    if converged {
        Ok(result)
    } else {
        Err(SolverError::NoConvergence {
            tol: opts.tol,
            iterations,
            best: Box::new(result),
        })
    }
}

pub fn gamma(
    instance: &BanditInstance,
    direction: Direction,
    opts: &SolverOptions,
) -> Result<ComplexityResult, SolverError> {
    solve_arms(instance.arms(), instance.best_arm(), direction, opts)
}

/// Fixed-confidence complexity with its optimal allocation.
pub fn gamma_fc(instance: &BanditInstance, tol: f64) -> Result<ComplexityResult, SolverError> {
    gamma(
        instance,
        Direction::FixedConfidence,
        &SolverOptions::with_tol(tol),
    )
}

/// Non-adaptive fixed-budget complexity with its optimal allocation.
pub fn gamma_na(instance: &BanditInstance, tol: f64) -> Result<ComplexityResult, SolverError> {
    gamma(
        instance,
        Direction::NonAdaptive,
        &SolverOptions::with_tol(tol),
    )
}

/// Exact solution for two Gaussian arms: weights proportional to the standard
/// deviations and `Γ = 2 (σ_1 + σ_2)² / Δ²`. Both directions coincide.
pub fn two_armed_gaussian_closed_form(
    instance: &BanditInstance,
) -> Result<ComplexityResult, SolverError> {
    if instance.k() != 2 {
        return Err(SolverError::ClosedFormUnavailable(
            "requires exactly two arms",
        ));
    }
    let variances = instance
        .variances()
        .ok_or(SolverError::ClosedFormUnavailable("requires Gaussian arms"))?;
    let (s1, s2) = (variances[0].sqrt(), variances[1].sqrt());
    let gap = instance.arm(0).mean() - instance.arm(1).mean();
    let gamma = 2.0 * (s1 + s2).powi(2) / (gap * gap);
    let weights = vec![s1 / (s1 + s2), s2 / (s1 + s2)];
    let mut result = build_result(
        instance.arms(),
        instance.best_arm(),
        Direction::FixedConfidence,
        weights,
        0,
        0.0,
    );
    result.gamma = gamma;
    result.objective_value = 1.0 / gamma;
    result.diagnostics.exact = true;
    result.diagnostics.equalization_residual = 0.0;
    Ok(result)
}
