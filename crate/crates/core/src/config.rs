//! JSON experiment configuration.

use std::path::Path;

use serde::Deserialize;

use crate::arms::{ArmFamily, BanditInstance, Weights};
use crate::cli::CliError;
use crate::complexity::{
    self, Direction, SolverOptions, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE,
};
use crate::policy::{
    fixed_weight_policy, sigma_proportional_policy, track_and_stop_policy, uniform_policy,
    FamilyModel, Policy,
};
use crate::sim::RateWindow;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PolicyConfig {
    Name(String),
    Detailed {
        name: String,
        /// Explicit allocation for `fixed_weight`.
        #[serde(default)]
        weights: Option<Vec<f64>>,
        /// `"fc"` or `"na"`: track the solver's optimal allocation instead.
        #[serde(default)]
        target: Option<String>,
    },
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig::Name("uniform".into())
    }
}

impl PolicyConfig {
    pub fn name(&self) -> &str {
        match self {
            PolicyConfig::Name(name) | PolicyConfig::Detailed { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: String,
    pub means: Vec<f64>,
    #[serde(default)]
    pub variances: Option<Vec<f64>>,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub budgets: Vec<u64>,
    #[serde(default)]
    pub replications: Option<u64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    pub output_path: String,
    #[serde(default)]
    pub max_iterations: Option<u64>,
    /// Step cap for fixed-confidence runs.
    #[serde(default)]
    pub t_max: Option<u64>,
    /// `[p_min, p_max]` for the rate regression.
    #[serde(default)]
    pub rate_window: Option<[f64; 2]>,
}

fn default_tol() -> f64 {
    DEFAULT_TOLERANCE
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn family(&self) -> Result<ArmFamily, CliError> {
        match self.family.to_ascii_lowercase().as_str() {
            "gaussian" | "gaussianknownvariance" | "gaussian_known_variance" => {
                Ok(ArmFamily::GaussianKnownVariance)
            }
            "bernoulli" => Ok(ArmFamily::Bernoulli),
            other => Err(CliError::Config(format!("unknown family `{other}`"))),
        }
    }

    pub fn instance(&self) -> Result<BanditInstance, CliError> {
        let instance = match self.family()? {
            ArmFamily::GaussianKnownVariance => {
                let variances = self.variances.as_ref().ok_or_else(|| {
                    CliError::Config("gaussian family requires `variances`".into())
                })?;
                if variances.len() != self.means.len() {
                    return Err(CliError::Config(format!(
                        "{} means but {} variances",
                        self.means.len(),
                        variances.len()
                    )));
                }
                BanditInstance::gaussian(&self.means, variances)
            }
            ArmFamily::Bernoulli => {
                if self.variances.is_some() {
                    return Err(CliError::Config(
                        "`variances` is only meaningful for the gaussian family".into(),
                    ));
                }
                BanditInstance::bernoulli(&self.means)
            }
        };
        instance.map_err(CliError::Instance)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iterations: self.max_iterations.unwrap_or(DEFAULT_MAX_ITERATIONS),
        }
    }

    pub fn rate_window(&self) -> Result<RateWindow, CliError> {
        match self.rate_window {
            None => Ok(RateWindow::default()),
            Some([p_min, p_max]) if 0.0 < p_min && p_min < p_max && p_max <= 1.0 => {
                Ok(RateWindow { p_min, p_max })
            }
            Some(w) => Err(CliError::Config(format!("invalid rate window {w:?}"))),
        }
    }

    pub fn replications(&self) -> Result<u64, CliError> {
        match self.replications {
            Some(r) if r >= 1 => Ok(r),
            _ => Err(CliError::Config("`replications` must be at least 1".into())),
        }
    }

    pub fn build_policy(&self, instance: &BanditInstance) -> Result<Box<dyn Policy>, CliError> {
        build_policy(&self.policy, self, instance)
    }
}

fn build_policy(
    policy_config: &PolicyConfig,
    config: &ExperimentConfig,
    instance: &BanditInstance,
) -> Result<Box<dyn Policy>, CliError> {
    let (weights, target) = match policy_config {
        PolicyConfig::Name(_) => (None, None),
        PolicyConfig::Detailed {
            weights, target, ..
        } => (weights.as_ref(), target.as_deref()),
    };
    let policy: Box<dyn Policy> = match policy_config.name() {
        "uniform" => Box::new(uniform_policy()),
        "fixed_weight" => {
            let w = match (weights, target) {
                (Some(w), None) => {
                    if w.len() != instance.k() {
                        return Err(CliError::Config(format!(
                            "{} weights for {} arms",
                            w.len(),
                            instance.k()
                        )));
                    }
                    Weights::normalized(w.clone())
                        .map_err(|e| CliError::Config(format!("invalid weights: {e}")))?
                }
                (None, Some(t)) => {
                    let direction = match t {
                        "fc" => Direction::FixedConfidence,
                        "na" => Direction::NonAdaptive,
                        other => {
                            return Err(CliError::Config(format!(
                                "unknown weight target `{other}`, expected `fc` or `na`"
                            )))
                        }
                    };
                    complexity::gamma(instance, direction, &config.solver_options())
                        .map_err(CliError::Solver)?
                        .optimal_weights
                }
                _ => {
                    return Err(CliError::Config(
                        "fixed_weight needs exactly one of `weights` or `target`".into(),
                    ))
                }
            };
            Box::new(fixed_weight_policy(w))
        }
        "sigma_proportional" => {
            let variances = instance.variances().ok_or_else(|| {
                CliError::Config("sigma_proportional requires the gaussian family".into())
            })?;
            Box::new(
                sigma_proportional_policy(&variances)
                    .map_err(|e| CliError::Config(e.to_string()))?,
            )
        }
        "track_and_stop" => {
            let delta = config
                .delta
                .ok_or_else(|| CliError::Config("track_and_stop requires `delta`".into()))?;
            let mut policy = track_and_stop_policy(delta, FamilyModel::from_instance(instance))
                .map_err(|e| CliError::Config(e.to_string()))?;
            if let Some(cap) = config.t_max {
                policy = policy.with_max_steps(cap);
            }
            Box::new(policy)
        }
        other => return Err(CliError::Config(format!("unknown policy `{other}`"))),
    };
    Ok(policy)
}
