//! Best-arm identification laboratory.
//!
//! * [`arms`]: arm families, KL divergences, bandit instances, simplex weights.
//! * [`complexity`]: fixed-confidence and non-adaptive complexity solvers.
//! * [`policy`]: sampling, stopping and recommendation rules.
//! * [`sim`]: seeded Monte-Carlo engine, rate regression and probes.
//! * [`cli`]: config decoding and report writers behind the `bai-lab` binary.

pub mod arms;
pub mod cli;
pub mod complexity;
pub mod config;
pub mod policy;
pub mod sim;
