//! Merging single-variable predictors of a binary target into one joint
//! predictor under the maximum-entropy principle applied in causal order.
//!
//! With covariates as causes the solution is a Gaussian marginal plus a
//! logistic-style conditional; with covariates as effects it is a
//! shared-covariance Gaussian mixture inverted by Bayes' rule (linear
//! discriminant analysis). The crate fits both directions from first and
//! second moments, handles the partially observed cases (unknown
//! covariate–target or covariate–covariate moment), compares the resulting
//! decision boundaries, merges cause and effect blocks over four
//! covariates, and ships a brute-force grid solver as independent ground
//! truth for every closed form.

pub mod anticausal;
pub mod boundary;
pub mod causal;
pub mod combined;
pub mod datagen;
pub mod error;
pub mod grid;
pub mod json;
pub mod moments;
mod quadrature;

pub use error::{Error, Result};

/// Assumed causal role of the covariates relative to the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Covariates are parents of the target.
    Causal,
    /// Covariates are children of the target.
    Anticausal,
    /// Four covariates: a cause block and an effect block.
    Combined,
}
