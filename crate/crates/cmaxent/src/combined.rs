//! Merged predictor over four covariates where `(x₁, x₂)` are causes and
//! `(x₃, x₄)` are effects of the target.
//!
//! The two blocks are fitted independently (they are conditionally
//! independent given the target, and no cross-block covariances are
//! accepted as constraints); the merged posterior multiplies the causal
//! predictor by the effect-block class-density ratio, evaluated in log
//! space.

use nalgebra::{Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::anticausal::{fit_anticausal, AnticausalModel};
use crate::causal::{fit_causal, tanh_form, CausalModel};
use crate::error::{Error, Result};
use crate::moments::{estimate_moments, MomentSpec, SampleSet};

/// Per-block moment constraints sharing one target frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedMomentSpec {
    /// Moments of the cause block `(x₁, x₂)`.
    pub cause: MomentSpec,
    /// Moments of the effect block `(x₃, x₄)`.
    pub effect: MomentSpec,
}

impl CombinedMomentSpec {
    /// Block moments of a four-covariate sample set.
    pub fn estimate(samples: &SampleSet) -> Result<Self> {
        if !samples.has_second_block() {
            return Err(Error::Parse(
                "combined moments need rows with four covariates (x1..x4)".into(),
            ));
        }
        Ok(CombinedMomentSpec {
            cause: estimate_moments(samples)?,
            effect: estimate_moments(&samples.second_block()?)?,
        })
    }
}

/// Causal fit on the cause block plus anticausal fit on the effect block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedModel {
    pub causal_part: CausalModel,
    pub anticausal_part: AnticausalModel,
}

fn tag_block(err: Error, block: &str) -> Error {
    match err.exit_code() {
        3 => Error::Infeasible { reason: format!("{block} block: {err}") },
        _ => Error::InvalidSpec(format!("{block} block: {err}")),
    }
}

/// Fit both blocks. The stated `q` must agree between them; cross-block
/// covariances are not part of the constraint set.
pub fn fit_combined(spec4: &CombinedMomentSpec) -> Result<CombinedModel> {
    if spec4.cause.q != spec4.effect.q {
        return Err(Error::InvalidSpec(format!(
            "blocks disagree on q: {} vs {}",
            spec4.cause.q, spec4.effect.q
        )));
    }
    Ok(CombinedModel {
        causal_part: fit_causal(&spec4.cause).map_err(|e| tag_block(e, "cause"))?,
        anticausal_part: fit_anticausal(&spec4.effect).map_err(|e| tag_block(e, "effect"))?,
    })
}

/// Posterior log-odds of the merged predictor at `x = (x₁, x₂, x₃, x₄)`:
/// the causal log-odds plus the effect-block class log-density ratio (the
/// marginal of the cause block cancels in the quotient).
pub fn combined_log_odds(model: &CombinedModel, x: Vector4<f64>) -> f64 {
    let cause = Vector2::new(x.x, x.y);
    let effect = Vector2::new(x.z, x.w);
    2.0 * model.causal_part.activation(cause)
        + model.anticausal_part.class_log_density_ratio(effect)
}

/// `p(y = +1 | x₁..x₄)`.
pub fn combined_posterior(model: &CombinedModel, x: Vector4<f64>) -> f64 {
    tanh_form(0.5 * combined_log_odds(model, x))
}

/// Both class probabilities; they sum to one by construction.
pub fn combined_posterior_pair(model: &CombinedModel, x: Vector4<f64>) -> (f64, f64) {
    let p = combined_posterior(model, x);
    (p, 1.0 - p)
}
