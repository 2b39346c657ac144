//! Maximum-entropy solve in the anticausal direction: a Bernoulli cause and
//! a two-component Gaussian mixture for the covariates, inverted through
//! Bayes' rule into a predictor.
//!
//! With the full constraint set both components share one covariance and the
//! posterior log-odds are affine in `x` (linear discriminant analysis); with
//! per-class second moments the covariances differ and the rule is quadratic.
//! The §5-style partial-information variants impute or drop the missing
//! moment as dictated by entropy maximization.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::causal::tanh_form;
use crate::error::{Error, Result};
use crate::moments::{conditional_covariance_unchecked, min_eigenvalue, MissingMoment, MomentSpec, PSD_TOL};

/// How a missing `φ₂` gets imputed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImputationStrategy {
    /// Closed-form bound `q(1−q)s̄₁₂φ₁ / (q(1−q)s̄₁² − φ₁²)`.
    Paper,
    /// Numeric maximizer of `det Σ_{X|Y}(φ₂)`; the default.
    Entropy,
}

/// Provenance of imputed quantities, carried in the model JSON.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelMeta {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub imputed_phi2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub strategy: Option<ImputationStrategy>,
    /// Set when the imputed value had to be clamped into the feasible range.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub clamped: Option<bool>,
}

/// Bernoulli target plus a two-component Gaussian mixture over `X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnticausalModel {
    /// `p(Y = +1)`.
    pub q: f64,
    #[serde(with = "crate::json::vec2")]
    pub mu_plus: Vector2<f64>,
    #[serde(with = "crate::json::vec2")]
    pub mu_minus: Vector2<f64>,
    #[serde(with = "crate::json::mat2")]
    pub sigma_cond_plus: Matrix2<f64>,
    #[serde(with = "crate::json::mat2")]
    pub sigma_cond_minus: Matrix2<f64>,
    #[serde(default)]
    pub meta: ModelMeta,
}

impl AnticausalModel {
    /// Equal per-class covariances (the LDA case)?
    pub fn is_shared_covariance(&self) -> bool {
        self.sigma_cond_plus == self.sigma_cond_minus
    }

    /// Mixture mean `E[X] = qμ₊ + (1−q)μ₋`.
    pub fn mean(&self) -> Vector2<f64> {
        self.mu_plus * self.q + self.mu_minus * (1.0 - self.q)
    }

    /// Mixture cross moment `E[XY] = qμ₊ − (1−q)μ₋`.
    pub fn cross_moment(&self) -> Vector2<f64> {
        self.mu_plus * self.q - self.mu_minus * (1.0 - self.q)
    }

    /// Mixture second moment `E[XXᵀ]`.
    pub fn second_moment(&self) -> Matrix2<f64> {
        let plus = self.sigma_cond_plus + self.mu_plus * self.mu_plus.transpose();
        let minus = self.sigma_cond_minus + self.mu_minus * self.mu_minus.transpose();
        plus * self.q + minus * (1.0 - self.q)
    }

    /// Marginal covariance implied by the mixture.
    pub fn implied_marginal_covariance(&self) -> Matrix2<f64> {
        let mean = self.mean();
        self.second_moment() - mean * mean.transpose()
    }

    /// Posterior log-odds `log p(+1|x) − log p(−1|x)`, evaluated through the
    /// class log-densities so far-tail inputs stay finite.
    pub fn log_odds(&self, x: Vector2<f64>) -> f64 {
        let prior = self.q.ln() - (1.0 - self.q).ln();
        prior + self.class_log_density_ratio(x)
    }

    /// `log N(x; μ₊, Σ₊) − log N(x; μ₋, Σ₋)`.
    pub fn class_log_density_ratio(&self, x: Vector2<f64>) -> f64 {
        log_gaussian(x, self.mu_plus, &self.sigma_cond_plus)
            - log_gaussian(x, self.mu_minus, &self.sigma_cond_minus)
    }
}

pub(crate) fn log_gaussian(x: Vector2<f64>, mean: Vector2<f64>, sigma: &Matrix2<f64>) -> f64 {
    let det = sigma[(0, 0)] * sigma[(1, 1)] - sigma[(0, 1)] * sigma[(1, 0)];
    assert!(
        det > 0.0 && sigma[(0, 0)] > 0.0,
        "class covariance must be positive definite"
    );
    let d = x - mean;
    let quad = (sigma[(1, 1)] * d.x * d.x - 2.0 * sigma[(0, 1)] * d.x * d.y
        + sigma[(0, 0)] * d.y * d.y)
        / det;
    -(2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln() - 0.5 * quad
}

/// Component means `μ₊ = (x̄ + φ)/(2q)`, `μ₋ = (x̄ − φ)/(2(1−q))`.
pub fn class_means(spec: &MomentSpec) -> Result<(Vector2<f64>, Vector2<f64>)> {
    if !(spec.q > 0.0 && spec.q < 1.0) {
        return Err(Error::InvalidSpec(format!("q = {} not in (0, 1)", spec.q)));
    }
    let mu_plus = (spec.xbar + spec.phi) / (2.0 * spec.q);
    let mu_minus = (spec.xbar - spec.phi) / (2.0 * (1.0 - spec.q));
    Ok((mu_plus, mu_minus))
}

/// Shared conditional covariance
/// `Σ_{X|Y} = Σ_X − [(2q−1)x̄ + φ][(2q−1)x̄ + φ]ᵀ / (4q(1−q))`.
pub fn conditional_covariance(spec: &MomentSpec) -> Result<Matrix2<f64>> {
    let cond = conditional_covariance_unchecked(spec);
    let min_eig = min_eigenvalue(&cond);
    if min_eig < -PSD_TOL {
        return Err(Error::Infeasible {
            reason: format!("conditional covariance has eigenvalue {min_eig:.3e} < 0"),
        });
    }
    Ok(cond)
}

/// Full-information anticausal fit: class means and the shared conditional
/// covariance, both in closed form.
pub fn fit_anticausal(spec: &MomentSpec) -> Result<AnticausalModel> {
    spec.require_ready(MissingMoment::None)?;
    let (mu_plus, mu_minus) = class_means(spec)?;
    let cond = conditional_covariance(spec)?;
    Ok(AnticausalModel {
        q: spec.q,
        mu_plus,
        mu_minus,
        sigma_cond_plus: cond,
        sigma_cond_minus: cond,
        meta: ModelMeta::default(),
    })
}

/// `p(y = +1 | x)` by Bayes' rule over the two class densities.
pub fn anticausal_posterior(model: &AnticausalModel, x: Vector2<f64>) -> f64 {
    tanh_form(0.5 * model.log_odds(x))
}

/// Discriminant model from per-class means and per-class raw second
/// moments; unequal covariances make the decision rule quadratic.
pub fn fit_qda(
    q: f64,
    mu_plus: Vector2<f64>,
    mu_minus: Vector2<f64>,
    second_plus: Matrix2<f64>,
    second_minus: Matrix2<f64>,
) -> Result<AnticausalModel> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidSpec(format!("q = {q} not in (0, 1)")));
    }
    let sigma_plus = second_plus - mu_plus * mu_plus.transpose();
    let sigma_minus = second_minus - mu_minus * mu_minus.transpose();
    for (name, sigma) in [("+1", &sigma_plus), ("-1", &sigma_minus)] {
        let min_eig = min_eigenvalue(sigma);
        if min_eig < -PSD_TOL {
            return Err(Error::Infeasible {
                reason: format!("class {name} covariance has eigenvalue {min_eig:.3e} < 0"),
            });
        }
    }
    Ok(AnticausalModel {
        q,
        mu_plus,
        mu_minus,
        sigma_cond_plus: sigma_plus,
        sigma_cond_minus: sigma_minus,
        meta: ModelMeta::default(),
    })
}

/// Closed-form bound on the unobserved `φ₂`:
/// `q(1−q)s̄₁₂φ₁ / (q(1−q)s̄₁² − φ₁²)`. Requires a centered spec.
pub fn phi2_upper_bound(spec: &MomentSpec) -> Result<f64> {
    if !spec.is_centered(PSD_TOL) {
        return Err(Error::InvalidSpec("phi2 bound needs a centered spec".into()));
    }
    let qq = spec.q * (1.0 - spec.q);
    let denominator = qq * spec.sigma_x[(0, 0)] - spec.phi.x * spec.phi.x;
    if denominator == 0.0 {
        return Err(Error::Infeasible {
            reason: "phi2 bound denominator q(1-q)s1^2 - phi1^2 is zero".into(),
        });
    }
    Ok(qq * spec.sigma_x[(0, 1)] * spec.phi.x / denominator)
}

/// Open interval of `φ₂` values keeping `Σ_{X|Y}` positive definite, from
/// the roots of its determinant (a concave quadratic in `φ₂`). Works on
/// the centered view of the spec.
pub(crate) fn phi2_feasible_interval(spec: &MomentSpec) -> Result<(f64, f64)> {
    let spec = crate::moments::center(spec);
    let c = 1.0 / (4.0 * spec.q * (1.0 - spec.q));
    let (s1sq, s2sq, s12) = (
        spec.sigma_x[(0, 0)],
        spec.sigma_x[(1, 1)],
        spec.sigma_x[(0, 1)],
    );
    let phi1 = spec.phi.x;
    // det Σ_{X|Y}(φ₂) = a·φ₂² + b·φ₂ + k
    let a = -c * s1sq;
    let b = 2.0 * c * s12 * phi1;
    let k = (s1sq - c * phi1 * phi1) * s2sq - s12 * s12;
    let disc = b * b - 4.0 * a * k;
    if !(disc > 0.0) || a >= 0.0 {
        return Err(Error::Infeasible {
            reason: "no phi2 keeps the conditional covariance positive definite".into(),
        });
    }
    let sqrt_disc = disc.sqrt();
    let r1 = (-b + sqrt_disc) / (2.0 * a);
    let r2 = (-b - sqrt_disc) / (2.0 * a);
    Ok((r1.min(r2), r1.max(r2)))
}

/// Complete a spec with unknown `φ₂` and fit the mixture.
///
/// The imputed value comes either from the closed-form bound or from the
/// numeric determinant maximizer, is clamped into the feasible interval
/// (shrunk by a hair so downstream closed forms stay valid), and is
/// recorded in the model metadata.
pub fn fit_anticausal_missing_phi2(
    spec: &MomentSpec,
    strategy: ImputationStrategy,
) -> Result<AnticausalModel> {
    spec.require_ready(MissingMoment::Phi2)?;
    let raw = match strategy {
        ImputationStrategy::Paper => phi2_upper_bound(spec)?,
        ImputationStrategy::Entropy => crate::grid::det_argmax_phi2(spec)?.0,
    };
    let (lo, hi) = phi2_feasible_interval(spec)?;
    let margin = 1e-9 * (hi - lo).max(1.0);
    let imputed = raw.clamp(lo + margin, hi - margin);
    let clamped = imputed != raw;

    let mut completed = spec.clone();
    completed.phi.y = imputed;
    completed.avail_phi2 = true;
    let mut model = fit_anticausal(&completed)?;
    model.meta = ModelMeta {
        imputed_phi2: Some(imputed),
        strategy: Some(strategy),
        clamped: clamped.then_some(true),
    };
    Ok(model)
}

/// Anticausal fit with unknown `s̄₁₂`: the covariates become conditionally
/// independent given the target, so the shared covariance is exactly
/// `diag(s̄₁² − cφ₁², s̄₂² − cφ₂²)` with `c = 1/(4q(1−q))`.
pub fn fit_anticausal_missing_s12(spec: &MomentSpec) -> Result<AnticausalModel> {
    spec.require_ready(MissingMoment::S12)?;
    let c = 1.0 / (4.0 * spec.q * (1.0 - spec.q));
    let d1 = spec.sigma_x[(0, 0)] - c * spec.phi.x * spec.phi.x;
    let d2 = spec.sigma_x[(1, 1)] - c * spec.phi.y * spec.phi.y;
    if d1 <= 0.0 || d2 <= 0.0 {
        return Err(Error::Infeasible {
            reason: format!("conditional variances ({d1:.6}, {d2:.6}) must be positive"),
        });
    }
    let (mu_plus, mu_minus) = class_means(spec)?;
    let cond = Matrix2::new(d1, 0.0, 0.0, d2);
    Ok(AnticausalModel {
        q: spec.q,
        mu_plus,
        mu_minus,
        sigma_cond_plus: cond,
        sigma_cond_minus: cond,
        meta: ModelMeta::default(),
    })
}
