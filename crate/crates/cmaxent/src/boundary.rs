//! Decision-boundary geometry of the two directions: normal vectors,
//! offsets, parallelism, the rank-one (Sherman–Morrison) relation between
//! the marginal and conditional covariances, and the partial-information
//! slope condition.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::anticausal::{
    conditional_covariance, fit_anticausal_missing_phi2, phi2_upper_bound, AnticausalModel,
    ImputationStrategy,
};
use crate::causal::CausalModel;
use crate::error::{Error, Result};
use crate::grid::det_argmax_phi2;
use crate::moments::{MissingMoment, MomentSpec};

/// Normalized-cross-product tolerance for calling two normals parallel.
pub const PARALLEL_TOL: f64 = 1e-8;

/// MAP rule `predict +1 iff w·x + b > 0` in canonical form: `|w| = 1` with
/// the first nonzero component of `w` positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionBoundary {
    #[serde(with = "crate::json::vec2")]
    pub w: Vector2<f64>,
    pub b: f64,
    pub canonical: bool,
}

impl DecisionBoundary {
    /// Canonicalize `(w, b)`; the rule is invariant under positive scaling.
    pub fn new(w: Vector2<f64>, b: f64) -> Result<Self> {
        let norm = w.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::DegenerateBoundary);
        }
        let lead = if w.x != 0.0 { w.x } else { w.y };
        // Already canonical inputs pass through untouched, which keeps the
        // operation exactly idempotent instead of drifting by an ulp.
        if lead > 0.0 && (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Ok(DecisionBoundary { w, b, canonical: true });
        }
        let scale = lead.signum() / norm;
        Ok(DecisionBoundary { w: w * scale, b: b * scale, canonical: true })
    }

    /// Signed distance-like score `w·x + b`.
    pub fn score(&self, x: Vector2<f64>) -> f64 {
        self.w.dot(&x) + self.b
    }

    pub fn decide(&self, x: Vector2<f64>) -> i8 {
        if self.score(x) > 0.0 {
            1
        } else {
            -1
        }
    }

    /// A point on the boundary line.
    pub fn point_on(&self) -> Vector2<f64> {
        -self.w * (self.b / self.w.norm_squared())
    }

    /// Unit vector along the boundary line.
    pub fn tangent(&self) -> Vector2<f64> {
        Vector2::new(-self.w.y, self.w.x) / self.w.norm()
    }

    /// Slope `dx₂/dx₁` of the boundary line, `None` when vertical.
    pub fn slope(&self) -> Option<f64> {
        (self.w.y != 0.0).then(|| -self.w.x / self.w.y)
    }
}

fn solve_2x2(m: &Matrix2<f64>, rhs: Vector2<f64>, context: &'static str) -> Result<Vector2<f64>> {
    m.full_piv_lu()
        .solve(&rhs)
        .filter(|v| v.x.is_finite() && v.y.is_finite())
        .ok_or(Error::Singular { context })
}

/// Normal to the causal decision boundary: `Σ_X⁻¹ φ`.
pub fn normal_causal(spec: &MomentSpec) -> Result<Vector2<f64>> {
    spec.require_ready(MissingMoment::None)?;
    solve_2x2(&spec.sigma_x, spec.phi, "marginal covariance")
}

/// Normal to the anticausal decision boundary: `Σ_{X|Y}⁻¹ φ`.
///
/// A zero `φ` comes back as the zero vector: there is no boundary and the
/// caller has to treat the direction as degenerate.
pub fn normal_anticausal(spec: &MomentSpec) -> Result<Vector2<f64>> {
    spec.require_ready(MissingMoment::None)?;
    let cond = conditional_covariance(spec)?;
    solve_2x2(&cond, spec.phi, "conditional covariance")
}

/// Boundary of a fitted causal model: `λ·x + λ₀ = 0`.
pub fn boundary_from_causal(model: &CausalModel) -> Result<DecisionBoundary> {
    DecisionBoundary::new(model.lambda, model.lambda0)
}

/// Boundary of a shared-covariance anticausal model:
/// `w = Σ⁻¹(μ₊ − μ₋)`, `b = log(q/(1−q)) − ½(μ₊ᵀΣ⁻¹μ₊ − μ₋ᵀΣ⁻¹μ₋)`,
/// the zero set of the posterior log-odds.
pub fn boundary_from_anticausal(model: &AnticausalModel) -> Result<DecisionBoundary> {
    if !model.is_shared_covariance() {
        return Err(Error::InvalidArgument(
            "per-class covariances differ; the decision set is quadratic, not a line".into(),
        ));
    }
    let diff = model.mu_plus - model.mu_minus;
    let w = solve_2x2(&model.sigma_cond_plus, diff, "conditional covariance")?;
    let quad_plus = model.mu_plus.dot(&solve_2x2(
        &model.sigma_cond_plus,
        model.mu_plus,
        "conditional covariance",
    )?);
    let quad_minus = model.mu_minus.dot(&solve_2x2(
        &model.sigma_cond_plus,
        model.mu_minus,
        "conditional covariance",
    )?);
    let b = (model.q / (1.0 - model.q)).ln() - 0.5 * (quad_plus - quad_minus);
    DecisionBoundary::new(w, b)
}

/// True when the normalized cross product of two nonzero vectors is within
/// `tol`; avoids slope division so vertical boundaries are no special case.
pub fn parallel(w1: Vector2<f64>, w2: Vector2<f64>, tol: f64) -> Result<bool> {
    if w1.norm() == 0.0 || w2.norm() == 0.0 {
        return Err(Error::DegenerateBoundary);
    }
    let cross = w1.x * w2.y - w1.y * w2.x;
    Ok(cross.abs() <= tol * w1.norm() * w2.norm())
}

/// Unsigned angle between two direction vectors, in `[0, π)`.
pub fn angle_between(w1: Vector2<f64>, w2: Vector2<f64>) -> f64 {
    let cross = (w1.x * w2.y - w1.y * w2.x).abs();
    let dot = w1.dot(&w2);
    cross.atan2(dot)
}

/// Scalar `k` with `Σ_X⁻¹φ = (1 + k)Σ_{X|Y}⁻¹φ`, from the rank-one update
/// `Σ_X = Σ_{X|Y} + cφφᵀ`:
/// `k = −c·φᵀΣ_{X|Y}⁻¹φ / (1 + c·φᵀΣ_{X|Y}⁻¹φ)`.
///
/// The vector identity is verified to 1e−10 relative error before `k` is
/// returned.
pub fn sherman_morrison_decompose(spec: &MomentSpec) -> Result<f64> {
    spec.require_ready(MissingMoment::None)?;
    let cond = conditional_covariance(spec)?;
    let c = 1.0 / (4.0 * spec.q * (1.0 - spec.q));
    let cond_inv_phi = solve_2x2(&cond, spec.phi, "conditional covariance")?;
    let quad = spec.phi.dot(&cond_inv_phi);
    let k = -c * quad / (1.0 + c * quad);

    let marginal_inv_phi = solve_2x2(&spec.sigma_x, spec.phi, "marginal covariance")?;
    let gap = (marginal_inv_phi - cond_inv_phi * (1.0 + k)).norm();
    if gap > 1e-10 * marginal_inv_phi.norm().max(1e-300) && spec.phi.norm() > 0.0 {
        return Err(Error::Infeasible {
            reason: format!("rank-one decomposition identity violated by {gap:.3e}"),
        });
    }
    Ok(k)
}

/// Appendix-style slope condition for the unknown-`s̄₁₂` case:
/// `((s̄₂² − cφ₂²)·s̄₂²) / ((s̄₁² − cφ₁²)·s̄₁²)` with `c = 1/(4q(1−q))`;
/// equal slopes exactly when the ratio is 1 or some `φᵢ` vanishes.
pub fn partial_slope_ratio(spec: &MomentSpec) -> Result<f64> {
    spec.require_ready(MissingMoment::S12)?;
    let c = 1.0 / (4.0 * spec.q * (1.0 - spec.q));
    let d1 = spec.sigma_x[(0, 0)] - c * spec.phi.x * spec.phi.x;
    let d2 = spec.sigma_x[(1, 1)] - c * spec.phi.y * spec.phi.y;
    if d1 <= 0.0 || d2 <= 0.0 {
        return Err(Error::Infeasible {
            reason: format!("conditional variances ({d1:.6}, {d2:.6}) must be positive"),
        });
    }
    Ok((d2 * spec.sigma_x[(1, 1)]) / (d1 * spec.sigma_x[(0, 0)]))
}

/// Side-by-side geometry of the two directions for one constraint set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    #[serde(with = "crate::json::vec2")]
    pub w_causal: Vector2<f64>,
    #[serde(with = "crate::json::vec2")]
    pub w_anticausal: Vector2<f64>,
    pub parallel: bool,
    pub angle_radians: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub phi2_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub phi2_paper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub discrepancy: Option<f64>,
}

/// Compare the decision boundaries of both directions, honoring the spec's
/// availability flags. `strategy` only matters for the missing-`φ₂` case.
pub fn compare(spec: &MomentSpec, strategy: ImputationStrategy) -> Result<ComparisonReport> {
    match spec.missing() {
        MissingMoment::None => {
            let w_causal = normal_causal(spec)?;
            let w_anticausal = normal_anticausal(spec)?;
            let k = sherman_morrison_decompose(spec)?;
            Ok(ComparisonReport {
                parallel: parallel(w_causal, w_anticausal, PARALLEL_TOL)?,
                angle_radians: angle_between(w_causal, w_anticausal),
                w_causal,
                w_anticausal,
                k: Some(k),
                ratio: None,
                phi2_star: None,
                phi2_paper: None,
                discrepancy: None,
            })
        }
        MissingMoment::S12 => {
            let ratio = partial_slope_ratio(spec)?;
            let c = 1.0 / (4.0 * spec.q * (1.0 - spec.q));
            let w_causal = Vector2::new(
                spec.phi.x / spec.sigma_x[(0, 0)],
                spec.phi.y / spec.sigma_x[(1, 1)],
            );
            let w_anticausal = Vector2::new(
                spec.phi.x / (spec.sigma_x[(0, 0)] - c * spec.phi.x * spec.phi.x),
                spec.phi.y / (spec.sigma_x[(1, 1)] - c * spec.phi.y * spec.phi.y),
            );
            Ok(ComparisonReport {
                parallel: parallel(w_causal, w_anticausal, PARALLEL_TOL)?,
                angle_radians: angle_between(w_causal, w_anticausal),
                w_causal,
                w_anticausal,
                k: None,
                ratio: Some(ratio),
                phi2_star: None,
                phi2_paper: None,
                discrepancy: None,
            })
        }
        MissingMoment::Phi2 => {
            let (star, _) = det_argmax_phi2(spec)?;
            let paper = phi2_upper_bound(spec)?;
            let causal_model = crate::causal::fit_causal_missing_phi2(spec)?;
            let anticausal_model = fit_anticausal_missing_phi2(spec, strategy)?;
            let w_causal = boundary_from_causal(&causal_model)?.w;
            let w_anticausal = boundary_from_anticausal(&anticausal_model)?.w;
            Ok(ComparisonReport {
                parallel: parallel(w_causal, w_anticausal, PARALLEL_TOL)?,
                angle_radians: angle_between(w_causal, w_anticausal),
                w_causal,
                w_anticausal,
                k: None,
                ratio: None,
                phi2_star: Some(star),
                phi2_paper: Some(paper),
                discrepancy: ((star - paper).abs() > 1e-9).then(|| (star - paper).abs()),
            })
        }
    }
}
