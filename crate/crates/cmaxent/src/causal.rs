//! Maximum-entropy solve in the causal direction: a Gaussian marginal for
//! the covariates, then the maximum-conditional-entropy predictor of the
//! target fitted to the target moments.
//!
//! The conditional solution has the form
//! `p(y = +1 | x) = ½(1 + tanh(λ₀ + λ₁x₁ + λ₂x₂))`; the multipliers are the
//! unique root of the moment-matching conditions
//! `E[tanh(λ₀ + λ·X)] = 2q − 1` and `E[X·tanh(λ₀ + λ·X)] = φ`, located by
//! damped Newton on the convex dual with the expectations evaluated by
//! Gauss–Hermite quadrature.

use nalgebra::{Matrix2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::{MissingMoment, MomentSpec};
use crate::quadrature::{adaptive_nodes, forward_stats};

/// Residual infinity-norm below which the dual fit is converged.
pub const FIT_TOL: f64 = 1e-8;

/// Newton iteration cap; hitting it reports the moments as infeasible.
pub const MAX_ITER: usize = 200;

const MIN_MARGINAL_EIG: f64 = 1e-12;

/// `½(1 + tanh(z))`, the predictor form shared by every posterior in the
/// crate so degenerate reductions compare bit-for-bit.
#[inline]
pub(crate) fn tanh_form(z: f64) -> f64 {
    0.5 * (1.0 + z.tanh())
}

/// Mean and covariance of the stage-1 Gaussian marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    #[serde(with = "crate::json::vec2")]
    pub mean: Vector2<f64>,
    #[serde(with = "crate::json::mat2")]
    pub cov: Matrix2<f64>,
}

impl GaussianParams {
    pub fn new(mean: Vector2<f64>, cov: Matrix2<f64>) -> Result<Self> {
        if (cov[(0, 1)] - cov[(1, 0)]).abs() > 1e-12 {
            return Err(Error::InvalidArgument(
                "marginal covariance must be symmetric".into(),
            ));
        }
        if crate::moments::min_eigenvalue(&cov) <= MIN_MARGINAL_EIG {
            return Err(Error::Singular {
                context: "marginal covariance (eigenvalue below 1e-12)",
            });
        }
        Ok(GaussianParams { mean, cov })
    }
}

/// Fitted causal-direction model: tanh multipliers over a Gaussian marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalModel {
    pub lambda0: f64,
    #[serde(with = "crate::json::vec2")]
    pub lambda: Vector2<f64>,
    pub marginal: GaussianParams,
}

impl CausalModel {
    /// `λ₀ + λ·x`, half the posterior log-odds.
    pub fn activation(&self, x: Vector2<f64>) -> f64 {
        self.lambda0 + self.lambda.dot(&x)
    }
}

/// `p(y = +1 | x) = ½(1 + tanh(λ₀ + λ·x))`.
pub fn causal_posterior(model: &CausalModel, x: Vector2<f64>) -> f64 {
    tanh_form(model.activation(x))
}

/// Forward moment map `(λ₀, λ) ↦ (E[Y], E[XY])` under `X ~ marginal`.
///
/// Evaluated at two quadrature resolutions; disagreement beyond the fit
/// tolerance is reported as a quadrature-accuracy error rather than
/// silently returned.
pub fn causal_moment_forward(
    lambda0: f64,
    lambda: Vector2<f64>,
    marginal: &GaussianParams,
) -> Result<(f64, Vector2<f64>)> {
    let sigma = (lambda.transpose() * marginal.cov * lambda)[(0, 0)].max(0.0).sqrt();
    let nodes = adaptive_nodes(sigma);
    let coarse = forward_stats(lambda0, lambda, marginal.mean, &marginal.cov, Some(nodes))?;
    let fine =
        forward_stats(lambda0, lambda, marginal.mean, &marginal.cov, Some(2 * nodes + 1))?;
    let scale = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs()).max(1.0);
    let err = scale(coarse.ey, fine.ey)
        .max(scale(coarse.exy.x, fine.exy.x))
        .max(scale(coarse.exy.y, fine.exy.y));
    if err > FIT_TOL {
        return Err(Error::QuadratureAccuracy { order: nodes, error: err });
    }
    Ok((fine.ey, fine.exy))
}

/// Which multipliers the dual solve adjusts.
#[derive(Clone, Copy, PartialEq, Eq)]
enum DualVars {
    /// Fit `(λ₀, λ₁, λ₂)` against `(E[Y], φ₁, φ₂)`.
    All,
    /// Pin `λ₂ = 0` and fit `(λ₀, λ₁)` against `(E[Y], φ₁)`.
    FirstOnly,
}

impl DualVars {
    /// Residual norms over the constrained components only.
    fn sup(self, r: &Vector3<f64>) -> f64 {
        match self {
            DualVars::All => r.amax(),
            DualVars::FirstOnly => r.x.abs().max(r.y.abs()),
        }
    }

    fn euclidean(self, r: &Vector3<f64>) -> f64 {
        match self {
            DualVars::All => r.norm(),
            DualVars::FirstOnly => r.x.hypot(r.y),
        }
    }
}

/// Damped Newton on the dual. Returns the multipliers and the residual
/// 2-norm after each accepted step (used by the monotonicity tests).
fn fit_dual(
    marginal: &GaussianParams,
    target: Vector3<f64>,
    vars: DualVars,
) -> Result<(f64, Vector2<f64>, Vec<f64>)> {
    let eval = |theta: Vector3<f64>| -> Result<(Vector3<f64>, nalgebra::Matrix3<f64>)> {
        let stats = forward_stats(
            theta.x,
            Vector2::new(theta.y, theta.z),
            marginal.mean,
            &marginal.cov,
            None,
        )?;
        let residual = Vector3::new(stats.ey, stats.exy.x, stats.exy.y) - target;
        Ok((residual, stats.hessian))
    };

    // Exact when phi = 0; a sound start elsewhere.
    let mut theta = Vector3::new(target.x.atanh(), 0.0, 0.0);
    let (mut residual, mut hessian) = eval(theta)?;
    let mut trace = vec![vars.euclidean(&residual)];

    for iter in 0..MAX_ITER {
        if vars.sup(&residual) <= FIT_TOL {
            return Ok((theta.x, Vector2::new(theta.y, theta.z), trace));
        }
        let step = match vars {
            DualVars::All => hessian
                .full_piv_lu()
                .solve(&residual)
                .ok_or(Error::Singular { context: "dual Hessian" })?,
            DualVars::FirstOnly => {
                let h2 = Matrix2::new(
                    hessian[(0, 0)],
                    hessian[(0, 1)],
                    hessian[(1, 0)],
                    hessian[(1, 1)],
                );
                let r2 = Vector2::new(residual.x, residual.y);
                let s = h2
                    .full_piv_lu()
                    .solve(&r2)
                    .ok_or(Error::Singular { context: "dual Hessian" })?;
                Vector3::new(s.x, s.y, 0.0)
            }
        };

        // Backtracking halving on the residual norm, starting at a full step.
        let current_norm = vars.euclidean(&residual);
        let mut damping = 1.0;
        loop {
            let candidate = theta - step * damping;
            let (r_new, h_new) = eval(candidate)?;
            if vars.euclidean(&r_new) < current_norm {
                theta = candidate;
                residual = r_new;
                hessian = h_new;
                trace.push(vars.euclidean(&residual));
                break;
            }
            damping *= 0.5;
            if damping < 1e-12 {
                return Err(Error::NonConvergence {
                    iterations: iter + 1,
                    residual: vars.sup(&residual),
                });
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITER,
        residual: vars.sup(&residual),
    })
}

fn fit_against(
    spec: &MomentSpec,
    marginal: GaussianParams,
    vars: DualVars,
) -> Result<CausalModel> {
    let target = Vector3::new(spec.mean_y(), spec.phi.x, spec.phi.y);
    let (lambda0, lambda, _) = fit_dual(&marginal, target, vars)?;
    let model = CausalModel { lambda0, lambda, marginal };

    // Certify the result against the stated moments with the order check on.
    let (ey, exy) = causal_moment_forward(model.lambda0, model.lambda, &model.marginal)?;
    let residual = match vars {
        DualVars::All => (ey - spec.mean_y())
            .abs()
            .max((exy.x - spec.phi.x).abs())
            .max((exy.y - spec.phi.y).abs()),
        DualVars::FirstOnly => (ey - spec.mean_y()).abs().max((exy.x - spec.phi.x).abs()),
    };
    if residual > 10.0 * FIT_TOL {
        return Err(Error::NonConvergence { iterations: MAX_ITER, residual });
    }
    Ok(model)
}

/// Full-information causal fit: Gaussian marginal straight from the spec,
/// multipliers matched to `(E[Y], φ₁, φ₂)`.
pub fn fit_causal(spec: &MomentSpec) -> Result<CausalModel> {
    spec.require_ready(MissingMoment::None)?;
    let marginal = GaussianParams::new(spec.xbar, spec.sigma_x)?;
    fit_against(spec, marginal, DualVars::All)
}

/// Causal fit without `φ₂`: the multiplier tied to the missing moment is
/// exactly zero and the second covariate drops out of the predictor; the
/// marginal keeps the full covariance.
pub fn fit_causal_missing_phi2(spec: &MomentSpec) -> Result<CausalModel> {
    spec.require_ready(MissingMoment::Phi2)?;
    let marginal = GaussianParams::new(spec.xbar, spec.sigma_x)?;
    fit_against(spec, marginal, DualVars::FirstOnly)
}

/// Causal fit without `s̄₁₂`: the stage-1 marginal becomes diagonal and the
/// multipliers are refitted against it, still matching `(E[Y], φ₁, φ₂)`.
pub fn fit_causal_missing_s12(spec: &MomentSpec) -> Result<CausalModel> {
    spec.require_ready(MissingMoment::S12)?;
    let diag = Matrix2::new(spec.sigma_x[(0, 0)], 0.0, 0.0, spec.sigma_x[(1, 1)]);
    let marginal = GaussianParams::new(spec.xbar, diag)?;
    fit_against(spec, marginal, DualVars::All)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::Seeded;
    use approx::assert_abs_diff_eq;

    fn unit_marginal() -> GaussianParams {
        GaussianParams::new(Vector2::zeros(), Matrix2::identity()).unwrap()
    }

    fn centered_spec(q: f64, phi: Vector2<f64>, sigma: Matrix2<f64>) -> MomentSpec {
        MomentSpec::full(q, Vector2::zeros(), phi, sigma)
    }

    #[test]
    fn posterior_worked_values() {
        let flat = CausalModel {
            lambda0: 0.0,
            lambda: Vector2::zeros(),
            marginal: unit_marginal(),
        };
        assert_eq!(causal_posterior(&flat, Vector2::new(3.0, -7.0)), 0.5);

        let axis = CausalModel { lambda: Vector2::new(1.0, 0.0), ..flat.clone() };
        assert_eq!(causal_posterior(&axis, Vector2::new(0.0, 5.0)), 0.5);

        let general = CausalModel {
            lambda0: 0.5,
            lambda: Vector2::new(1.0, -1.0),
            marginal: unit_marginal(),
        };
        // ½(1 + tanh(0.5))
        assert_abs_diff_eq!(
            causal_posterior(&general, Vector2::new(1.0, 1.0)),
            0.7310585786300049,
            epsilon = 1e-15
        );
    }

    #[test]
    fn posterior_complement() {
        let model = CausalModel {
            lambda0: 0.3,
            lambda: Vector2::new(0.7, -0.2),
            marginal: unit_marginal(),
        };
        let x = Vector2::new(0.4, 1.1);
        let p = causal_posterior(&model, x);
        let flipped = CausalModel {
            lambda0: -model.lambda0,
            lambda: -model.lambda,
            marginal: model.marginal.clone(),
        };
        assert_abs_diff_eq!(causal_posterior(&flipped, x), 1.0 - p, epsilon = 1e-15);
    }

    #[test]
    fn forward_map_odd_integrand_vanishes() {
        let (ey, exy) = causal_moment_forward(0.0, Vector2::zeros(), &unit_marginal()).unwrap();
        assert_eq!(ey, 0.0);
        assert_eq!(exy, Vector2::zeros());
    }

    #[test]
    fn forward_map_constant_conditional() {
        let a = 0.8f64;
        let (ey, exy) = causal_moment_forward(a, Vector2::zeros(), &unit_marginal()).unwrap();
        assert_abs_diff_eq!(ey, a.tanh(), epsilon = 1e-12);
        assert_abs_diff_eq!(exy.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn forward_map_matches_monte_carlo() {
        // Independent oracle: 10^7 standard-normal draws.
        let marginal = unit_marginal();
        let (_, exy) = causal_moment_forward(0.0, Vector2::new(1.0, 0.0), &marginal).unwrap();
        let mut rng = Seeded::new(20240817);
        let n = 10_000_000usize;
        let mut acc = 0.0;
        for _ in 0..n {
            let z = rng.next_gaussian();
            acc += z * z.tanh();
        }
        let mc = acc / n as f64;
        assert_abs_diff_eq!(exy.x, mc, epsilon = 1e-3);
        assert_abs_diff_eq!(exy.y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn fit_uninformative_spec_is_exactly_zero() {
        let spec = centered_spec(0.5, Vector2::zeros(), Matrix2::identity());
        let model = fit_causal(&spec).unwrap();
        assert_eq!(model.lambda0, 0.0);
        assert_eq!(model.lambda, Vector2::zeros());
    }

    #[test]
    fn fit_pure_bias_hits_atanh() {
        let spec = centered_spec(0.7, Vector2::zeros(), Matrix2::identity());
        let model = fit_causal(&spec).unwrap();
        assert_eq!(model.lambda, Vector2::zeros());
        assert_abs_diff_eq!(model.lambda0, 0.42364893019360184, epsilon = 1e-12);
        assert_abs_diff_eq!(model.lambda0, 0.4f64.atanh(), epsilon = 1e-15);
    }

    #[test]
    fn fit_round_trips_forward_moments() {
        let marginal = unit_marginal();
        let (lambda0, lambda) = (0.2, Vector2::new(0.8, -0.3));
        let (ey, exy) = causal_moment_forward(lambda0, lambda, &marginal).unwrap();
        let spec = centered_spec(0.5 * (1.0 + ey), exy, Matrix2::identity());
        let model = fit_causal(&spec).unwrap();
        assert_abs_diff_eq!(model.lambda0, lambda0, epsilon = 1e-6);
        assert_abs_diff_eq!(model.lambda.x, lambda.x, epsilon = 1e-6);
        assert_abs_diff_eq!(model.lambda.y, lambda.y, epsilon = 1e-6);
    }

    #[test]
    fn fit_rejects_boundary_phi() {
        // |phi_1| at the Cauchy-Schwarz boundary has no finite multiplier.
        let spec = centered_spec(0.5, Vector2::new(1.0, 0.0), Matrix2::identity());
        assert!(fit_causal(&spec).is_err());
    }

    #[test]
    fn missing_phi2_pins_lambda2_to_zero() {
        let mut spec = centered_spec(
            0.6,
            Vector2::new(0.25, 0.0),
            Matrix2::new(1.0, 0.4, 0.4, 1.5),
        );
        spec.avail_phi2 = false;
        let model = fit_causal_missing_phi2(&spec).unwrap();
        assert_eq!(model.lambda.y, 0.0);
        assert_eq!(model.marginal.cov, spec.sigma_x);

        let mut trivial = centered_spec(0.5, Vector2::zeros(), Matrix2::identity());
        trivial.avail_phi2 = false;
        let model = fit_causal_missing_phi2(&trivial).unwrap();
        assert_eq!((model.lambda0, model.lambda), (0.0, Vector2::zeros()));
    }

    /// Independent 1-D dual solve: Simpson-rule expectations over a wide
    /// bracket plus a finite-difference Newton, nothing shared with the
    /// Gauss-Hermite path.
    fn one_dim_dual_oracle(q: f64, phi1: f64, s1sq: f64) -> (f64, f64) {
        let s = s1sq.sqrt();
        let n = 8001usize;
        let (lo, hi) = (-12.0 * s, 12.0 * s);
        let h = (hi - lo) / (n - 1) as f64;
        let density = |x: f64| (-x * x / (2.0 * s1sq)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
        let expectations = |l0: f64, l1: f64| -> (f64, f64) {
            let mut ey = 0.0;
            let mut exy = 0.0;
            for i in 0..n {
                let x = lo + h * i as f64;
                let simpson = if i == 0 || i == n - 1 {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                let w = simpson * h / 3.0 * density(x);
                let m = (l0 + l1 * x).tanh();
                ey += w * m;
                exy += w * x * m;
            }
            (ey, exy)
        };
        let target = (2.0 * q - 1.0, phi1);
        let (mut l0, mut l1) = (0.0f64, 0.0f64);
        for _ in 0..60 {
            let (ey, exy) = expectations(l0, l1);
            let r = (ey - target.0, exy - target.1);
            if r.0.abs().max(r.1.abs()) < 1e-11 {
                break;
            }
            let d = 1e-6;
            let (ey_a, exy_a) = expectations(l0 + d, l1);
            let (ey_b, exy_b) = expectations(l0, l1 + d);
            let j = nalgebra::Matrix2::new(
                (ey_a - ey) / d,
                (ey_b - ey) / d,
                (exy_a - exy) / d,
                (exy_b - exy) / d,
            );
            let step = j.full_piv_lu().solve(&Vector2::new(r.0, r.1)).unwrap();
            l0 -= step.x;
            l1 -= step.y;
        }
        (l0, l1)
    }

    #[test]
    fn missing_phi2_matches_one_dim_oracle_when_uncorrelated() {
        let (q, phi1, s1sq) = (0.55, 0.3, 1.2);
        let mut spec = centered_spec(
            q,
            Vector2::new(phi1, 0.0),
            Matrix2::new(s1sq, 0.0, 0.0, 0.8),
        );
        spec.avail_phi2 = false;
        let model = fit_causal_missing_phi2(&spec).unwrap();
        let (l0, l1) = one_dim_dual_oracle(q, phi1, s1sq);
        assert_abs_diff_eq!(model.lambda0, l0, epsilon = 1e-6);
        assert_abs_diff_eq!(model.lambda.x, l1, epsilon = 1e-6);
    }

    #[test]
    fn missing_s12_with_zero_known_value_matches_full_fit() {
        let sigma = Matrix2::new(1.0, 0.0, 0.0, 1.3);
        let full = centered_spec(0.45, Vector2::new(0.2, -0.15), sigma);
        let mut partial = full.clone();
        partial.avail_s12 = false;
        let a = fit_causal(&full).unwrap();
        let b = fit_causal_missing_s12(&partial).unwrap();
        assert_abs_diff_eq!(a.lambda0, b.lambda0, epsilon = 1e-9);
        assert_abs_diff_eq!(a.lambda.x, b.lambda.x, epsilon = 1e-9);
        assert_abs_diff_eq!(a.lambda.y, b.lambda.y, epsilon = 1e-9);
    }

    #[test]
    fn missing_s12_diagonal_geometry_and_moments() {
        let mut spec = centered_spec(0.5, Vector2::new(0.3, 0.1), Matrix2::identity());
        spec.avail_s12 = false;
        let model = fit_causal_missing_s12(&spec).unwrap();
        // With a diagonal unit marginal, lambda is parallel to phi.
        let cross = model.lambda.x * 0.1 - model.lambda.y * 0.3;
        assert!(cross.abs() <= 1e-6 * model.lambda.norm() * spec.phi.norm());
        let (ey, exy) = causal_moment_forward(model.lambda0, model.lambda, &model.marginal).unwrap();
        assert_abs_diff_eq!(ey, spec.mean_y(), epsilon = 1e-8);
        assert_abs_diff_eq!(exy.x, spec.phi.x, epsilon = 1e-8);
        assert_abs_diff_eq!(exy.y, spec.phi.y, epsilon = 1e-8);
    }

    #[test]
    fn newton_residual_is_monotone() {
        let marginal =
            GaussianParams::new(Vector2::zeros(), Matrix2::new(1.0, 0.3, 0.3, 0.7)).unwrap();
        let target = Vector3::new(0.3, 0.35, -0.1);
        let (_, _, trace) = fit_dual(&marginal, target, DualVars::All).unwrap();
        assert!(trace.len() >= 2);
        for pair in trace.windows(2) {
            assert!(pair[1] < pair[0], "residual rose: {pair:?}");
        }
    }

    #[test]
    fn dual_hessian_is_psd_at_random_points() {
        let cov = Matrix2::new(1.0, -0.2, -0.2, 0.6);
        let mut rng = Seeded::new(7);
        for _ in 0..25 {
            let stats = forward_stats(
                2.0 * rng.next_uniform() - 1.0,
                Vector2::new(
                    2.0 * rng.next_uniform() - 1.0,
                    2.0 * rng.next_uniform() - 1.0,
                ),
                Vector2::zeros(),
                &cov,
                None,
            )
            .unwrap();
            let eig = stats.hessian.symmetric_eigen();
            assert!(eig.eigenvalues.iter().all(|&e| e >= -1e-12));
        }
    }

    #[test]
    fn fitted_lambda_parallel_to_whitened_phi() {
        // Boundary-normal geometry at the solver level, random feasible specs.
        let mut rng = Seeded::new(42);
        for _ in 0..20 {
            let spec = crate::datagen::random_centered_spec(&mut rng, 0.3, 0.7, 0.55);
            let model = fit_causal(&spec).unwrap();
            let normal = spec
                .sigma_x
                .full_piv_lu()
                .solve(&spec.phi)
                .expect("sigma invertible");
            let cross = model.lambda.x * normal.y - model.lambda.y * normal.x;
            assert!(
                cross.abs() <= 1e-6 * model.lambda.norm() * normal.norm(),
                "lambda {:?} not parallel to sigma^-1 phi {:?}",
                model.lambda,
                normal
            );
        }
    }

    #[test]
    fn model_json_round_trip() {
        let model = CausalModel {
            lambda0: 0.25,
            lambda: Vector2::new(0.5, -0.125),
            marginal: GaussianParams::new(Vector2::zeros(), Matrix2::new(1.0, 0.25, 0.25, 2.0))
                .unwrap(),
        };
        let s = crate::json::to_string_17(&model).unwrap();
        let back: CausalModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, model);
    }
}
