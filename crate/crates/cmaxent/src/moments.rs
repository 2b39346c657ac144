//! Moment constraints: ingestion from samples, centering, and feasibility
//! validation.
//!
//! A [`MomentSpec`] carries the first and second moments of a binary target
//! `Y ∈ {−1, +1}` and two covariates: the class frequency `q = p(Y = +1)`,
//! the covariate means `x̄`, the cross moments `φᵢ = E[XᵢY]`, and the raw
//! second-moment matrix `Σ_X = E[XXᵀ]`. Availability flags mark whether
//! `φ₂` and the covariate cross moment `s̄₁₂` were actually observed.

use std::fmt;
use std::io::{BufRead, Write};

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the smallest eigenvalue of a matrix required to be PSD.
pub const PSD_TOL: f64 = 1e-9;

/// Slack added to the Cauchy–Schwarz feasibility bound.
pub const CS_SLACK: f64 = 1e-9;

/// Which moment is absent from a constraint set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingMoment {
    #[default]
    None,
    /// `φ₂ = E[X₂Y]` was never observed.
    Phi2,
    /// `s̄₁₂ = E[X₁X₂]` was never observed.
    S12,
}

/// First/second moment constraints with per-entry availability flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSpec {
    /// `p(Y = +1)`; `E[Y] = 2q − 1`.
    pub q: f64,
    /// `E[X]`.
    #[serde(with = "crate::json::vec2")]
    pub xbar: Vector2<f64>,
    /// `E[XY]`, entry `i` valid only if the matching availability flag is set.
    #[serde(with = "crate::json::vec2")]
    pub phi: Vector2<f64>,
    /// Raw second moments `E[XXᵀ]` (not central).
    #[serde(with = "crate::json::mat2")]
    pub sigma_x: Matrix2<f64>,
    /// Is `φ₂` known?
    pub avail_phi2: bool,
    /// Is `s̄₁₂` known?
    pub avail_s12: bool,
}

impl MomentSpec {
    /// Fully specified constraint set.
    pub fn full(q: f64, xbar: Vector2<f64>, phi: Vector2<f64>, sigma_x: Matrix2<f64>) -> Self {
        MomentSpec {
            q,
            xbar,
            phi,
            sigma_x,
            avail_phi2: true,
            avail_s12: true,
        }
    }

    /// `E[Y]` implied by the class frequency.
    pub fn mean_y(&self) -> f64 {
        2.0 * self.q - 1.0
    }

    /// Which moment the availability flags mark as absent.
    pub fn missing(&self) -> MissingMoment {
        match (self.avail_phi2, self.avail_s12) {
            (true, true) => MissingMoment::None,
            (false, _) => MissingMoment::Phi2,
            (true, false) => MissingMoment::S12,
        }
    }

    /// Central covariance `Σ_X − x̄x̄ᵀ`.
    pub fn covariance(&self) -> Matrix2<f64> {
        self.sigma_x - self.xbar * self.xbar.transpose()
    }

    /// True when `x̄ = 0` up to `tol`.
    pub fn is_centered(&self, tol: f64) -> bool {
        self.xbar.amax() <= tol
    }

    /// Error unless the spec is centered, every required entry is available,
    /// and [`validate`] reports nothing. `missing` states which entry the
    /// caller expects to be absent.
    pub fn require_ready(&self, missing: MissingMoment) -> Result<()> {
        if self.missing() != missing {
            return Err(Error::InvalidArgument(format!(
                "availability flags mark {:?} as missing, expected {:?}",
                self.missing(),
                missing
            )));
        }
        if !self.is_centered(PSD_TOL) {
            return Err(Error::InvalidSpec(format!(
                "spec must be centered (xbar = 0), got ({}, {}); apply centering first",
                self.xbar.x, self.xbar.y
            )));
        }
        let violations = validate(self);
        if violations.is_empty() {
            Ok(())
        } else {
            let msgs: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            Err(Error::InvalidSpec(msgs.join("; ")))
        }
    }
}

/// A label in `{−1, +1}` paired with two or four covariates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRow {
    pub y: i8,
    /// Covariates `(x₁, x₂)`.
    pub x: Vector2<f64>,
    /// Second covariate block `(x₃, x₄)` when the row has four columns.
    pub x2: Option<Vector2<f64>>,
}

/// Observed rows used to estimate sample averages.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleSet {
    pub rows: Vec<SampleRow>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// True when every row carries the extended `(x₃, x₄)` block.
    pub fn has_second_block(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.x2.is_some())
    }

    /// Rows restricted to the `(x₃, x₄)` block, labels kept.
    pub fn second_block(&self) -> Result<SampleSet> {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                r.x2.map(|x| SampleRow { y: r.y, x, x2: None })
                    .ok_or_else(|| Error::Parse("row lacks the x3,x4 block".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SampleSet { rows })
    }

    /// Parse the CSV sample format: header `y,x1,x2[,x3,x4]`, `y ∈ {−1,1}`.
    pub fn from_csv<R: BufRead>(reader: R) -> Result<SampleSet> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("missing CSV header".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        let extended = match cols.as_slice() {
            ["y", "x1", "x2"] => false,
            ["y", "x1", "x2", "x3", "x4"] => true,
            _ => {
                return Err(Error::Parse(format!(
                    "unexpected CSV header `{header}`; want y,x1,x2[,x3,x4]"
                )))
            }
        };
        let mut rows = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let want = if extended { 5 } else { 3 };
            if fields.len() != want {
                return Err(Error::Parse(format!(
                    "row {}: expected {} fields, got {}",
                    idx + 2,
                    want,
                    fields.len()
                )));
            }
            let mut nums = [0.0f64; 5];
            for (k, f) in fields.iter().enumerate() {
                nums[k] = f
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", idx + 2)))?;
            }
            let y = if nums[0] == 1.0 {
                1
            } else if nums[0] == -1.0 {
                -1
            } else {
                return Err(Error::Parse(format!(
                    "row {}: label {} is not in {{-1, 1}}",
                    idx + 2,
                    nums[0]
                )));
            };
            if nums.iter().take(want).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { context: "CSV sample row" });
            }
            rows.push(SampleRow {
                y,
                x: Vector2::new(nums[1], nums[2]),
                x2: extended.then(|| Vector2::new(nums[3], nums[4])),
            });
        }
        Ok(SampleSet { rows })
    }

    /// Emit the CSV sample format; inverse of [`SampleSet::from_csv`].
    pub fn to_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        let extended = self.has_second_block();
        if extended {
            writeln!(writer, "y,x1,x2,x3,x4")?;
        } else {
            writeln!(writer, "y,x1,x2")?;
        }
        for row in &self.rows {
            if let Some(x2) = row.x2 {
                writeln!(
                    writer,
                    "{},{},{},{},{}",
                    row.y, row.x.x, row.x.y, x2.x, x2.y
                )?;
            } else {
                writeln!(writer, "{},{},{}", row.y, row.x.x, row.x.y)?;
            }
        }
        Ok(())
    }
}

/// Plain sample averages of a sample set: `q`, `x̄`, `φ`, `Σ_X`.
///
/// Both availability flags come back set; flip them afterwards to model a
/// partially observed constraint set.
pub fn estimate_moments(samples: &SampleSet) -> Result<MomentSpec> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let n = samples.len() as f64;
    let mut pos = 0usize;
    let mut xbar = Vector2::zeros();
    let mut phi = Vector2::zeros();
    let mut sigma = Matrix2::zeros();
    for row in &samples.rows {
        if !row.x.x.is_finite() || !row.x.y.is_finite() {
            return Err(Error::NonFinite { context: "sample covariates" });
        }
        if row.y > 0 {
            pos += 1;
        }
        xbar += row.x;
        phi += row.x * f64::from(row.y);
        sigma += row.x * row.x.transpose();
    }
    let q = pos as f64 / n;
    if q == 0.0 || q == 1.0 {
        return Err(Error::SingleClass { q });
    }
    Ok(MomentSpec::full(q, xbar / n, phi / n, sigma / n))
}

/// Shift to the `x̄ = 0` convention: the covariate mean is absorbed, the
/// second moments become the covariance, and `φ` becomes `Cov(X, Y)`.
pub fn center(spec: &MomentSpec) -> MomentSpec {
    MomentSpec {
        q: spec.q,
        xbar: Vector2::zeros(),
        phi: spec.phi - spec.xbar * spec.mean_y(),
        sigma_x: spec.covariance(),
        avail_phi2: spec.avail_phi2,
        avail_s12: spec.avail_s12,
    }
}

/// A reason a [`MomentSpec`] is rejected. Violations are data, not errors.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    QOutOfRange { q: f64 },
    NonFinite { field: &'static str },
    Asymmetric { delta: f64 },
    CovarianceNotPsd { min_eigenvalue: f64 },
    CauchySchwarz { index: usize, lhs: f64, bound: f64 },
    ConditionalNotPsd { min_eigenvalue: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::QOutOfRange { q } => write!(f, "q = {q} outside the open interval (0, 1)"),
            Violation::NonFinite { field } => write!(f, "non-finite entry in {field}"),
            Violation::Asymmetric { delta } => {
                write!(f, "sigma_x asymmetric by {delta:.3e}")
            }
            Violation::CovarianceNotPsd { min_eigenvalue } => write!(
                f,
                "covariance sigma_x - xbar*xbar' has eigenvalue {min_eigenvalue:.3e} < 0"
            ),
            Violation::CauchySchwarz { index, lhs, bound } => write!(
                f,
                "phi_{}^2 = {lhs:.6} exceeds the Cauchy-Schwarz bound {bound:.6}",
                index + 1
            ),
            Violation::ConditionalNotPsd { min_eigenvalue } => write!(
                f,
                "conditional covariance has eigenvalue {min_eigenvalue:.3e} < 0"
            ),
        }
    }
}

fn min_eigenvalue_sym(m: &Matrix2<f64>) -> f64 {
    // Closed form for a symmetric 2x2.
    let half_tr = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    half_tr - (half_tr * half_tr - det).max(0.0).sqrt()
}

/// Every invariant breach found in `spec`, empty when the spec is feasible.
pub fn validate(spec: &MomentSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    if !spec.q.is_finite() || spec.q <= 0.0 || spec.q >= 1.0 {
        out.push(Violation::QOutOfRange { q: spec.q });
    }
    if !(spec.xbar.x.is_finite() && spec.xbar.y.is_finite()) {
        out.push(Violation::NonFinite { field: "xbar" });
    }
    if !(spec.phi.x.is_finite() && spec.phi.y.is_finite()) {
        out.push(Violation::NonFinite { field: "phi" });
    }
    if !spec.sigma_x.iter().all(|v| v.is_finite()) {
        out.push(Violation::NonFinite { field: "sigma_x" });
    }
    if !out.is_empty() {
        // The remaining checks assume finite entries and a valid q.
        return out;
    }

    let asym = (spec.sigma_x[(0, 1)] - spec.sigma_x[(1, 0)]).abs();
    if asym > PSD_TOL {
        out.push(Violation::Asymmetric { delta: asym });
    }
    let cov = spec.covariance();
    let min_eig = min_eigenvalue_sym(&cov);
    if min_eig < -PSD_TOL {
        out.push(Violation::CovarianceNotPsd { min_eigenvalue: min_eig });
    }

    // Cauchy-Schwarz on the covariances: Cov(Xi, Y)^2 <= Var(Xi)Var(Y) with
    // Var(Y) = 4q(1-q). The cross moment must be mean-adjusted first; for a
    // centered spec this is phi_i^2 <= s_i^2 * 4q(1-q).
    let var_y = 4.0 * spec.q * (1.0 - spec.q);
    let known_phi = [true, spec.avail_phi2];
    for i in 0..2 {
        if !known_phi[i] {
            continue;
        }
        let cov_xy = spec.phi[i] - spec.xbar[i] * spec.mean_y();
        let bound = (spec.sigma_x[(i, i)] - spec.xbar[i] * spec.xbar[i]) * var_y;
        let lhs = cov_xy * cov_xy;
        if lhs > bound + CS_SLACK {
            out.push(Violation::CauchySchwarz { index: i, lhs, bound });
        }
    }

    if spec.missing() == MissingMoment::None {
        let cond = conditional_covariance_unchecked(spec);
        let min_eig = min_eigenvalue_sym(&cond);
        if min_eig < -PSD_TOL {
            out.push(Violation::ConditionalNotPsd { min_eigenvalue: min_eig });
        }
    }
    out
}

/// Shared-covariance conditional covariance without the PSD gate; the
/// checked variant lives in the anticausal solver.
///
/// Law of total covariance: `Σ_{X|Y} = Var(X) − Var(E[X|Y])` with
/// `Var(E[X|Y]) = vvᵀ/(4q(1−q))` and `v = φ − (2q−1)x̄` the mean-adjusted
/// cross moment. On a centered spec this is `Σ_X − φφᵀ/(4q(1−q))`.
pub(crate) fn conditional_covariance_unchecked(spec: &MomentSpec) -> Matrix2<f64> {
    let c = 1.0 / (4.0 * spec.q * (1.0 - spec.q));
    let v = spec.phi - spec.xbar * spec.mean_y();
    spec.covariance() - v * v.transpose() * c
}

pub(crate) fn min_eigenvalue(m: &Matrix2<f64>) -> f64 {
    min_eigenvalue_sym(m)
}
