//! Brute-force discretized maximum-entropy solvers, used as independent
//! ground truth for the closed-form and quadrature-based paths.
//!
//! Both solvers work on a rectangular grid of cell centers: the conditional
//! solver maximizes the weighted conditional entropy of the label given the
//! cell, the class-conditional solver maximizes the conditional entropy of
//! the cell given the label, each by Newton on the convex dual of the
//! constraint set. A separate one-dimensional maximizer locates the
//! entropy-optimal value of an unobserved cross moment.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::anticausal::phi2_feasible_interval;
use crate::error::{Error, Result};
use crate::moments::{conditional_covariance_unchecked, MomentSpec};
use crate::Direction;

/// Newton residual bound for the grid duals.
pub const ORACLE_TOL: f64 = 1e-10;

/// Sup-norm agreement threshold between grid solutions and closed forms.
pub const GAP_THRESHOLD: f64 = 0.02;

const MAX_ITER: usize = 200;

/// Rectangular evaluation grid: per-axis ranges and cell counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub ranges: [(f64, f64); 2],
    pub counts: [usize; 2],
}

impl GridSpec {
    pub fn new(ranges: [(f64, f64); 2], counts: [usize; 2]) -> Result<Self> {
        for (lo, hi) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidArgument(format!(
                    "grid range ({lo}, {hi}) must be finite and ordered"
                )));
            }
        }
        if counts.iter().any(|&c| c < 3) {
            return Err(Error::InvalidArgument("grid needs at least 3 cells per axis".into()));
        }
        Ok(GridSpec { ranges, counts })
    }

    /// Grid covering the spec's marginal spread: ±4 standard deviations at
    /// the default 41 cells per axis, widening logarithmically with the
    /// resolution (edge tail mass ~ 1/cells²) so that refining the grid
    /// shrinks the truncation error along with the cell size. With a fixed
    /// range the midpoint rule is already spectrally accurate on Gaussian
    /// integrands and refinement would hit a truncation floor instead of
    /// converging.
    pub fn for_spec(spec: &MomentSpec, cells_per_axis: usize) -> Result<Self> {
        let cells = cells_per_axis.max(3) as f64;
        let spread = 4f64.max((2.0 * (cells * cells).ln()).sqrt());
        let cov = spec.covariance();
        let mut ranges = [(0.0, 0.0); 2];
        for i in 0..2 {
            let sd = cov[(i, i)].max(0.0).sqrt();
            if sd <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "axis {i} has zero variance; cannot build a grid"
                )));
            }
            ranges[i] = (spec.xbar[i] - spread * sd, spec.xbar[i] + spread * sd);
        }
        GridSpec::new(ranges, [cells_per_axis, cells_per_axis])
    }

    /// Area of one cell.
    pub fn cell_area(&self) -> f64 {
        self.step(0) * self.step(1)
    }

    pub fn cells(&self) -> usize {
        self.counts[0] * self.counts[1]
    }

    fn step(&self, axis: usize) -> f64 {
        (self.ranges[axis].1 - self.ranges[axis].0) / self.counts[axis] as f64
    }

    /// Center of cell `k` (row-major over the two axes).
    pub fn center(&self, k: usize) -> Vector2<f64> {
        let (i, j) = (k / self.counts[1], k % self.counts[1]);
        Vector2::new(
            self.ranges[0].0 + (i as f64 + 0.5) * self.step(0),
            self.ranges[1].0 + (j as f64 + 0.5) * self.step(1),
        )
    }

    pub fn centers(&self) -> Vec<Vector2<f64>> {
        (0..self.cells()).map(|k| self.center(k)).collect()
    }

    /// Cell weights proportional to a Gaussian density at the centers,
    /// normalized to sum to one.
    pub fn gaussian_weights(&self, mean: Vector2<f64>, cov: &Matrix2<f64>) -> Result<Vec<f64>> {
        let det = cov[(0, 0)] * cov[(1, 1)] - cov[(0, 1)] * cov[(1, 0)];
        if det <= 0.0 || cov[(0, 0)] <= 0.0 {
            return Err(Error::Singular { context: "grid seeding density" });
        }
        let mut weights: Vec<f64> = self
            .centers()
            .iter()
            .map(|&x| {
                let d = x - mean;
                let quad = (cov[(1, 1)] * d.x * d.x - 2.0 * cov[(0, 1)] * d.x * d.y
                    + cov[(0, 0)] * d.y * d.y)
                    / det;
                (-0.5 * quad).exp()
            })
            .collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Ok(weights)
    }
}

/// A discretized distribution produced by one of the grid solvers.
#[derive(Debug, Clone, PartialEq)]
pub enum GridDistribution {
    /// Conditional label table `p(y = +1 | cell)` over fixed cell weights.
    YGivenX {
        grid: GridSpec,
        px: Vec<f64>,
        pos_given_x: Vec<f64>,
    },
    /// Per-class cell tables `p(cell | y)` under a fixed `p(Y = +1) = q`.
    XGivenY {
        grid: GridSpec,
        q: f64,
        pos: Vec<f64>,
        neg: Vec<f64>,
    },
}

impl GridDistribution {
    pub fn grid(&self) -> &GridSpec {
        match self {
            GridDistribution::YGivenX { grid, .. } | GridDistribution::XGivenY { grid, .. } => grid,
        }
    }

    /// Joint probabilities over `(y, cell)`, first the `+1` block.
    pub fn joint(&self) -> Vec<f64> {
        match self {
            GridDistribution::YGivenX { px, pos_given_x, .. } => px
                .iter()
                .zip(pos_given_x)
                .map(|(&w, &p)| w * p)
                .chain(px.iter().zip(pos_given_x).map(|(&w, &p)| w * (1.0 - p)))
                .collect(),
            GridDistribution::XGivenY { q, pos, neg, .. } => pos
                .iter()
                .map(|&p| q * p)
                .chain(neg.iter().map(|&p| (1.0 - q) * p))
                .collect(),
        }
    }
}

/// Shannon entropy `Σ −p log p` with `0·log 0 = 0`.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 })
        .sum()
}

/// Shannon entropy of the joint table of a grid distribution.
pub fn grid_entropy(dist: &GridDistribution) -> f64 {
    shannon_entropy(&dist.joint())
}

/// Dual objective and gradient of the conditional problem at `theta`;
/// the gradient is the moment residual.
pub(crate) fn conditional_dual(
    centers: &[Vector2<f64>],
    px: &[f64],
    targets: Vector3<f64>,
    theta: Vector3<f64>,
) -> (f64, Vector3<f64>) {
    let mut value = 0.0;
    let mut grad = Vector3::zeros();
    for (&x, &w) in centers.iter().zip(px) {
        let a = theta.x + theta.y * x.x + theta.z * x.y;
        // ln(2 cosh a), computed from the stable side.
        value += w * (a.abs() + (-2.0 * a.abs()).exp().ln_1p());
        let m = a.tanh();
        grad += Vector3::new(1.0, x.x, x.y) * (w * m);
    }
    (value - theta.dot(&targets), grad - targets)
}

fn conditional_hessian(
    centers: &[Vector2<f64>],
    px: &[f64],
    theta: Vector3<f64>,
) -> nalgebra::Matrix3<f64> {
    let mut h = nalgebra::Matrix3::zeros();
    for (&x, &w) in centers.iter().zip(px) {
        let a = theta.x + theta.y * x.x + theta.z * x.y;
        let m = a.tanh();
        let u = Vector3::new(1.0, x.x, x.y);
        h += u * u.transpose() * (w * (1.0 - m * m));
    }
    h
}

/// Maximize `Σ_cells px·H(Y|cell)` subject to `E[Y] = eY`, `E[XY] = eXY`
/// (grid-sum expectations). `constrain_phi2 = false` drops the `E[X₂Y]`
/// constraint, pinning its multiplier to zero.
pub(crate) fn grid_conditional_maxent_masked(
    grid: &GridSpec,
    px: &[f64],
    targets: (f64, Vector2<f64>),
    constrain_phi2: bool,
) -> Result<GridDistribution> {
    if px.len() != grid.cells() {
        return Err(Error::InvalidArgument("px length must match the cell count".into()));
    }
    let centers = grid.centers();
    let t = Vector3::new(targets.0, targets.1.x, targets.1.y);
    let masked_sup = |r: &Vector3<f64>| {
        if constrain_phi2 {
            r.amax()
        } else {
            r.x.abs().max(r.y.abs())
        }
    };
    let masked_norm = |r: &Vector3<f64>| {
        if constrain_phi2 {
            r.norm()
        } else {
            r.x.hypot(r.y)
        }
    };

    let mut theta = Vector3::zeros();
    let (_, mut residual) = conditional_dual(&centers, px, t, theta);
    for iter in 0..MAX_ITER {
        if masked_sup(&residual) <= ORACLE_TOL {
            let pos = centers
                .iter()
                .map(|&x| crate::causal::tanh_form(theta.x + theta.y * x.x + theta.z * x.y))
                .collect();
            return Ok(GridDistribution::YGivenX {
                grid: grid.clone(),
                px: px.to_vec(),
                pos_given_x: pos,
            });
        }
        let h = conditional_hessian(&centers, px, theta);
        let step = if constrain_phi2 {
            h.full_piv_lu()
                .solve(&residual)
                .ok_or(Error::Singular { context: "grid conditional dual Hessian" })?
        } else {
            let h2 = Matrix2::new(h[(0, 0)], h[(0, 1)], h[(1, 0)], h[(1, 1)]);
            let s = h2
                .full_piv_lu()
                .solve(&Vector2::new(residual.x, residual.y))
                .ok_or(Error::Singular { context: "grid conditional dual Hessian" })?;
            Vector3::new(s.x, s.y, 0.0)
        };
        let current = masked_norm(&residual);
        let mut damping = 1.0;
        loop {
            let candidate = theta - step * damping;
            let (_, r_new) = conditional_dual(&centers, px, t, candidate);
            if masked_norm(&r_new) < current {
                theta = candidate;
                residual = r_new;
                break;
            }
            damping *= 0.5;
            if damping < 1e-12 {
                return Err(Error::NonConvergence {
                    iterations: iter + 1,
                    residual: masked_sup(&residual),
                });
            }
        }
    }
    Err(Error::NonConvergence { iterations: MAX_ITER, residual: masked_sup(&residual) })
}

/// Conditional-label grid MAXENT with the full `(E[Y], E[XY])` target set.
pub fn grid_conditional_maxent(
    grid: &GridSpec,
    px: &[f64],
    targets: (f64, Vector2<f64>),
) -> Result<GridDistribution> {
    grid_conditional_maxent_masked(grid, px, targets, true)
}

/// Constraint targets of the class-conditional problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassConditionalTargets {
    /// `E[XY]`.
    pub phi: Vector2<f64>,
    /// `E[X]`.
    pub xbar: Vector2<f64>,
    /// `E[XᵢXⱼ]` entries `(s̄₁², s̄₂², s̄₁₂)`.
    pub second: Matrix2<f64>,
}

impl ClassConditionalTargets {
    pub fn from_spec(spec: &MomentSpec) -> Self {
        ClassConditionalTargets { phi: spec.phi, xbar: spec.xbar, second: spec.sigma_x }
    }
}

/// Feature values `f_j(x, y)` in dual order
/// `[yx₁, yx₂, x₁, x₂, x₁², x₂², x₁x₂]`.
fn class_features(x: Vector2<f64>, y: f64) -> [f64; 7] {
    [y * x.x, y * x.y, x.x, x.y, x.x * x.x, x.y * x.y, x.x * x.y]
}

struct ClassDualState {
    /// `p(cell | y)` for `y = +1` and `y = −1`.
    tables: [Vec<f64>; 2],
    residual: DVector<f64>,
    hessian: DMatrix<f64>,
}

fn class_dual_state(
    centers: &[Vector2<f64>],
    q: f64,
    lambda: &DVector<f64>,
    active: &[usize],
    targets: &[f64; 7],
) -> ClassDualState {
    let n = centers.len();
    let dim = active.len();
    let mut tables = [vec![0.0; n], vec![0.0; n]];
    let mut residual = DVector::zeros(dim);
    let mut hessian = DMatrix::zeros(dim, dim);

    for (slot, &y) in [1.0f64, -1.0].iter().enumerate() {
        let py = if y > 0.0 { q } else { 1.0 - q };
        // Log-sum-exp normalization of the exponential-family weights.
        let mut exponents = Vec::with_capacity(n);
        let mut max_e = f64::NEG_INFINITY;
        for &x in centers {
            let f = class_features(x, y);
            let e: f64 = active.iter().enumerate().map(|(a, &j)| lambda[a] * f[j]).sum();
            max_e = max_e.max(e);
            exponents.push(e);
        }
        let mut z = 0.0;
        for e in &mut exponents {
            *e = (*e - max_e).exp();
            z += *e;
        }
        let table = &mut tables[slot];
        for (p, e) in table.iter_mut().zip(&exponents) {
            *p = e / z;
        }

        let mut mean = DVector::zeros(dim);
        let mut second = DMatrix::zeros(dim, dim);
        for (&x, &p) in centers.iter().zip(table.iter()) {
            let f = class_features(x, y);
            for (a, &j) in active.iter().enumerate() {
                mean[a] += p * f[j];
                for (b, &l) in active.iter().enumerate() {
                    second[(a, b)] += p * f[j] * f[l];
                }
            }
        }
        residual += &mean * py;
        hessian += (&second - &mean * mean.transpose()) * py;
    }
    for (a, &j) in active.iter().enumerate() {
        residual[a] -= targets[j];
    }
    ClassDualState { tables, residual, hessian }
}

/// Maximize the weighted conditional entropy `H(X|Y)` on the grid subject
/// to the full §-style constraint set. `constrain_s12 = false` drops the
/// `E[X₁X₂]` constraint.
pub(crate) fn grid_class_conditional_maxent_masked(
    grid: &GridSpec,
    q: f64,
    targets: &ClassConditionalTargets,
    constrain_s12: bool,
) -> Result<GridDistribution> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument(format!("q = {q} not in (0, 1)")));
    }
    let centers = grid.centers();
    let target_values = [
        targets.phi.x,
        targets.phi.y,
        targets.xbar.x,
        targets.xbar.y,
        targets.second[(0, 0)],
        targets.second[(1, 1)],
        targets.second[(0, 1)],
    ];
    let active: Vec<usize> = if constrain_s12 {
        (0..7).collect()
    } else {
        (0..6).collect()
    };

    let mut lambda = DVector::zeros(active.len());
    let mut state = class_dual_state(&centers, q, &lambda, &active, &target_values);
    for iter in 0..MAX_ITER {
        if state.residual.amax() <= ORACLE_TOL {
            let [pos, neg] = state.tables;
            return Ok(GridDistribution::XGivenY { grid: grid.clone(), q, pos, neg });
        }
        let step = state
            .hessian
            .clone()
            .lu()
            .solve(&state.residual)
            .ok_or(Error::Singular { context: "grid class-conditional dual Hessian" })?;
        let current = state.residual.norm();
        let mut damping = 1.0;
        loop {
            let candidate = &lambda - &step * damping;
            let next = class_dual_state(&centers, q, &candidate, &active, &target_values);
            if next.residual.norm() < current {
                lambda = candidate;
                state = next;
                break;
            }
            damping *= 0.5;
            if damping < 1e-12 {
                return Err(Error::NonConvergence {
                    iterations: iter + 1,
                    residual: state.residual.amax(),
                });
            }
        }
    }
    Err(Error::NonConvergence { iterations: MAX_ITER, residual: state.residual.amax() })
}

/// Class-conditional grid MAXENT with the full constraint set.
pub fn grid_class_conditional_maxent(
    grid: &GridSpec,
    q: f64,
    targets: &ClassConditionalTargets,
) -> Result<GridDistribution> {
    grid_class_conditional_maxent_masked(grid, q, targets, true)
}

/// Per-class mean and covariance of a class-conditional grid table.
pub fn grid_class_stats(dist: &GridDistribution) -> Option<[(Vector2<f64>, Matrix2<f64>); 2]> {
    let GridDistribution::XGivenY { grid, pos, neg, .. } = dist else {
        return None;
    };
    let centers = grid.centers();
    let stats = |table: &[f64]| {
        let mut mean = Vector2::zeros();
        let mut second = Matrix2::zeros();
        for (&x, &p) in centers.iter().zip(table) {
            mean += x * p;
            second += x * x.transpose() * p;
        }
        (mean, second - mean * mean.transpose())
    };
    Some([stats(pos), stats(neg)])
}

/// Entropy-optimal value of the unobserved `φ₂` by golden-section search
/// over the interval where the conditional covariance stays positive
/// definite. Returns the maximizer and the determinant there.
///
/// The determinant is a concave quadratic in `φ₂`, so near its flat top the
/// golden-section comparisons run out of float resolution around 1e−8 from
/// the true stationary point; one exact finite-difference Newton step
/// polishes the bracket midpoint down to roundoff.
pub fn det_argmax_phi2(spec: &MomentSpec) -> Result<(f64, f64)> {
    let spec = crate::moments::center(spec);
    let (lo, hi) = phi2_feasible_interval(&spec)?;
    let det_at = |phi2: f64| {
        let mut completed = spec.clone();
        completed.phi.y = phi2;
        completed.avail_phi2 = true;
        let m = conditional_covariance_unchecked(&completed);
        m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
    };
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = det_at(c);
    let mut fd = det_at(d);
    while b - a > 1e-10 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = det_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = det_at(d);
        }
    }
    let mut star = 0.5 * (a + b);
    // Central differences are exact on a quadratic; one Newton step.
    let h = 1e-4 * (hi - lo).max(1.0);
    let (f_plus, f_mid, f_minus) = (det_at(star + h), det_at(star), det_at(star - h));
    let first = (f_plus - f_minus) / (2.0 * h);
    let second = (f_plus - 2.0 * f_mid + f_minus) / (h * h);
    if second < 0.0 {
        star = (star - first / second).clamp(lo, hi);
    }
    Ok((star, det_at(star)))
}

/// Agreement report between a grid solution and the matching closed form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleReport {
    /// Final absolute constraint residuals of the grid solve.
    pub constraint_residuals: Vec<f64>,
    /// Sup-norm distance between the grid solution and the closed form.
    pub sup_norm_gap: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub phi2_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub phi2_paper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub discrepancy: Option<f64>,
}

impl OracleReport {
    pub fn passes(&self) -> bool {
        self.sup_norm_gap <= GAP_THRESHOLD
    }
}

/// Run the grid oracle against the closed-form solver for `direction`,
/// honoring the spec's availability flags.
pub fn oracle_report(
    spec: &MomentSpec,
    direction: Direction,
    cells_per_axis: usize,
) -> Result<OracleReport> {
    use crate::moments::MissingMoment;

    let mut phi2_star = None;
    let mut phi2_paper = None;
    let mut discrepancy = None;
    if spec.missing() == MissingMoment::Phi2 {
        let (star, _) = det_argmax_phi2(spec)?;
        let paper = crate::anticausal::phi2_upper_bound(spec)?;
        phi2_star = Some(star);
        phi2_paper = Some(paper);
        if (star - paper).abs() > 1e-9 {
            discrepancy = Some((star - paper).abs());
        }
    }

    let grid = GridSpec::for_spec(spec, cells_per_axis)?;
    let (constraint_residuals, sup_norm_gap) = match direction {
        Direction::Causal => {
            let (model, constrain_phi2) = match spec.missing() {
                MissingMoment::None => (crate::causal::fit_causal(spec)?, true),
                MissingMoment::Phi2 => (crate::causal::fit_causal_missing_phi2(spec)?, false),
                MissingMoment::S12 => (crate::causal::fit_causal_missing_s12(spec)?, true),
            };
            let px = grid.gaussian_weights(model.marginal.mean, &model.marginal.cov)?;
            let targets = (spec.mean_y(), spec.phi);
            let dist = grid_conditional_maxent_masked(&grid, &px, targets, constrain_phi2)?;
            let GridDistribution::YGivenX { pos_given_x, .. } = &dist else { unreachable!() };

            let centers = grid.centers();
            let mut gap = 0.0f64;
            for (&x, &p) in centers.iter().zip(pos_given_x) {
                gap = gap.max((p - crate::causal::causal_posterior(&model, x)).abs());
            }
            let mut moments = Vector3::zeros();
            for (&x, (&w, &p)) in centers.iter().zip(px.iter().zip(pos_given_x)) {
                let m = 2.0 * p - 1.0;
                moments += Vector3::new(1.0, x.x, x.y) * (w * m);
            }
            let mut residuals = vec![
                (moments.x - spec.mean_y()).abs(),
                (moments.y - spec.phi.x).abs(),
            ];
            if constrain_phi2 {
                residuals.push((moments.z - spec.phi.y).abs());
            }
            (residuals, gap)
        }
        Direction::Anticausal => {
            let (model, constrain_s12) = match spec.missing() {
                MissingMoment::None => (crate::anticausal::fit_anticausal(spec)?, true),
                MissingMoment::Phi2 => {
                    // Compare against the entropy-completed spec, matching the
                    // default imputation.
                    let completed = crate::anticausal::fit_anticausal_missing_phi2(
                        spec,
                        crate::anticausal::ImputationStrategy::Entropy,
                    )?;
                    (completed, true)
                }
                MissingMoment::S12 => (crate::anticausal::fit_anticausal_missing_s12(spec)?, false),
            };
            let mut targets = ClassConditionalTargets::from_spec(spec);
            if spec.missing() == MissingMoment::Phi2 {
                targets.phi.y = model.meta.imputed_phi2.expect("imputed value recorded");
            }
            let dist = grid_class_conditional_maxent_masked(&grid, spec.q, &targets, constrain_s12)?;

            // Sup-norm distance between the per-class cell tables (read as
            // densities) and the closed-form Gaussian components.
            let GridDistribution::XGivenY { pos, neg, .. } = &dist else { unreachable!() };
            let area = grid.cell_area();
            let centers = grid.centers();
            let mut gap = 0.0f64;
            for (table, mean, cov) in [
                (pos, model.mu_plus, &model.sigma_cond_plus),
                (neg, model.mu_minus, &model.sigma_cond_minus),
            ] {
                for (&x, &p) in centers.iter().zip(table.iter()) {
                    let closed = crate::anticausal::log_gaussian(x, mean, cov).exp();
                    gap = gap.max((p / area - closed).abs());
                }
            }
            let mut sums = [0.0f64; 7];
            for (slot, table, py) in [(0, pos, spec.q), (1, neg, 1.0 - spec.q)] {
                let y = if slot == 0 { 1.0 } else { -1.0 };
                for (&x, &p) in centers.iter().zip(table.iter()) {
                    let f = class_features(x, y);
                    for (j, s) in sums.iter_mut().enumerate() {
                        *s += py * p * f[j];
                    }
                }
            }
            let target_values = [
                targets.phi.x,
                targets.phi.y,
                targets.xbar.x,
                targets.xbar.y,
                targets.second[(0, 0)],
                targets.second[(1, 1)],
                targets.second[(0, 1)],
            ];
            let upto = if constrain_s12 { 7 } else { 6 };
            let residuals = (0..upto).map(|j| (sums[j] - target_values[j]).abs()).collect();
            (residuals, gap)
        }
        Direction::Combined => {
            return Err(Error::InvalidArgument(
                "grid oracle runs per block; use --direction causal or anticausal".into(),
            ))
        }
    };

    Ok(OracleReport {
        constraint_residuals,
        sup_norm_gap,
        phi2_star,
        phi2_paper,
        discrepancy,
    })
}
