//! Deterministic synthetic data: a counter-based generator with an explicit
//! Gaussian inverse-CDF transform, and samplers for both model directions.
//!
//! The stream is a pure function of `(seed, counter)`, so identical seeds
//! reproduce identical byte streams and disjoint counter ranges can be
//! consumed independently.

use nalgebra::{Matrix2, Vector2};

use crate::anticausal::AnticausalModel;
use crate::causal::{causal_posterior, CausalModel};
use crate::error::{Error, Result};
use crate::moments::{MomentSpec, SampleRow, SampleSet};

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Counter-based pseudo-random stream seeded by a 64-bit value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeded {
    seed: u64,
    counter: u64,
}

impl Seeded {
    pub fn new(seed: u64) -> Self {
        Seeded { seed, counter: 0 }
    }

    /// Stream value at `index`, independent of the cursor.
    pub fn at(seed: u64, index: u64) -> u64 {
        // SplitMix64 output function applied to the indexed state.
        let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GAMMA));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = Seeded::at(self.seed, self.counter);
        self.counter += 1;
        v
    }

    /// Uniform draw strictly inside `(0, 1)` with 53-bit resolution.
    pub fn next_uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw via the inverse CDF of [`next_uniform`].
    ///
    /// [`next_uniform`]: Seeded::next_uniform
    pub fn next_gaussian(&mut self) -> f64 {
        inverse_normal_cdf(self.next_uniform())
    }
}

fn polynomial(r: f64, coeffs: &[f64]) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c)
}

/// Quantile function of the standard normal (Wichura's AS 241, PPND16),
/// accurate to about one ulp over `(0, 1)`.
pub fn inverse_normal_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    const CENTRAL_NUM: [f64; 8] = [
        3.387_132_872_796_366_5,
        1.331_416_678_917_843_8e2,
        1.971_590_950_306_551_3e3,
        1.373_169_376_550_946_1e4,
        4.592_195_393_154_987_1e4,
        6.726_577_092_700_870_4e4,
        3.343_057_558_358_813e4,
        2.509_080_928_730_122_7e3,
    ];
    const CENTRAL_DEN: [f64; 8] = [
        1.0,
        4.231_333_070_160_091e1,
        6.871_870_074_920_579e2,
        5.394_196_021_424_751e3,
        2.121_379_430_158_659_7e4,
        3.930_789_580_009_271e4,
        2.872_908_573_572_194_3e4,
        5.226_495_278_852_545_5e3,
    ];
    const MID_NUM: [f64; 8] = [
        1.423_437_110_749_683_5,
        4.630_337_846_156_545,
        5.769_497_221_460_691,
        3.647_848_324_763_204_5,
        1.270_458_252_452_368_4,
        2.417_807_251_774_506e-1,
        2.272_384_498_926_918_4e-2,
        7.745_450_142_783_414e-4,
    ];
    const MID_DEN: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_9,
        1.676_384_830_183_803_8,
        6.897_673_349_851e-1,
        1.481_039_764_274_800_8e-1,
        1.519_866_656_361_645_7e-2,
        5.475_938_084_995_345e-4,
        1.050_750_071_644_416_9e-9,
    ];
    const TAIL_NUM: [f64; 8] = [
        6.657_904_643_501_103,
        5.463_784_911_164_114,
        1.784_826_539_917_291_3,
        2.965_605_718_285_048_9e-1,
        2.653_218_952_657_612_4e-2,
        1.242_660_947_388_078_4e-3,
        2.711_555_568_743_487_6e-5,
        2.010_334_399_292_288_1e-7,
    ];
    const TAIL_DEN: [f64; 7] = [
        1.0,
        5.998_322_065_558_88e-1,
        1.369_298_809_227_358e-1,
        1.487_536_129_085_061_5e-2,
        7.868_691_311_456_133e-4,
        1.846_318_317_510_054_8e-6,
        1.421_511_758_316_446e-15,
    ];

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * polynomial(r, &CENTRAL_NUM) / polynomial(r, &CENTRAL_DEN);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        polynomial(r, &MID_NUM) / polynomial(r, &MID_DEN)
    } else {
        let r = r - 5.0;
        polynomial(r, &TAIL_NUM) / polynomial(r, &TAIL_DEN)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

fn cholesky_lower(cov: &Matrix2<f64>, context: &'static str) -> Result<Matrix2<f64>> {
    nalgebra::Cholesky::new(*cov)
        .map(|c| c.l())
        .ok_or(Error::Singular { context })
}

/// Draw `n` rows from a causal model: `x` from the marginal, then the label
/// from the tanh posterior. Three stream values per row, in the order
/// `(z₁, z₂, u_label)`.
pub fn sample_causal(model: &CausalModel, n: usize, seed: &mut Seeded) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be >= 1".into()));
    }
    let l = cholesky_lower(&model.marginal.cov, "causal marginal covariance")?;
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let z = Vector2::new(seed.next_gaussian(), seed.next_gaussian());
        let x = model.marginal.mean + l * z;
        let u = seed.next_uniform();
        let y = if u < causal_posterior(model, x) { 1 } else { -1 };
        rows.push(SampleRow { y, x, x2: None });
    }
    Ok(SampleSet { rows })
}

/// Draw `n` rows from an anticausal model: the label from `Bernoulli(q)`
/// over `{−1, +1}`, then `x` from the matching class component. Three
/// stream values per row, in the order `(u_label, z₁, z₂)`.
pub fn sample_anticausal(model: &AnticausalModel, n: usize, seed: &mut Seeded) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be >= 1".into()));
    }
    let l_plus = cholesky_lower(&model.sigma_cond_plus, "class +1 covariance")?;
    let l_minus = cholesky_lower(&model.sigma_cond_minus, "class -1 covariance")?;
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let u = seed.next_uniform();
        let z = Vector2::new(seed.next_gaussian(), seed.next_gaussian());
        let (y, x) = if u < model.q {
            (1, model.mu_plus + l_plus * z)
        } else {
            (-1, model.mu_minus + l_minus * z)
        };
        rows.push(SampleRow { y, x, x2: None });
    }
    Ok(SampleSet { rows })
}

/// A random centered, fully observed, feasible constraint set.
///
/// `q` is uniform on `[q_min, q_max]`; the covariance is a random
/// well-conditioned SPD matrix; `φ` is placed at a uniform fraction
/// `ρ ∈ (0.05, rho_max)` of the mixture-feasibility boundary
/// `c·φᵀΣ⁻¹φ = 1`, so the conditional covariance stays positive definite
/// with margin `1 − ρ²`.
pub fn random_centered_spec(rng: &mut Seeded, q_min: f64, q_max: f64, rho_max: f64) -> MomentSpec {
    let q = q_min + (q_max - q_min) * rng.next_uniform();
    let a = Matrix2::new(
        2.0 * rng.next_uniform() - 1.0,
        2.0 * rng.next_uniform() - 1.0,
        2.0 * rng.next_uniform() - 1.0,
        2.0 * rng.next_uniform() - 1.0,
    );
    let sigma = a * a.transpose() + Matrix2::identity() * 0.3;
    let angle = 2.0 * std::f64::consts::PI * rng.next_uniform();
    let dir = Vector2::new(angle.cos(), angle.sin());
    let rho = 0.05 + (rho_max - 0.05) * rng.next_uniform();
    let c = 1.0 / (4.0 * q * (1.0 - q));
    let quad_form = (sigma
        .full_piv_lu()
        .solve(&dir)
        .expect("spd matrix is invertible"))
    .dot(&dir);
    let phi = dir * (rho / (c * quad_form).sqrt());
    MomentSpec::full(q, Vector2::zeros(), phi, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal::GaussianParams;
    use crate::moments::{estimate_moments, validate};
    use approx::assert_abs_diff_eq;

    #[test]
    fn stream_is_deterministic_and_indexable() {
        let mut a = Seeded::new(99);
        let mut b = Seeded::new(99);
        for i in 0..64 {
            let v = a.next_u64();
            assert_eq!(v, b.next_u64());
            assert_eq!(v, Seeded::at(99, i));
        }
        assert_ne!(Seeded::at(1, 0), Seeded::at(2, 0));
    }

    #[test]
    fn uniforms_stay_strictly_inside_unit_interval() {
        let mut rng = Seeded::new(3);
        for _ in 0..10_000 {
            let u = rng.next_uniform();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn inverse_normal_cdf_reference_values() {
        assert_eq!(inverse_normal_cdf(0.5), 0.0);
        assert_abs_diff_eq!(inverse_normal_cdf(0.975), 1.959963984540054, epsilon = 1e-13);
        assert_abs_diff_eq!(inverse_normal_cdf(0.01), -2.3263478740408408, epsilon = 1e-13);
        assert_abs_diff_eq!(inverse_normal_cdf(0.001), -3.090232306167813, epsilon = 1e-13);
        assert_abs_diff_eq!(inverse_normal_cdf(0.8), 0.8416212335729143, epsilon = 1e-13);
        assert_abs_diff_eq!(inverse_normal_cdf(1e-9), -5.9978070150076865, epsilon = 1e-12);
        assert_abs_diff_eq!(inverse_normal_cdf(0.3), -0.5244005127080409, epsilon = 1e-13);
        // Symmetry
        assert_abs_diff_eq!(
            inverse_normal_cdf(0.123),
            -inverse_normal_cdf(0.877),
            epsilon = 1e-13
        );
    }

    #[test]
    fn fair_labels_from_flat_model() {
        let model = CausalModel {
            lambda0: 0.0,
            lambda: Vector2::zeros(),
            marginal: GaussianParams::new(Vector2::zeros(), Matrix2::identity()).unwrap(),
        };
        let n = 100_000;
        let sample = sample_causal(&model, n, &mut Seeded::new(11)).unwrap();
        let q = sample.rows.iter().filter(|r| r.y > 0).count() as f64 / n as f64;
        let band = 3.0 * (0.25 / n as f64).sqrt();
        assert!((q - 0.5).abs() <= band, "q = {q}, band {band}");
    }

    #[test]
    fn causal_sample_moments_match_forward_map() {
        let model = CausalModel {
            lambda0: 0.2,
            lambda: Vector2::new(0.8, -0.3),
            marginal: GaussianParams::new(Vector2::zeros(), Matrix2::new(1.0, 0.4, 0.4, 1.5))
                .unwrap(),
        };
        let (ey, exy) =
            crate::causal::causal_moment_forward(model.lambda0, model.lambda, &model.marginal)
                .unwrap();
        let n = 100_000;
        let sample = sample_causal(&model, n, &mut Seeded::new(17)).unwrap();
        let spec = estimate_moments(&sample).unwrap();
        // 3 standard errors, with per-statistic variances from the sample.
        let nf = n as f64;
        let se_y = (sample
            .rows
            .iter()
            .map(|r| (f64::from(r.y) - ey).powi(2))
            .sum::<f64>()
            / nf
            / nf)
            .sqrt();
        assert!((spec.mean_y() - ey).abs() <= 3.0 * se_y);
        for i in 0..2 {
            let mean = exy[i];
            let se = (sample
                .rows
                .iter()
                .map(|r| (r.x[i] * f64::from(r.y) - mean).powi(2))
                .sum::<f64>()
                / nf
                / nf)
                .sqrt();
            assert!(
                (spec.phi[i] - mean).abs() <= 3.0 * se,
                "phi_{i}: {} vs {mean} (se {se})",
                spec.phi[i]
            );
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let model = CausalModel {
            lambda0: 0.1,
            lambda: Vector2::new(0.4, 0.2),
            marginal: GaussianParams::new(Vector2::zeros(), Matrix2::identity()).unwrap(),
        };
        let a = sample_causal(&model, 500, &mut Seeded::new(5)).unwrap();
        let b = sample_causal(&model, 500, &mut Seeded::new(5)).unwrap();
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        a.to_csv(&mut csv_a).unwrap();
        b.to_csv(&mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);
    }

    #[test]
    fn random_specs_validate_clean() {
        let mut rng = Seeded::new(2024);
        for _ in 0..200 {
            let spec = random_centered_spec(&mut rng, 0.15, 0.85, 0.85);
            assert!(validate(&spec).is_empty(), "violations for {spec:?}");
        }
    }
}
