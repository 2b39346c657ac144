//! Property-based invariants over randomized inputs.

use cmaxent::anticausal::{anticausal_posterior, fit_anticausal};
use cmaxent::boundary::DecisionBoundary;
use cmaxent::causal::{causal_posterior, CausalModel, GaussianParams};
use cmaxent::moments::{center, estimate_moments, validate, SampleRow, SampleSet};
use nalgebra::{Matrix2, Vector2};
use proptest::prelude::*;

fn finite_coord() -> impl Strategy<Value = f64> {
    -50.0..50.0f64
}

fn sample_set() -> impl Strategy<Value = SampleSet> {
    // At least one row of each label, mixed with arbitrary labelled rows.
    (
        prop::collection::vec((any::<bool>(), finite_coord(), finite_coord()), 0..40),
        (finite_coord(), finite_coord()),
        (finite_coord(), finite_coord()),
    )
        .prop_map(|(rows, pos, neg)| {
            let mut out = vec![
                SampleRow { y: 1, x: Vector2::new(pos.0, pos.1), x2: None },
                SampleRow { y: -1, x: Vector2::new(neg.0, neg.1), x2: None },
            ];
            out.extend(rows.into_iter().map(|(label, a, b)| SampleRow {
                y: if label { 1 } else { -1 },
                x: Vector2::new(a, b),
                x2: None,
            }));
            SampleSet { rows: out }
        })
}

fn spd_matrix() -> impl Strategy<Value = Matrix2<f64>> {
    ((-1.0..1.0f64), (-1.0..1.0f64), (-1.0..1.0f64), (-1.0..1.0f64)).prop_map(|(a, b, c, d)| {
        let m = Matrix2::new(a, b, c, d);
        m * m.transpose() + Matrix2::identity() * 0.2
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn estimated_moments_always_validate(samples in sample_set()) {
        let spec = estimate_moments(&samples).unwrap();
        prop_assert!(validate(&spec).is_empty(), "violations on empirical moments");
        // Centering keeps the spec feasible and is idempotent.
        let centered = center(&spec);
        prop_assert!(validate(&centered).is_empty());
        prop_assert_eq!(center(&centered), centered.clone());
        prop_assert!(centered.xbar == Vector2::zeros());
    }

    #[test]
    fn csv_round_trip_is_lossless(samples in sample_set()) {
        let mut buf = Vec::new();
        samples.to_csv(&mut buf).unwrap();
        let back = SampleSet::from_csv(&buf[..]).unwrap();
        prop_assert_eq!(back, samples);
    }

    #[test]
    fn boundary_rule_invariant_under_positive_rescaling(
        wx in -5.0..5.0f64,
        wy in -5.0..5.0f64,
        b in -3.0..3.0f64,
        scale in 1e-3..1e3f64,
        px in -4.0..4.0f64,
        py in -4.0..4.0f64,
    ) {
        prop_assume!(wx.abs() + wy.abs() > 1e-6);
        let w = Vector2::new(wx, wy);
        let base = DecisionBoundary::new(w, b).unwrap();
        let scaled = DecisionBoundary::new(w * scale, b * scale).unwrap();
        prop_assert!((base.w - scaled.w).norm() < 1e-12);
        prop_assert!((base.b - scaled.b).abs() < 1e-9 * base.b.abs().max(1.0));
        prop_assert_eq!(base.decide(Vector2::new(px, py)), scaled.decide(Vector2::new(px, py)));
        // Canonicalization is idempotent.
        let again = DecisionBoundary::new(base.w, base.b).unwrap();
        prop_assert_eq!(again, base);
    }

    #[test]
    fn causal_posterior_complement_symmetry(
        l0 in -2.0..2.0f64,
        lx in -2.0..2.0f64,
        ly in -2.0..2.0f64,
        x1 in -5.0..5.0f64,
        x2 in -5.0..5.0f64,
    ) {
        let marginal = GaussianParams::new(Vector2::zeros(), Matrix2::identity()).unwrap();
        let model = CausalModel { lambda0: l0, lambda: Vector2::new(lx, ly), marginal: marginal.clone() };
        let mirrored = CausalModel { lambda0: -l0, lambda: Vector2::new(-lx, -ly), marginal };
        let x = Vector2::new(x1, x2);
        let p = causal_posterior(&model, x);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((p + causal_posterior(&mirrored, x) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mixture_moments_reproduce_random_specs(
        sigma in spd_matrix(),
        q in 0.1..0.9f64,
        angle in 0.0..std::f64::consts::TAU,
        rho in 0.0..0.9f64,
    ) {
        let c = 1.0 / (4.0 * q * (1.0 - q));
        let dir = Vector2::new(angle.cos(), angle.sin());
        let quad = sigma.full_piv_lu().solve(&dir).unwrap().dot(&dir);
        let phi = dir * (rho / (c * quad).sqrt());
        let spec = cmaxent::moments::MomentSpec::full(q, Vector2::zeros(), phi, sigma);
        prop_assume!(validate(&spec).is_empty());

        let model = fit_anticausal(&spec).unwrap();
        prop_assert!((model.mean() - spec.xbar).amax() < 1e-12);
        prop_assert!((model.cross_moment() - spec.phi).amax() < 1e-12);
        prop_assert!((model.second_moment() - spec.sigma_x).amax() < 1e-11);

        // Posterior is a probability everywhere we probe.
        let p = anticausal_posterior(&model, Vector2::new(3.0, -3.0));
        prop_assert!(p.is_finite() && (0.0..=1.0).contains(&p));
    }
}
