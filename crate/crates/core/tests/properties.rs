use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use sheetreg::estimation::{fisher, mle, score};
use sheetreg::experiment::replication_seed;
use sheetreg::geometry::{circle_domain, DomainConfig, ValidatedDomain};
use sheetreg::quadrature::{integrate_1d, QuadConfig};
use sheetreg::random_fields::{draw_kl, FieldModel, FieldSample};
use sheetreg::regressors::{polynomial_example_basis, RegressorSet};
use sheetreg::stochastic_integrals::StochIntConfig;

fn disc() -> ValidatedDomain {
    circle_domain(2.0, 2.0, 1.0).unwrap().validate(64).unwrap()
}

fn model(kind: u8) -> FieldModel {
    match kind {
        0 => FieldModel::Wiener,
        1 => FieldModel::StationaryOu { alpha: 1.0, beta: 0.5, sigma: 1.5 },
        _ => FieldModel::ZeroStartOu { alpha: 0.7, beta: 1.2, sigma: 1.0 },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn circle_containment_matches_distance(
        cx in 1.5f64..10.0, cy in 1.5f64..10.0, r in 0.2f64..1.4,
        u in -1.5f64..1.5, v in -1.5f64..1.5,
    ) {
        let d = circle_domain(cx, cy, r).unwrap().validate(64).unwrap();
        let (s, t) = (cx + u * r, cy + v * r);
        let dist = (u * u + v * v).sqrt();
        prop_assume!((dist - 1.0).abs() > 1e-6);
        prop_assert_eq!(d.contains(s, t), dist < 1.0);
    }

    #[test]
    fn simpson_is_exact_on_cubics(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0, e in -5.0f64..5.0,
                                  lo in -3.0f64..3.0, w in 0.1f64..4.0) {
        let hi = lo + w;
        let f = |x: f64| a + b * x + c * x * x + e * x * x * x;
        let prim = |x: f64| a * x + b * x * x / 2.0 + c * x.powi(3) / 3.0 + e * x.powi(4) / 4.0;
        let q = integrate_1d(f, lo, hi, &QuadConfig::default());
        let exact = prim(hi) - prim(lo);
        prop_assert!((q.value - exact).abs() <= 1e-10 * (1.0 + exact.abs()));
    }

    #[test]
    fn expression_partials_match_polynomial(a in 0.1f64..5.0, b in 0.1f64..5.0, c in 0.1f64..5.0,
                                            s in 0.5f64..4.0, t in 0.5f64..4.0) {
        let expr = format!("{a}*s^2 + {b}*s*t + {c}*t^3");
        let regs = RegressorSet::from_exprs(&[&expr]).unwrap();
        let j = regs.jet(0, s, t).unwrap();
        let tol = 1e-12 * (1.0 + a + b + c) * 64.0;
        prop_assert!((j.v - (a * s * s + b * s * t + c * t.powi(3))).abs() <= tol);
        prop_assert!((j.d1 - (2.0 * a * s + b * t)).abs() <= tol);
        prop_assert!((j.d2 - (b * s + 3.0 * c * t * t)).abs() <= tol);
        prop_assert!((j.d12 - b).abs() <= tol);
    }

    #[test]
    fn kl_coefficients_do_not_depend_on_order(seed in any::<u64>(), n1 in 1usize..8, n2 in 1usize..8) {
        let a = draw_kl(n1, 3.0, 3.0, seed).unwrap();
        let b = draw_kl(n2, 3.0, 3.0, seed).unwrap();
        let m = n1.min(n2);
        for j in 0..m {
            for k in 0..m {
                prop_assert_eq!(a.omega(j, k), b.omega(j, k));
            }
        }
    }

    #[test]
    fn replication_seeds_are_distinct(base in any::<u64>(), i in 0usize..100_000, j in 0usize..100_000) {
        prop_assume!(i != j);
        prop_assert_ne!(replication_seed(base, i), replication_seed(base, j));
    }

    #[test]
    fn mle_inverts_spd_systems(entries in proptest::collection::vec(-2.0f64..2.0, 9),
                               m in proptest::collection::vec(-10.0f64..10.0, 3)) {
        let b = DMatrix::from_row_slice(3, 3, &entries);
        let a = &b * b.transpose() + DMatrix::identity(3, 3);
        let m = DVector::from_vec(m);
        let est = mle(&a, &(&a * &m), &FieldModel::Wiener).unwrap();
        for (x, y) in est.m_hat.iter().zip(m.iter()) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + y.abs()) * est.condition_number);
        }
    }

    #[test]
    fn domain_config_round_trips(cx in 1.5f64..10.0, cy in 1.5f64..10.0, r in 0.1f64..1.4) {
        let cfg = DomainConfig::Circle { cx, cy, r };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: DomainConfig = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn score_of_drift_is_linear_in_coefficients(kind in 0u8..3, m in proptest::collection::vec(-10.0f64..10.0, 3)) {
        let d = disc();
        let regs = polynomial_example_basis();
        let model = model(kind);
        let cfg = StochIntConfig::default();
        let z = FieldSample::drift_only(model, 3.0, 3.0, regs.clone(), m.clone()).unwrap();
        let a = fisher(&model, &d, &regs, &cfg.quad).unwrap();
        let zeta = score(&model, &z, &d, &regs, &cfg).unwrap();
        let am = &a * DVector::from_vec(m);
        prop_assert!((&zeta - &am).amax() <= 1e-6 * (1.0 + am.amax()));
    }

    #[test]
    fn score_scales_with_noise(kind in 0u8..3, seed in any::<u64>(), lambda in -3.0f64..3.0) {
        let d = disc();
        let regs = polynomial_example_basis();
        let model = model(kind);
        let cfg = StochIntConfig::default();
        let kl = draw_kl(5, 3.0, 3.0, seed).unwrap();
        let unit = FieldSample::new(model, kl.clone()).unwrap();
        let scaled = FieldSample::new(model, kl).unwrap().with_noise_scale(lambda);
        let z1 = score(&model, &unit, &d, &regs, &cfg).unwrap();
        let z2 = score(&model, &scaled, &d, &regs, &cfg).unwrap();
        prop_assert!((&z2 - &z1 * lambda).amax() <= 1e-6 * (1.0 + z1.amax() * lambda.abs()));
    }
}
