use proptest::prelude::*;
use spdelab_core::config::{MatrixSpec, ScenarioConfig};
use spdelab_core::delay::SegmentPath;
use spdelab_core::linalg::{self, Mat};
use spdelab_core::model::{build_model, weighted_gramian, GramianKind};
use spdelab_core::{segment_norm, DelayMeasure, DiniModulus};

fn shifted(shift: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.model.a1 = MatrixSpec::ShiftedA2 { shift };
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn semigroup_composes(s in 0.0f64..1.5, t in 0.0f64..1.5, shift in -0.5f64..0.5) {
        let ops = build_model(&shifted(shift)).unwrap();
        let m = ops.augmented_drift();
        let lhs = linalg::expm(&m, s + t);
        let rhs = linalg::expm(&m, s) * linalg::expm(&m, t);
        prop_assert!((lhs - &rhs).norm() < 1e-11 * (1.0 + rhs.norm()));
    }

    #[test]
    fn gramian_grows_with_the_horizon(t in 0.1f64..2.0, extra in 0.01f64..1.0, shift in -0.5f64..0.5) {
        let ops = build_model(&shifted(shift)).unwrap();
        let a = weighted_gramian(&ops, GramianKind::Plain, t).unwrap();
        let b = weighted_gramian(&ops, GramianKind::Plain, t + extra).unwrap();
        let gap: Mat = &b - &a;
        let min = linalg::symmetric_eigenvalues(&gap).min();
        prop_assert!(min > -1e-12 * b.norm(), "min eigenvalue {min}");
        prop_assert!(linalg::symmetric_eigenvalues(&a).min() > 0.0);
    }

    #[test]
    fn segment_norm_satisfies_the_parallelogram_law(
        a in prop::collection::vec(-3.0f64..3.0, 8),
        b in prop::collection::vec(-3.0f64..3.0, 8),
        slope in -2.0f64..2.0,
    ) {
        let cfg = ScenarioConfig::default();
        let dt = 1e-2;
        let nu = DelayMeasure::from_config(&cfg.delay, dt).unwrap();
        let lag = nu.max_lag;
        let x = SegmentPath::from_fn(dt, lag, 8, |t| a.iter().map(|v| v * (1.0 + slope * t)).collect()).unwrap();
        let y = SegmentPath::from_fn(dt, lag, 8, |t| b.iter().map(|v| v - slope * t).collect()).unwrap();
        let n = |s: &SegmentPath| segment_norm(s, &nu).unwrap().powi(2);
        let lhs = n(&x.add(&y).unwrap()) + n(&x.sub(&y).unwrap());
        let rhs = 2.0 * n(&x) + 2.0 * n(&y);
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs));
    }

    #[test]
    fn dini_modulus_is_increasing(k in 0.01f64..5.0, delta in 0.05f64..2.0, s in 1e-9f64..10.0, f in 1.0001f64..10.0) {
        let m = DiniModulus::new(k, delta, std::f64::consts::E.powi(2)).unwrap();
        prop_assert!(m.phi(s) < m.phi(s * f));
        prop_assert!(m.phi(s * f) <= m.sup() * (1.0 + 1e-12));
    }
}
