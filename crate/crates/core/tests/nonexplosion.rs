use spdelab_core::config::{
    BihariConfig, CoefficientsConfig, DriftConfig, FunctionalConfig, HFamily, PhiFamily, ScenarioConfig,
};
use spdelab_core::nonexplosion::{bihari_bound_check, check_growth, run_bihari, GrowthPair};
use spdelab_core::{Error, Scenario};

fn pair(phi: PhiFamily) -> GrowthPair {
    GrowthPair {
        phi,
        h: HFamily::Constant { c: 1.0 },
    }
}

#[test]
fn constant_phi_has_a_linear_transform() {
    let g = pair(PhiFamily::Constant { c: 0.8 });
    for s in [1.0, 1.5, 7.0, 300.0] {
        assert!((g.psi(3.0, s).unwrap() - (s - 1.0) / 1.6).abs() < 1e-9);
    }
    for v in [0.0, 0.4, 12.0] {
        assert!((g.psi_inv(3.0, v).unwrap() - (1.0 + 1.6 * v)).abs() < 1e-8);
    }
}

#[test]
fn affine_phi_matches_the_logarithm() {
    let g = pair(PhiFamily::Affine { c: 1.3 });
    for n in [1.5, 4.0, 20.0] {
        for s in [0.2, 1.0, 2.0, 50.0, 1e6] {
            let exact = g.psi_closed_form(n, s).unwrap();
            assert!((g.psi(n, s).unwrap() - exact).abs() < 1e-9, "N {n}, s {s}");
        }
    }
}

#[test]
fn inverse_undoes_the_transform() {
    for phi in [
        PhiFamily::Constant { c: 0.5 },
        PhiFamily::Affine { c: 2.0 },
        PhiFamily::LogAffine { c: 0.7 },
    ] {
        let g = pair(phi);
        let mut prev = f64::NEG_INFINITY;
        for s in [0.0, 0.3, 1.0, 2.5, 10.0, 1e3, 1e5] {
            let v = g.psi(2.0, s).unwrap();
            assert!(v > prev);
            prev = v;
            let back = g.psi_inv(2.0, v).unwrap();
            assert!((back - s).abs() <= 1e-9 * s.max(1.0), "{phi:?}: {back} vs {s}");
        }
    }
}

#[test]
fn derived_pair_satisfies_the_growth_condition() {
    let sc = Scenario::build(&ScenarioConfig::default()).unwrap();
    let g = GrowthPair::derived(&sc.drift, &sc.functional);
    assert!(check_growth(&g, &sc.drift, &sc.functional, &sc.nu, 2000, 3).pass);
}

#[test]
fn undersized_pair_is_rejected() {
    let sc = Scenario::build(&ScenarioConfig::default()).unwrap();
    let g = GrowthPair {
        phi: PhiFamily::Constant { c: 1e-3 },
        h: HFamily::Constant { c: 1e-3 },
    };
    let err = bihari_bound_check(&sc, &g, &sc.xi0, &BihariConfig::default(), 1).unwrap_err();
    assert!(matches!(err, Error::ConditionUnsatisfied(_)));
}

#[test]
fn zero_coefficients_keep_ytilde_decaying() {
    let mut cfg = ScenarioConfig::default();
    cfg.coefficients = CoefficientsConfig {
        drift: DriftConfig::Zero,
        functional: FunctionalConfig::Zero,
        ..cfg.coefficients.clone()
    };
    cfg.experiment.bihari.n_paths = 8;
    let sc = Scenario::build(&cfg).unwrap();
    let report = run_bihari(&sc).unwrap();
    assert_eq!(report.passed, 8);
    for p in &report.paths {
        let y0 = 4.0 * 0.25;
        assert!((p.sup_ytilde_sq - y0).abs() < 1e-12);
    }
}

#[test]
fn default_run_passes_with_a_failing_control() {
    let sc = Scenario::build(&ScenarioConfig::default()).unwrap();
    let report = run_bihari(&sc).unwrap();
    assert_eq!(report.paths.len(), 100);
    assert_eq!(report.passed, 100);
    assert!(report.falsified_failures >= 1);
    for p in &report.paths {
        assert!(p.curve.windows(2).all(|w| w[1].2 >= w[0].2));
    }
}
