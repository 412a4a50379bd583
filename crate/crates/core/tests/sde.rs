use spdelab_core::config::{DelayConfig, DelayFamily, DriftConfig, EigenLaw, FunctionalConfig, ScenarioConfig};
use spdelab_core::delay::{DelayMeasure, SegmentPath, SegmentView};
use spdelab_core::drift::{HolderDiniDrift, SegmentFunctional};
use spdelab_core::linalg::{self, Mat};
use spdelab_core::model::build_model;
use spdelab_core::rng::{map_paths, path_rng, Purpose};
use spdelab_core::sde::{
    extract_segment, integrate_mild, ou_transition_law, sample_linear_flow, van_loan_covariance, SimGrid,
};
use spdelab_core::stats::MCEstimate;

fn scalar_config() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.model.n1 = 1;
    cfg.model.n2 = 1;
    cfg.model.n3 = 1;
    cfg.model.eigenvalues = EigenLaw::Explicit { values: vec![1.0] };
    cfg
}

fn no_delay(dt: f64) -> (DelayMeasure, SegmentFunctional) {
    let nu = DelayMeasure::from_config(
        &DelayConfig {
            r: 0.0,
            family: DelayFamily::None,
            cells: 1,
        },
        dt,
    )
    .unwrap();
    let f = SegmentFunctional::from_config(&FunctionalConfig::Zero, 4, 4, &nu).unwrap();
    (nu, f)
}

#[test]
fn quadrature_covariance_matches_van_loan() {
    let ops = build_model(&ScenarioConfig::default()).unwrap();
    for tau in [1e-3, 0.5, 2.0] {
        let law = ou_transition_law(&ops, 0.0, tau, &[0.0; 8]).unwrap();
        let vl = van_loan_covariance(&ops, tau);
        let err = (law.cov_matrix() - &vl).norm() / vl.norm();
        assert!(err < 1e-10, "tau {tau}: relative error {err:e}");
    }
}

#[test]
fn scalar_ou_variance_closed_form() {
    let ops = build_model(&scalar_config()).unwrap();
    let law = ou_transition_law(&ops, 0.3, 1.0, &[0.5, -1.0]).unwrap();
    let var_y = law.cov[3];
    let expected = (1.0 - (-1.4f64).exp()) / 2.0;
    assert!((var_y - expected).abs() < 1e-12 * expected);
    assert!((law.mean[1] + (-0.7f64).exp()).abs() < 1e-14);
}

#[test]
fn zero_elapsed_time_is_a_point_mass() {
    let ops = build_model(&ScenarioConfig::default()).unwrap();
    let z: Vec<f64> = (0..8).map(|i| i as f64).collect();
    let law = ou_transition_law(&ops, 1.0, 1.0, &z).unwrap();
    assert_eq!(law.mean, z);
    assert!(law.cov.iter().all(|v| *v == 0.0));
}

#[test]
fn exact_sampler_matches_law() {
    let mut cfg = scalar_config();
    cfg.model.n1 = 2;
    cfg.model.n2 = 2;
    cfg.model.n3 = 2;
    cfg.model.eigenvalues = EigenLaw::Power {
        scale: 1.0,
        exponent: 2.0,
    };
    let ops = build_model(&cfg).unwrap();
    let grid = SimGrid::new(0.02, 0.4, 0.0, 7, 100_000).unwrap();
    let z0 = [1.0, -0.5, 0.3, 0.8];
    let law = ou_transition_law(&ops, 0.0, 0.4, &z0).unwrap();
    let engine = spdelab_core::sde::Engine::new(&ops, grid.dt).unwrap();
    let finals = map_paths(grid.n_paths, grid.seed, Purpose::Checks, |_, rng| {
        engine.run_exact(&z0, grid.n_steps, rng, |_, _| {}).unwrap()
    });
    let d = 4;
    for i in 0..d {
        let xs: Vec<f64> = finals.iter().map(|z| z[i]).collect();
        let est = MCEstimate::from_samples(&xs);
        assert!((est.mean - law.mean[i]).abs() < 4.0 * est.std_error, "mean {i}");
    }
    let mut cov = Mat::zeros(d, d);
    for z in &finals {
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] += (z[i] - law.mean[i]) * (z[j] - law.mean[j]);
            }
        }
    }
    cov /= finals.len() as f64;
    let exact = law.cov_matrix();
    assert!((cov - &exact).norm() < 0.05 * exact.norm());
}

#[test]
fn mild_scheme_shares_y_with_exact_flow() {
    let cfg = ScenarioConfig::default();
    let ops = build_model(&cfg).unwrap();
    let (_, f) = no_delay(1e-2);
    let b = HolderDiniDrift::from_config(&DriftConfig::Zero, 4, 4).unwrap();
    let grid = SimGrid::new(1e-2, 1.0, 0.0, 3, 1).unwrap();
    let z0 = [0.1; 8];
    let xi0 = SegmentPath::constant(grid.dt, 0, &z0);
    let mild = integrate_mild(&ops, &b, &f, &xi0, &grid, &mut path_rng(3, Purpose::Reference, 0)).unwrap();
    let exact = sample_linear_flow(&ops, &z0, &grid, &mut path_rng(3, Purpose::Reference, 0)).unwrap();
    for k in 0..=grid.n_steps {
        for i in 4..8 {
            assert!((mild.state(k)[i] - exact.state(k)[i]).abs() < 1e-12);
        }
    }
    let inc = mild.increments.as_ref().unwrap();
    assert_eq!(inc.len(), grid.n_steps * 4);
}

#[test]
fn constant_drift_adds_its_integral() {
    let ops = build_model(&ScenarioConfig::default()).unwrap();
    let (_, f) = no_delay(1e-4);
    let beta = vec![0.3, -0.2, 0.5, 1.0];
    let b = HolderDiniDrift::from_config(&DriftConfig::Constant { value: beta.clone() }, 4, 4).unwrap();
    let grid = SimGrid::new(1e-4, 1.0, 0.0, 5, 1).unwrap();
    let z0 = [0.0; 8];
    let xi0 = SegmentPath::constant(grid.dt, 0, &z0);
    let mild = integrate_mild(&ops, &b, &f, &xi0, &grid, &mut path_rng(5, Purpose::Reference, 0)).unwrap();
    let exact = sample_linear_flow(&ops, &z0, &grid, &mut path_rng(5, Purpose::Reference, 0)).unwrap();
    for (i, bi) in beta.iter().enumerate() {
        let lam = ((i + 1) * (i + 1)) as f64;
        let expected = bi * (1.0 - (-lam).exp()) / lam;
        let got = mild.terminal()[4 + i] - exact.terminal()[4 + i];
        assert!((got - expected).abs() < 1e-6, "mode {i}: {got} vs {expected}");
    }
}

#[test]
fn strong_error_is_first_order() {
    let ops = build_model(&ScenarioConfig::default()).unwrap();
    let b = HolderDiniDrift::from_config(&DriftConfig::Zero, 4, 4).unwrap();
    let z0 = [0.5; 8];
    let mut points = Vec::new();
    for dt in [1e-1, 1e-2, 1e-3, 1e-4] {
        let (_, f) = no_delay(dt);
        let grid = SimGrid::new(dt, 1.0, 0.0, 11, 32).unwrap();
        let xi0 = SegmentPath::constant(dt, 0, &z0);
        let errs = map_paths(grid.n_paths, grid.seed, Purpose::Checks, |i, _| {
            let mild = integrate_mild(
                &ops,
                &b,
                &f,
                &xi0,
                &grid,
                &mut path_rng(11, Purpose::Reference, i as u64),
            )
            .unwrap();
            let exact = sample_linear_flow(&ops, &z0, &grid, &mut path_rng(11, Purpose::Reference, i as u64)).unwrap();
            linalg::norm_sq(
                &mild
                    .terminal()
                    .iter()
                    .zip(exact.terminal())
                    .map(|(a, b)| a - b)
                    .collect::<Vec<_>>(),
            )
        });
        let rms = (errs.iter().sum::<f64>() / errs.len() as f64).sqrt();
        points.push((dt.ln(), rms.ln()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((0.7..=1.3).contains(&slope), "slope {slope}");
}

#[test]
fn segments_read_initial_history() {
    let cfg = ScenarioConfig::default();
    let ops = build_model(&cfg).unwrap();
    let nu = DelayMeasure::from_config(&cfg.delay, 1e-3).unwrap();
    let (b, f) = spdelab_core::drift::coefficients_from_config(&cfg.coefficients, 4, 4, &nu).unwrap();
    let grid = SimGrid::new(1e-3, 1.0, 0.5, 1, 1).unwrap();
    let xi0 = SegmentPath::from_fn(grid.dt, grid.max_lag, 8, |t| vec![t; 8]).unwrap();
    let traj = integrate_mild(&ops, &b, &f, &xi0, &grid, &mut path_rng(1, Purpose::Reference, 0)).unwrap();
    assert_eq!(extract_segment(&traj, 0.0).unwrap(), xi0);
    let seg = extract_segment(&traj, 0.5).unwrap();
    for l in 0..=grid.max_lag {
        assert_eq!(seg.lag(l), traj.state(500 - l));
    }
    let mid = extract_segment(&traj, 0.2).unwrap();
    assert_eq!(mid.lag(300), xi0.lag(100));
}

#[test]
fn rotating_q_leaves_the_law_unchanged() {
    let ops = build_model(&ScenarioConfig::default()).unwrap();
    let (c, s) = (0.6f64, 0.8f64);
    let mut u = Mat::identity(4, 4);
    u[(0, 0)] = c;
    u[(0, 1)] = -s;
    u[(1, 0)] = s;
    u[(1, 1)] = c;
    let rotated = ops.with_noise(&ops.q * u).unwrap();
    let a = ou_transition_law(&ops, 0.0, 1.0, &[0.2; 8]).unwrap();
    let b = ou_transition_law(&rotated, 0.0, 1.0, &[0.2; 8]).unwrap();
    assert!((a.cov_matrix() - b.cov_matrix()).norm() < 1e-12);
}

#[test]
fn paths_are_reproducible_across_thread_counts() {
    let cfg = ScenarioConfig::default();
    let sc = spdelab_core::Scenario::build(&cfg).unwrap();
    let run = || {
        map_paths(8, 99, Purpose::Reference, |_, rng| {
            sc.engine
                .run_mild(&sc.drift, &sc.functional, &sc.xi0, 200, rng, |_, _, _| {})
                .unwrap()
                .current()
                .to_vec()
        })
    };
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(run);
    let four = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(run);
    assert_eq!(one, four);
}
