use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spdelab_core::config::{DelayFamily, DiniConfig, DriftConfig, EigenLaw, FunctionalConfig, ScenarioConfig};
use spdelab_core::coupling::{
    beta_bound, build_harnack_plan, build_shift_plan, calibrate_constant, girsanov_log_weight, sigma_bound,
    sigma_terms, simulate_coupled, BoundConstants, CouplingPlan, PlanTable,
};
use spdelab_core::delay::SegmentPath;
use spdelab_core::drift::DiniModulus;
use spdelab_core::linalg::norm_sq;
use spdelab_core::rng::{map_paths, path_rng, Purpose};
use spdelab_core::stats::MCEstimate;
use spdelab_core::Scenario;

fn coarse(dt: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.simulation.dt = dt;
    cfg
}

fn linear(mut cfg: ScenarioConfig) -> ScenarioConfig {
    cfg.coefficients.drift = DriftConfig::Zero;
    cfg.coefficients.functional = FunctionalConfig::Zero;
    cfg
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn harnack_gain_matches_closed_form() {
    let sc = Scenario::build(&coarse(1e-2)).unwrap();
    let h = sc.constant_segment(&[0.3, -0.1, 0.2, 0.4, 0.0, 0.0, 0.0, 0.0]);
    let plan = build_harnack_plan(&sc.ops, 2.0, 0.5, &h).unwrap();
    let s3 = 1.5f64.powi(3);
    for i in 0..4 {
        assert!((plan.e[i] + 6.0 * h.values[i] / s3).abs() < 1e-10);
    }
    assert!(plan.e_residual < 1e-10);
}

#[test]
fn zero_shift_is_the_identity_coupling() {
    let sc = Scenario::build(&coarse(1e-2)).unwrap();
    let h = sc.constant_segment(&[0.0; 8]);
    let plan = CouplingPlan::from(build_harnack_plan(&sc.ops, 2.0, 0.5, &h).unwrap());
    let table = PlanTable::new(&plan, &sc.engine, sc.grid.max_lag).unwrap();
    assert!(table.is_trivial());
    let (reference, coupled, ledger) = simulate_coupled(
        &sc.ops,
        &sc.drift,
        &sc.functional,
        &sc.xi0,
        &plan,
        &sc.grid,
        &mut path_rng(1, Purpose::Reference, 0),
    )
    .unwrap();
    assert_eq!(reference.states, coupled.states);
    assert_eq!(girsanov_log_weight(&ledger), 0.0);
}

#[test]
fn plans_hit_their_targets() {
    let sc = Scenario::build(&coarse(1e-2)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let v = random_vec(&mut rng, 8, 1.0);
        let h = sc.constant_segment(&v);
        let plan = build_harnack_plan(&sc.ops, 2.0, 0.5, &h).unwrap();
        assert!(
            plan.terminal_residual() <= 1e-8 * (1.0 + norm_sq(&v).sqrt()),
            "{}",
            plan.terminal_residual()
        );
        let eta = random_vec(&mut rng, 8, 1.0);
        let shift = build_shift_plan(&sc.ops, 2.0, &eta).unwrap();
        assert!(
            shift.terminal_residual() <= 1e-8 * (1.0 + norm_sq(&eta).sqrt()),
            "{}",
            shift.terminal_residual()
        );
    }
}

#[test]
fn shift_gain_for_uniform_damping() {
    let mut cfg = coarse(1e-2);
    cfg.model.eigenvalues = EigenLaw::Explicit { values: vec![1.0; 4] };
    let sc = Scenario::build(&cfg).unwrap();
    let eta = [0.5, -0.3, 0.1, 0.8, 0.0, 0.0, 0.0, 0.0];
    let plan = build_shift_plan(&sc.ops, 2.0, &eta).unwrap();
    let integral = 2f64.exp() - 1.0;
    for i in 0..4 {
        let expected = 6.0 / 8.0 * integral * eta[i];
        assert!((plan.e_tilde[i] - expected).abs() < 1e-10 * (1.0 + expected.abs()));
    }
}

#[test]
fn coupled_path_realizes_the_grid_shift() {
    let sc = Scenario::build(&coarse(1e-2)).unwrap();
    let h = SegmentPath::from_fn(sc.grid.dt, sc.grid.max_lag, 8, |t| vec![0.3 + 0.2 * t; 8]).unwrap();
    let plan = CouplingPlan::from(build_harnack_plan(&sc.ops, 2.0, 0.5, &h).unwrap());
    let table = PlanTable::new(&plan, &sc.engine, sc.grid.max_lag).unwrap();
    let (reference, coupled, ledger) = simulate_coupled(
        &sc.ops,
        &sc.drift,
        &sc.functional,
        &sc.xi0,
        &plan,
        &sc.grid,
        &mut path_rng(4, Purpose::Reference, 0),
    )
    .unwrap();
    for k in 0..=sc.grid.n_steps {
        for i in 0..8 {
            let gap = coupled.state(k)[i] - reference.state(k)[i] - table.gamma_discrete_row(k)[i];
            assert!(gap.abs() < 1e-10, "step {k}, coordinate {i}: {gap:e}");
        }
    }
    assert!(table.discretization_gap() < 0.05, "{}", table.discretization_gap());
    assert!(ledger.quad_var > 0.0);
}

#[test]
fn linear_log_weight_is_gaussian() {
    let sc = Scenario::build(&linear(coarse(1e-2))).unwrap();
    let h = sc.constant_segment(&[0.4; 8]);
    let plan = CouplingPlan::from(build_harnack_plan(&sc.ops, 2.0, 0.5, &h).unwrap());
    let table = PlanTable::new(&plan, &sc.engine, sc.grid.max_lag).unwrap();
    let logs = map_paths(10_000, 5, Purpose::Reference, |_, rng| {
        spdelab_core::coupling::run_coupled(
            &sc.engine,
            &sc.drift,
            &sc.functional,
            &sc.xi0,
            &[&table],
            rng,
            |_, _, _| {},
            |run| (girsanov_log_weight(&run.ledgers[0]), run.ledgers[0].quad_var),
        )
        .unwrap()
    });
    let qv = logs[0].1;
    assert!(logs.iter().all(|l| (l.1 - qv).abs() < 1e-12 * qv));
    let est = MCEstimate::from_samples(&logs.iter().map(|l| l.0).collect::<Vec<_>>());
    assert!((est.mean + 0.5 * qv).abs() < 4.0 * est.std_error);
    let var = spdelab_core::stats::variance(&logs.iter().map(|l| l.0).collect::<Vec<_>>());
    let se_var = qv * (2.0 / logs.len() as f64).sqrt();
    assert!((var - qv).abs() < 4.0 * se_var, "variance {var} vs {qv}");
}

fn constants(c: f64) -> BoundConstants {
    BoundConstants {
        c,
        k_holder: 0.2,
        alpha: 0.8,
        modulus: DiniModulus::from_config(&DiniConfig::default(), 0.2).unwrap(),
        lipschitz: 0.35,
    }
}

#[test]
fn bounds_vanish_at_zero_shift() {
    let sc = Scenario::build(&coarse(1e-2)).unwrap();
    let h = sc.constant_segment(&[0.0; 8]);
    assert_eq!(
        sigma_bound(&sc.ops, 2.0, &h, 0.5, &sc.nu, &constants(1.0)).unwrap(),
        0.0
    );
    assert_eq!(beta_bound(&sc.ops, 2.0, &[0.0; 8], &constants(1.0)), 0.0);
}

#[test]
fn sigma_scales_term_by_term() {
    let sc = Scenario::build(&coarse(1e-2)).unwrap();
    let v = [0.1, 0.2, -0.3, 0.1, 0.4, 0.0, -0.2, 0.1];
    let h = sc.constant_segment(&v);
    let h2 = sc.constant_segment(&v.map(|a| 2.0 * a));
    let k = constants(1.3);
    let a = sigma_terms(&sc.ops, 2.0, &h, 0.5, &sc.nu, &k).unwrap();
    let b = sigma_terms(&sc.ops, 2.0, &h2, 0.5, &sc.nu, &k).unwrap();
    assert!((b.forcing - 4.0 * a.forcing).abs() < 1e-12 * b.forcing);
    assert!((b.lipschitz - 4.0 * a.lipschitz).abs() < 1e-12 * b.lipschitz);
    assert!((b.holder - 2f64.powf(1.6) * a.holder).abs() < 1e-12 * b.holder);
}

#[test]
fn calibration_finds_the_smallest_constant() {
    let c = calibrate_constant(3.0, |c| c * c).unwrap();
    assert!((c - 3f64.sqrt()).abs() < 1e-9);
    assert_eq!(calibrate_constant(0.0, |c| c).unwrap(), 0.0);
}

#[test]
fn shift_plans_need_an_undelayed_grid() {
    let sc = Scenario::build(&coarse(1e-2)).unwrap();
    let plan = CouplingPlan::from(build_shift_plan(&sc.ops, 2.0, &[0.1; 8]).unwrap());
    assert!(PlanTable::new(&plan, &sc.engine, sc.grid.max_lag).is_err());
    let mut cfg = coarse(1e-2);
    cfg.delay.r = 0.0;
    cfg.delay.family = DelayFamily::None;
    let sc = Scenario::build(&cfg).unwrap();
    assert!(PlanTable::new(&plan, &sc.engine, 0).is_ok());
}
