use spdelab_core::config::{DriftConfig, ScenarioConfig};
use spdelab_core::model::build_model;
use spdelab_core::sde::ou_transition_law;
use spdelab_core::zvonkin::{
    constant_drift_error, decay_table, p0_apply, picard_solve_u, run_zvonkin, solve_decay, GridField, StateGrid,
    Transition,
};
use spdelab_core::{Error, HolderDiniDrift};

fn scalar() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.model.n1 = 1;
    cfg.model.n2 = 1;
    cfg.model.n3 = 1;
    cfg
}

fn coarse_grid() -> StateGrid {
    StateGrid::new(1, 1, 4.0, 17, 1.0, 10).unwrap()
}

#[test]
fn constants_are_fixed_points() {
    let ops = build_model(&scalar()).unwrap();
    let grid = coarse_grid();
    let g = GridField::sample(&grid, 1, |_| vec![2.5]).unwrap();
    let v = p0_apply(&ops, &grid, 0.0, 0.7, &g, &[0.3, -0.4], 8).unwrap();
    assert!((v[0] - 2.5).abs() < 1e-13);
}

#[test]
fn zero_elapsed_time_returns_the_grid_value() {
    let ops = build_model(&scalar()).unwrap();
    let grid = coarse_grid();
    let g = GridField::sample(&grid, 1, |z| vec![(z[0] * 1.3).sin() + z[1].powi(3)]).unwrap();
    let z = grid.coords(100);
    let v = p0_apply(&ops, &grid, 0.4, 0.4, &g, &z, 8).unwrap();
    assert!((v[0] - g.at(100)[0]).abs() < 1e-13);
}

#[test]
fn norm_square_matches_gaussian_moments() {
    let ops = build_model(&scalar()).unwrap();
    let grid = StateGrid::new(1, 1, 4.0, 33, 1.0, 20).unwrap();
    let g = GridField::sample(&grid, 1, |z| vec![z[0] * z[0] + z[1] * z[1]]).unwrap();
    let z = [0.5, -0.3];
    let law = ou_transition_law(&ops, 0.0, 0.5, &z).unwrap();
    let v = p0_apply(&ops, &grid, 0.0, 0.5, &g, &z, 8).unwrap();
    assert!(
        (v[0] - law.mean_square()).abs() < 1e-6,
        "{} vs {}",
        v[0],
        law.mean_square()
    );
}

#[test]
fn edge_starts_report_escaping_mass() {
    let ops = build_model(&scalar()).unwrap();
    let grid = coarse_grid();
    let g = GridField::sample(&grid, 1, |_| vec![1.0]).unwrap();
    let err = p0_apply(&ops, &grid, 0.0, 0.5, &g, &[0.0, 4.0], 8).unwrap_err();
    assert!(matches!(err, Error::MassEscape { .. }));
    let narrow = StateGrid::new(1, 1, 0.5, 9, 1.0, 10).unwrap();
    assert!(matches!(narrow.check_bulk(&ops), Err(Error::MassEscape { .. })));
}

#[test]
fn constant_drift_has_the_closed_form() {
    let ops = build_model(&scalar()).unwrap();
    let grid = coarse_grid();
    let trans = Transition::new(&ops, &grid, 6).unwrap();
    let b = HolderDiniDrift::from_config(&DriftConfig::Constant { value: vec![0.7] }, 1, 1).unwrap();
    let u = picard_solve_u(&trans, &b, 2.0, 50, 1e-12).unwrap();
    assert!(constant_drift_error(&grid, &u, &[0.7]) < 1e-10);
    assert!(u.grad_norm < 1e-10);
}

#[test]
fn zero_drift_gives_zero_field() {
    let ops = build_model(&scalar()).unwrap();
    let grid = coarse_grid();
    let trans = Transition::new(&ops, &grid, 6).unwrap();
    let b = HolderDiniDrift::from_config(&DriftConfig::Zero, 1, 1).unwrap();
    let fields = solve_decay(&trans, &b, &[1.0, 10.0], 10, 1e-12).unwrap();
    let table = decay_table(&fields, 0.0);
    assert!(table.pass);
    assert!(table
        .rows
        .iter()
        .all(|r| r.sup_norm == 0.0 && r.grad_norm == 0.0 && r.mixed_norm == 0.0));
}

#[test]
fn bounded_drift_decays_like_inverse_rate() {
    let cfg = scalar();
    let ops = build_model(&cfg).unwrap();
    let grid = coarse_grid();
    let trans = Transition::new(&ops, &grid, 6).unwrap();
    let b = HolderDiniDrift::from_config(&cfg.coefficients.drift, 1, 1).unwrap();
    let fields = solve_decay(&trans, &b, &[1.0, 10.0, 100.0], 60, 1e-10).unwrap();
    for f in &fields {
        assert!(
            f.sup_norm <= b.sup_bound / f.lambda * 1.05,
            "{} at {}",
            f.sup_norm,
            f.lambda
        );
        assert!(f.rate < 1.0);
    }
    assert!(decay_table(&fields, 1.0).monotone);
}

#[test]
fn non_increasing_rates_are_rejected() {
    let ops = build_model(&scalar()).unwrap();
    let trans = Transition::new(&ops, &coarse_grid(), 4).unwrap();
    let b = HolderDiniDrift::from_config(&DriftConfig::Zero, 1, 1).unwrap();
    assert!(solve_decay(&trans, &b, &[10.0, 1.0], 5, 1e-9).is_err());
}

#[test]
fn default_run_passes() {
    let out = run_zvonkin(&scalar()).unwrap();
    assert!(out.constant.error < 1e-3);
    assert!(out.pass);
    for w in out.decay.rows.windows(2) {
        assert!(w[1].sup_norm < w[0].sup_norm);
        assert!(w[1].grad_norm < w[0].grad_norm);
        assert!(w[1].mixed_norm < w[0].mixed_norm);
    }
}
