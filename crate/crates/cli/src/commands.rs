//! One pipeline per subcommand. Each writes its CSVs through the sink and
//! returns the JSON result embedded in `report.json`.

use serde_json::{json, Value};
use spdelab_core::config::{DelayFamily, ScenarioConfig};
use spdelab_core::delay::check_measure_domination;
use spdelab_core::drift::check_drift_moduli;
use spdelab_core::experiments::{coupling_check, run_harnack, run_shift, strong_order_study, InequalityOutcome};
use spdelab_core::nonexplosion::run_bihari;
use spdelab_core::rng::{map_paths, path_rng, Purpose};
use spdelab_core::stats::MCEstimate;
use spdelab_core::zvonkin::run_zvonkin;
use spdelab_core::{build_model, integrate_mild, Error, Scenario, SegmentView};

use crate::output::{flag, num, opt, Sink};
use crate::CliError;

pub struct Outcome {
    pub pass: bool,
    pub result: Value,
}

const MODULI_SAMPLES: usize = 2000;

fn est(e: &MCEstimate) -> [String; 2] {
    [num(e.mean), num(e.std_error)]
}

pub fn validate(cfg: &ScenarioConfig, sink: &mut Sink) -> Result<Outcome, CliError> {
    let ops = build_model(cfg)?;
    let report = &ops.report;
    sink.csv(
        "assumptions.csv",
        &["label", "name", "residual", "threshold", "passed", "detail"],
        report.checks.iter().map(|c| {
            vec![
                c.label.to_string(),
                c.name.to_string(),
                num(c.residual),
                num(c.threshold),
                flag(c.passed),
                c.detail.clone(),
            ]
        }),
    )?;
    let sc = Scenario::build(cfg)?;
    let moduli = check_drift_moduli(&sc.drift, &sc.functional, &sc.nu, MODULI_SAMPLES, cfg.simulation.seed);
    sink.csv(
        "moduli.csv",
        &["quantity", "value"],
        [
            ("holder_worst_ratio", num(moduli.holder_worst_ratio)),
            ("lipschitz_worst_ratio", num(moduli.lipschitz_worst_ratio)),
            ("sup_observed", num(moduli.sup_observed)),
            ("sup_bound", num(moduli.sup_bound)),
            ("dini_integral", num(moduli.dini.dini_integral)),
            ("dini_increasing", flag(moduli.dini.increasing)),
            ("phi_sq_concave", flag(moduli.dini.phi_sq_concave)),
            ("worst_concavity_gap", num(moduli.dini.worst_concavity_gap)),
        ]
        .into_iter()
        .map(|(k, v)| vec![k.to_string(), v]),
    )?;
    let shifts: Vec<f64> = if sc.nu.max_lag == 0 {
        Vec::new()
    } else {
        [1, 2, 4, 8]
            .iter()
            .map(|&k| (sc.nu.max_lag * k / 8) as f64 * sc.nu.dt)
            .collect()
    };
    let domination = check_measure_domination(&sc.nu, &shifts);
    sink.csv(
        "domination.csv",
        &["t", "kappa", "worst_ratio", "worst_lag", "pass"],
        domination.rows.iter().map(|r| {
            vec![
                num(r.t),
                num(r.kappa),
                num(r.worst_ratio),
                r.worst_lag.to_string(),
                flag(r.pass),
            ]
        }),
    )?;
    Ok(Outcome {
        pass: report.all_pass && moduli.pass && domination.pass,
        result: json!({ "assumptions": report, "moduli": moduli, "domination": domination }),
    })
}

pub fn simulate(cfg: &ScenarioConfig, sink: &mut Sink) -> Result<Outcome, CliError> {
    let sc = Scenario::build(cfg)?;
    let sim = &cfg.experiment.simulate;
    let seed = cfg.simulation.seed;
    let stride = sim.stride.max(1);
    let trajectories = map_paths(sim.export_paths, seed, Purpose::Reference, |i, _| {
        integrate_mild(
            &sc.ops,
            &sc.drift,
            &sc.functional,
            &sc.xi0,
            &sc.grid,
            &mut path_rng(seed, Purpose::Reference, i as u64),
        )
    })
    .into_iter()
    .collect::<Result<Vec<_>, Error>>()?;
    let (n1, n2) = (sc.ops.n1(), sc.ops.n2());
    let mut header = vec!["path".to_string(), "t".to_string()];
    header.extend((1..=n1).map(|i| format!("x{i}")));
    header.extend((1..=n2).map(|i| format!("y{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut rows = Vec::new();
    for (p, traj) in trajectories.iter().enumerate() {
        for k in (0..=traj.n_steps).step_by(stride) {
            let mut row = vec![p.to_string(), num(sc.grid.time(k))];
            row.extend(traj.state(k).iter().map(|&v| num(v)));
            rows.push(row);
        }
    }
    sink.csv("paths.csv", &header, rows)?;
    let order = strong_order_study(
        &sc.ops,
        sc.xi0.lag(0),
        &sim.order_dts,
        sim.order_paths,
        sim.order_horizon,
        seed,
    )?;
    sink.csv(
        "order.csv",
        &["dt", "rms_error", "n_paths"],
        order
            .rows
            .iter()
            .map(|r| vec![num(r.dt), num(r.rms_error), r.n_paths.to_string()]),
    )?;
    Ok(Outcome {
        pass: order.pass,
        result: json!({ "exported_paths": trajectories.len(), "order": order }),
    })
}

pub fn coupling(cfg: &ScenarioConfig, sink: &mut Sink) -> Result<Outcome, CliError> {
    let sc = Scenario::build(cfg)?;
    let out = coupling_check(&sc, &cfg.experiment.coupling, cfg.simulation.seed)?;
    sink.csv(
        "plans.csv",
        &[
            "index",
            "h_norm",
            "harnack_residual",
            "eta_norm",
            "shift_residual",
            "pass",
        ],
        out.draws.iter().map(|d| {
            vec![
                d.index.to_string(),
                num(d.h_norm),
                num(d.harnack_residual),
                num(d.eta_norm),
                num(d.shift_residual),
                flag(d.pass),
            ]
        }),
    )?;
    sink.csv(
        "normalization.csv",
        &["shift_norm", "mean_r", "std_error", "n_paths", "z_score", "pass"],
        out.normalization.iter().map(|r| {
            let [m, s] = est(&r.mean_r);
            vec![
                num(r.shift_norm),
                m,
                s,
                r.mean_r.n_paths.to_string(),
                num(r.z_score),
                flag(r.pass),
            ]
        }),
    )?;
    Ok(Outcome {
        pass: out.pass,
        result: serde_json::to_value(&out)?,
    })
}

fn inequality_files(out: &InequalityOutcome, sink: &mut Sink) -> Result<(), CliError> {
    sink.csv(
        "ledger.csv",
        &[
            "cell",
            "shift_norm",
            "mean_r",
            "mean_r_se",
            "entropy",
            "entropy_se",
            "entropy_direct",
            "entropy_direct_se",
            "mean_log_r",
            "mean_log_r_se",
            "max_quad_var",
            "normalized",
            "entropy_agree",
            "identity_error",
            "terminal_residual",
            "discretization_gap",
        ],
        out.ledgers.iter().map(|l| {
            let mut row = vec![l.cell.clone(), num(l.shift_norm)];
            for e in [&l.mean_r, &l.entropy, &l.entropy_direct, &l.mean_log_r] {
                row.extend(est(e));
            }
            row.extend([
                num(l.max_quad_var),
                flag(l.normalized),
                flag(l.entropy_agree),
                num(l.identity_error),
                num(l.terminal_residual),
                num(l.discretization_gap),
            ]);
            row
        }),
    )?;
    sink.csv(
        "transfer.csv",
        &[
            "cell",
            "shift_norm",
            "functional",
            "weighted",
            "weighted_se",
            "direct",
            "direct_se",
            "agree",
        ],
        out.transfer.rows.iter().map(|r| {
            let mut row = vec![r.cell.clone(), num(r.shift_norm), r.functional.clone()];
            row.extend(est(&r.weighted));
            row.extend(est(&r.direct));
            row.push(flag(r.agree));
            row
        }),
    )?;
    sink.csv(
        "inequalities.csv",
        &[
            "kind",
            "cell",
            "shift_norm",
            "p",
            "lhs",
            "lhs_se",
            "rhs",
            "rhs_se",
            "slack",
            "combined_se",
            "z",
            "sharp_bound",
            "bound_value",
            "exponent",
            "pass",
        ],
        out.inequalities.iter().map(|r| {
            let mut row = vec![r.kind.name().to_string(), r.cell.clone(), num(r.shift_norm), opt(r.p)];
            row.extend(est(&r.lhs));
            row.extend(est(&r.rhs));
            row.extend([
                num(r.slack),
                num(r.combined_se),
                num(r.z),
                num(r.sharp_bound),
                opt(r.bound_value),
                opt(r.exponent),
                flag(r.pass),
            ]);
            row
        }),
    )?;
    let mut rows: Vec<Vec<String>> = out
        .calibration
        .cells
        .iter()
        .map(|(cell, target, c)| vec![cell.clone(), num(*target), num(*c)])
        .collect();
    rows.push(vec!["calibrated".into(), String::new(), num(out.calibration.c)]);
    sink.csv("calibration.csv", &["cell", "entropy_target", "c"], rows)?;
    Ok(())
}

pub fn harnack(cfg: &ScenarioConfig, sink: &mut Sink) -> Result<Outcome, CliError> {
    let sc = Scenario::build(cfg)?;
    let hc = &cfg.experiment.harnack;
    let out = run_harnack(&sc, hc, hc.n_paths, cfg.simulation.seed)?;
    inequality_files(&out, sink)?;
    Ok(Outcome {
        pass: out.pass,
        result: serde_json::to_value(&out)?,
    })
}

pub fn shift_harnack(cfg: &ScenarioConfig, sink: &mut Sink) -> Result<Outcome, CliError> {
    if cfg.delay.r != 0.0 || cfg.delay.family != DelayFamily::None {
        return Err(Error::Config("shift-harnack needs delay.r = 0 and delay.family = none".into()).into());
    }
    let sc = Scenario::build(cfg)?;
    let shc = &cfg.experiment.shift;
    let out = run_shift(&sc, shc, shc.n_paths, cfg.simulation.seed)?;
    inequality_files(&out, sink)?;
    Ok(Outcome {
        pass: out.pass,
        result: serde_json::to_value(&out)?,
    })
}

pub fn zvonkin(cfg: &ScenarioConfig, sink: &mut Sink) -> Result<Outcome, CliError> {
    let out = run_zvonkin(cfg)?;
    sink.csv(
        "decay.csv",
        &["lambda", "sup_norm", "grad_norm", "mixed_norm", "iterations", "rate"],
        out.decay.rows.iter().map(|r| {
            vec![
                num(r.lambda),
                num(r.sup_norm),
                num(r.grad_norm),
                num(r.mixed_norm),
                r.iterations.to_string(),
                num(r.rate),
            ]
        }),
    )?;
    let grid = &out.grid;
    let mut header = vec!["lambda".to_string()];
    header.extend((1..=grid.n1).map(|i| format!("x{i}")));
    header.extend((1..=grid.n2).map(|i| format!("y{i}")));
    header.extend((1..=grid.n2).map(|i| format!("u{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut rows = Vec::new();
    for field in &out.fields {
        for r in field.rows(grid, 0) {
            let mut row = vec![num(field.lambda)];
            row.extend(r.into_iter().map(num));
            rows.push(row);
        }
    }
    sink.csv("field.csv", &header, rows)?;
    Ok(Outcome {
        pass: out.pass,
        result: serde_json::to_value(&out)?,
    })
}

pub fn bihari(cfg: &ScenarioConfig, sink: &mut Sink) -> Result<Outcome, CliError> {
    let sc = Scenario::build(cfg)?;
    let out = run_bihari(&sc)?;
    sink.csv(
        "paths.csv",
        &[
            "path",
            "alpha",
            "n_const",
            "sup_ytilde_sq",
            "bound_at_horizon",
            "first_violation",
            "pass",
            "falsified_pass",
        ],
        out.paths.iter().map(|p| {
            vec![
                p.path.to_string(),
                num(p.alpha),
                num(p.n_const),
                num(p.sup_ytilde_sq),
                num(p.bound_at_horizon),
                opt(p.first_violation),
                flag(p.pass),
                flag(p.falsified_pass),
            ]
        }),
    )?;
    sink.csv(
        "curves.csv",
        &["path", "t", "sup_ytilde_sq", "bound"],
        out.paths.iter().flat_map(|p| {
            p.curve
                .iter()
                .map(move |&(t, o, b)| vec![p.path.to_string(), num(t), num(o), num(b)])
        }),
    )?;
    Ok(Outcome {
        pass: out.pass,
        result: serde_json::to_value(&out)?,
    })
}
