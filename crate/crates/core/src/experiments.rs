//! End-to-end experiment drivers shared by the CLI and the test suites.

use rand::Rng;
use serde::Serialize;

use crate::config::{CouplingCheckConfig, FunctionalConfig, HarnackConfig, ShiftConfig, TestFunctionalConfig};
use crate::coupling::{
    beta_bound, build_harnack_plan, build_shift_plan, calibrate_constant, girsanov_log_weight, run_coupled,
    sigma_bound, BoundConstants, Calibration, CouplingPlan, PlanTable,
};
use crate::delay::{DelayMeasure, SegmentPath};
use crate::drift::{HolderDiniDrift, SegmentFunctional};
use crate::error::{Error, Result};
use crate::harnack::{
    simulate_cells, slack_monotone, summarize_ledgers, verify_harnack, verify_measure_transfer, CellSamples, CellSpec,
    HarnackKind, InequalityReport, LedgerSummary, TestFunctional, TransferReport,
};
use crate::linalg;
use crate::model::OperatorSet;
use crate::rng::{map_paths, path_rng, Purpose};
use crate::scenario::Scenario;
use crate::sde::{integrate_mild, sample_linear_flow, SimGrid};
use crate::stats::MCEstimate;

/// Terminal residual tolerance of the plan targets.
pub const PLAN_TOL: f64 = 1e-8;
/// Standard errors allowed in the `E R(T) = 1` check.
pub const NORMALIZATION_Z: f64 = 4.0;
/// Accepted range of the strong-order regression slope.
pub const ORDER_RANGE: (f64, f64) = (0.7, 1.3);

fn unit(direction: &Option<Vec<f64>>, d: usize, default: impl FnOnce() -> Vec<f64>) -> Result<Vec<f64>> {
    let v = direction.clone().unwrap_or_else(default);
    if v.len() != d {
        return Err(Error::DimensionMismatch {
            what: "shift direction",
            expected: d,
            got: v.len(),
        });
    }
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if !(n > 0.0) {
        return Err(Error::Config("shift direction must be non-zero".into()));
    }
    Ok(v.iter().map(|a| a / n).collect())
}

/// Plans for `h = m · direction`, constant along the segment.
pub fn harnack_cells(sc: &Scenario, magnitudes: &[f64], direction: &Option<Vec<f64>>) -> Result<Vec<CellSpec>> {
    let d = sc.dim();
    let dir = unit(direction, d, || vec![1.0; d])?;
    let horizon = sc.grid.horizon;
    magnitudes
        .iter()
        .map(|&m| {
            let v: Vec<f64> = dir.iter().map(|a| a * m).collect();
            let h = sc.constant_segment(&v);
            let plan = build_harnack_plan(&sc.ops, horizon, sc.config.delay.r, &h)?;
            Ok(CellSpec {
                label: format!("h={m}"),
                shift_norm: m.abs(),
                plan: CouplingPlan::Harnack(plan),
                direct_start: sc.xi0.add(&h)?,
                reference_offset: None,
            })
        })
        .collect()
}

/// Plans for `η = m · direction`; the default direction is `(e₁, e₁)/√2`.
pub fn shift_cells(sc: &Scenario, scales: &[f64], direction: &Option<Vec<f64>>) -> Result<Vec<CellSpec>> {
    if sc.grid.max_lag != 0 {
        return Err(Error::PlanMismatch("shift experiments need r = 0".into()));
    }
    let (n1, d) = (sc.ops.n1(), sc.dim());
    let dir = unit(direction, d, || {
        let mut v = vec![0.0; d];
        v[0] = 1.0;
        v[n1] = 1.0;
        v
    })?;
    let horizon = sc.grid.horizon;
    scales
        .iter()
        .map(|&m| {
            let eta: Vec<f64> = dir.iter().map(|a| a * m).collect();
            let plan = build_shift_plan(&sc.ops, horizon, &eta)?;
            let offset: Vec<f64> = plan.eta_path(horizon).iter().copied().collect();
            Ok(CellSpec {
                label: format!("eta={m}"),
                shift_norm: m.abs(),
                plan: CouplingPlan::Shift(plan),
                direct_start: sc.xi0.clone(),
                reference_offset: Some(offset),
            })
        })
        .collect()
}

pub fn build_functionals(sc: &Scenario, cfgs: &[TestFunctionalConfig]) -> Result<Vec<TestFunctional>> {
    cfgs.iter()
        .map(|c| TestFunctional::from_config(c, sc, sc.grid.horizon))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityOutcome {
    pub ledgers: Vec<LedgerSummary>,
    pub transfer: TransferReport,
    pub calibration: Calibration,
    pub inequalities: Vec<InequalityReport>,
    /// Slack non-decreasing in the shift size for the log kind and for `p = 2`.
    pub monotone_log: bool,
    pub monotone_power: bool,
    pub pass: bool,
}

impl InequalityOutcome {
    pub fn rows(&self, kind: HarnackKind, p: Option<f64>) -> Vec<&InequalityReport> {
        self.inequalities
            .iter()
            .filter(|r| r.kind == kind && (kind.is_log() || r.p == p))
            .collect()
    }
}

struct InequalitySetup<'a> {
    log_kind: HarnackKind,
    power_kind: HarnackKind,
    p_list: &'a [f64],
    functional: usize,
    bound_constant: Option<f64>,
    z: f64,
    f_min: f64,
}

fn assemble(
    cells: &[CellSamples],
    functionals: &[TestFunctional],
    setup: InequalitySetup<'_>,
    bound: &dyn Fn(usize, f64) -> Result<f64>,
) -> Result<InequalityOutcome> {
    let ledgers = summarize_ledgers(cells, setup.z);
    let transfer = verify_measure_transfer(cells, functionals, setup.z);
    let calibration = match setup.bound_constant {
        Some(c) => Calibration { cells: Vec::new(), c },
        None => {
            let mut rows = Vec::new();
            for (j, (c, l)) in cells.iter().zip(&ledgers).enumerate() {
                if c.shift_norm == 0.0 {
                    continue;
                }
                let target = l.entropy.mean;
                let cj = calibrate_constant(target, |k| bound(j, k).unwrap_or(f64::INFINITY))?;
                rows.push((c.label.clone(), target, cj));
            }
            Calibration::from_cells(rows)
        }
    };
    let k = setup.functional;
    let f = functionals
        .get(k)
        .ok_or_else(|| Error::Config(format!("inequality functional {k} out of range")))?;
    let mut inequalities = Vec::new();
    for (j, cell) in cells.iter().enumerate() {
        let bv = bound(j, calibration.c)?;
        inequalities.push(verify_harnack(
            setup.log_kind,
            None,
            cell,
            k,
            f,
            setup.f_min,
            Some(bv),
            setup.z,
        )?);
        for &p in setup.p_list {
            inequalities.push(verify_harnack(
                setup.power_kind,
                Some(p),
                cell,
                k,
                f,
                setup.f_min,
                Some(bv),
                setup.z,
            )?);
        }
    }
    let log_rows: Vec<&InequalityReport> = inequalities.iter().filter(|r| r.kind == setup.log_kind).collect();
    let p2_rows: Vec<&InequalityReport> = inequalities
        .iter()
        .filter(|r| r.kind == setup.power_kind && r.p == Some(2.0))
        .collect();
    let monotone_log = slack_monotone(&log_rows);
    let monotone_power = p2_rows.is_empty() || slack_monotone(&p2_rows);
    let pass = transfer.pass
        && ledgers.iter().all(|l| l.normalized)
        && inequalities.iter().all(|r| r.pass)
        && monotone_log
        && monotone_power;
    Ok(InequalityOutcome {
        ledgers,
        transfer,
        calibration,
        inequalities,
        monotone_log,
        monotone_power,
        pass,
    })
}

/// Log and power Harnack rows over the `h` grid, with law transfer and
/// normalization on the same paths.
pub fn run_harnack(sc: &Scenario, cfg: &HarnackConfig, n_paths: usize, seed: u64) -> Result<InequalityOutcome> {
    let specs = harnack_cells(sc, &cfg.h_magnitudes, &cfg.direction)?;
    let functionals = build_functionals(sc, &cfg.functionals)?;
    let cells = simulate_cells(sc, &specs, &functionals, n_paths, seed)?;
    let consts = BoundConstants::from_coefficients(1.0, &sc.drift, &sc.functional);
    let horizon = sc.grid.horizon;
    let r = sc.config.delay.r;
    let bound = |j: usize, c: f64| -> Result<f64> {
        let CouplingPlan::Harnack(p) = &specs[j].plan else {
            unreachable!()
        };
        sigma_bound(&sc.ops, horizon, &p.h, r, &sc.nu, &consts.with_c(c))
    };
    assemble(
        &cells,
        &functionals,
        InequalitySetup {
            log_kind: HarnackKind::Log,
            power_kind: HarnackKind::Power,
            p_list: &cfg.p_list,
            functional: cfg.inequality_functional,
            bound_constant: cfg.bound_constant,
            z: cfg.z,
            f_min: cfg.f_min,
        },
        &bound,
    )
}

/// Shift-Harnack rows over the `η` grid.
pub fn run_shift(sc: &Scenario, cfg: &ShiftConfig, n_paths: usize, seed: u64) -> Result<InequalityOutcome> {
    let specs = shift_cells(sc, &cfg.eta_scales, &cfg.direction)?;
    let functionals = build_functionals(sc, &cfg.functionals)?;
    let cells = simulate_cells(sc, &specs, &functionals, n_paths, seed)?;
    let consts = BoundConstants::from_coefficients(1.0, &sc.drift, &sc.functional);
    let horizon = sc.grid.horizon;
    let bound = |j: usize, c: f64| -> Result<f64> {
        let CouplingPlan::Shift(p) = &specs[j].plan else {
            unreachable!()
        };
        Ok(beta_bound(&sc.ops, horizon, &p.eta, &consts.with_c(c)))
    };
    assemble(
        &cells,
        &functionals,
        InequalitySetup {
            log_kind: HarnackKind::ShiftLog,
            power_kind: HarnackKind::ShiftPower,
            p_list: &cfg.p_list,
            functional: cfg.inequality_functional,
            bound_constant: cfg.bound_constant,
            z: cfg.z,
            f_min: cfg.f_min,
        },
        &bound,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanDraw {
    pub index: usize,
    pub h_norm: f64,
    /// `max(|Γ(T − r)|, |Γ(T)|)`.
    pub harnack_residual: f64,
    pub eta_norm: f64,
    /// `|Γ̃(T) − η(T)|`.
    pub shift_residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormalizationRow {
    pub shift_norm: f64,
    pub mean_r: MCEstimate,
    pub z_score: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CouplingCheck {
    pub draws: Vec<PlanDraw>,
    pub normalization: Vec<NormalizationRow>,
    pub pass: bool,
}

/// Plan targets on random `(h, η)` draws and `E R(T) = 1` on the
/// configured `|h|` grid.
pub fn coupling_check(sc: &Scenario, cfg: &CouplingCheckConfig, seed: u64) -> Result<CouplingCheck> {
    let d = sc.dim();
    let horizon = sc.grid.horizon;
    let r = sc.config.delay.r;
    let mut rng = path_rng(seed, Purpose::Checks, 2);
    let mut draws = Vec::with_capacity(cfg.draws);
    for index in 0..cfg.draws {
        let h: Vec<f64> = (0..d).map(|_| cfg.h_scale * rng.random_range(-1.0..1.0)).collect();
        let eta: Vec<f64> = (0..d).map(|_| cfg.eta_scale * rng.random_range(-1.0..1.0)).collect();
        let hp = build_harnack_plan(&sc.ops, horizon, r, &sc.constant_segment(&h))?;
        let sp = build_shift_plan(&sc.ops, horizon, &eta)?;
        let (hr, sr) = (hp.terminal_residual(), sp.terminal_residual());
        draws.push(PlanDraw {
            index,
            h_norm: linalg::norm_sq(&h).sqrt(),
            harnack_residual: hr,
            eta_norm: linalg::norm_sq(&eta).sqrt(),
            shift_residual: sr,
            pass: hr < PLAN_TOL && sr < PLAN_TOL,
        });
    }
    let specs = harnack_cells(sc, &cfg.h_magnitudes, &None)?;
    let tables = specs
        .iter()
        .map(|c| PlanTable::new(&c.plan, &sc.engine, sc.grid.max_lag))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&PlanTable> = tables.iter().collect();
    let n_paths = if refs.is_empty() { 0 } else { cfg.n_paths };
    let weights = map_paths(n_paths, seed, Purpose::Reference, |_, rng| {
        run_coupled(
            &sc.engine,
            &sc.drift,
            &sc.functional,
            &sc.xi0,
            &refs,
            rng,
            |_, _, _| {},
            |run| {
                run.ledgers
                    .iter()
                    .map(|l| girsanov_log_weight(l).exp())
                    .collect::<Vec<f64>>()
            },
        )
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let normalization = specs
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let est = MCEstimate::from_samples(&weights.iter().map(|w| w[j]).collect::<Vec<_>>());
            let z_score = if est.std_error > 0.0 {
                (est.mean - 1.0) / est.std_error
            } else if (est.mean - 1.0).abs() < 1e-12 {
                0.0
            } else {
                f64::INFINITY
            };
            NormalizationRow {
                shift_norm: c.shift_norm,
                pass: z_score.abs() <= NORMALIZATION_Z,
                mean_r: est,
                z_score,
            }
        })
        .collect::<Vec<_>>();
    Ok(CouplingCheck {
        pass: draws.iter().all(|d| d.pass) && normalization.iter().all(|n| n.pass),
        draws,
        normalization,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderRow {
    pub dt: f64,
    /// `(E|Z_mild(T) − Z_exact(T)|²)^{1/2}`.
    pub rms_error: f64,
    pub n_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderStudy {
    pub rows: Vec<OrderRow>,
    /// Least-squares slope of `log rms` against `log dt`.
    pub slope: f64,
    pub pass: bool,
}

/// Strong error of the mild scheme against the exact linear flow with
/// shared noise and `b = F = 0`.
pub fn strong_order_study(
    ops: &OperatorSet,
    z0: &[f64],
    dts: &[f64],
    n_paths: usize,
    horizon: f64,
    seed: u64,
) -> Result<OrderStudy> {
    if dts.len() < 2 {
        return Err(Error::Config("the order study needs at least two step sizes".into()));
    }
    let (n1, n2) = (ops.n1(), ops.n2());
    let b = HolderDiniDrift::from_config(&crate::config::DriftConfig::Zero, n1, n2)?;
    let mut rows = Vec::with_capacity(dts.len());
    for &dt in dts {
        let nu = DelayMeasure::degenerate(dt);
        let f = SegmentFunctional::from_config(&FunctionalConfig::Zero, n1, n2, &nu)?;
        let grid = SimGrid::new(dt, horizon, 0.0, seed, n_paths)?;
        let xi0 = SegmentPath::constant(dt, 0, z0);
        let errs = map_paths(n_paths, seed, Purpose::Checks, |i, _| -> Result<f64> {
            let mild = integrate_mild(
                ops,
                &b,
                &f,
                &xi0,
                &grid,
                &mut path_rng(seed, Purpose::Reference, i as u64),
            )?;
            let exact = sample_linear_flow(ops, z0, &grid, &mut path_rng(seed, Purpose::Reference, i as u64))?;
            let diff: Vec<f64> = mild
                .terminal()
                .iter()
                .zip(exact.terminal())
                .map(|(a, b)| a - b)
                .collect();
            Ok(linalg::norm_sq(&diff))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        rows.push(OrderRow {
            dt,
            rms_error: crate::stats::mean(&errs).sqrt(),
            n_paths,
        });
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.dt.ln(), r.rms_error.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope =
        pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    Ok(OrderStudy {
        pass: (ORDER_RANGE.0..=ORDER_RANGE.1).contains(&slope),
        rows,
        slope,
    })
}
