//! Monte Carlo estimates of both sides of the log, power and shift Harnack
//! inequalities, and of the law transfer behind them.
//!
//! One pass over stream A simulates the reference path from `ξ` together
//! with one coupled path per plan (common noise). Stream B simulates the
//! plain dynamics from each plan's target start on a disjoint stream, with
//! common numbers across plans.

use serde::Serialize;

use crate::config::TestFunctionalConfig;
use crate::coupling::{run_coupled, CouplingPlan, PlanTable};
use crate::delay::{segment_norm_sq_unchecked, DelayMeasure, SegmentPath, SegmentView};
use crate::error::{Error, Result};
use crate::linalg::{self, Vector};
use crate::rng::{map_paths, Purpose};
use crate::scenario::Scenario;
use crate::stats::{self, agree_within, MCEstimate};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestFunctionalKind {
    Constant {
        value: f64,
    },
    GaussianBump {
        centre: Vec<f64>,
        width: f64,
        floor: f64,
    },
    ClippedNormSq {
        cap: f64,
        floor: f64,
    },
    ClippedCoord {
        index: usize,
        lo: f64,
        hi: f64,
        offset: f64,
    },
    SegmentBump {
        centre: Vec<f64>,
        width: f64,
        floor: f64,
    },
}

/// A bounded positive test function on segments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestFunctional {
    pub kind: TestFunctionalKind,
    #[serde(skip)]
    nu: DelayMeasure,
}

impl TestFunctional {
    /// Resolves default centres to the noiseless linear flow from `ξ(0)` at `horizon`.
    pub fn from_config(cfg: &TestFunctionalConfig, sc: &Scenario, horizon: f64) -> Result<Self> {
        let d = sc.dim();
        let centre = |c: &Option<Vec<f64>>| -> Result<Vec<f64>> {
            match c {
                Some(v) if v.len() == d => Ok(v.clone()),
                Some(v) => Err(Error::DimensionMismatch {
                    what: "functional centre",
                    expected: d,
                    got: v.len(),
                }),
                None => {
                    let m = linalg::expm(&sc.ops.augmented_drift(), horizon) * Vector::from_column_slice(sc.xi0.lag(0));
                    Ok(m.iter().copied().collect())
                }
            }
        };
        let positive = |w: f64| {
            if w > 0.0 {
                Ok(w)
            } else {
                Err(Error::Config(format!("functional width {w} must be positive")))
            }
        };
        let kind = match cfg {
            TestFunctionalConfig::Constant { value } => TestFunctionalKind::Constant { value: *value },
            TestFunctionalConfig::GaussianBump {
                centre: c,
                width,
                floor,
            } => TestFunctionalKind::GaussianBump {
                centre: centre(c)?,
                width: positive(*width)?,
                floor: *floor,
            },
            TestFunctionalConfig::ClippedNormSq { cap, floor } => TestFunctionalKind::ClippedNormSq {
                cap: *cap,
                floor: *floor,
            },
            TestFunctionalConfig::ClippedCoord { index, lo, hi, offset } => {
                if *index >= d {
                    return Err(Error::DimensionMismatch {
                        what: "clipped coordinate",
                        expected: d,
                        got: *index,
                    });
                }
                if !(lo <= hi) {
                    return Err(Error::Config(format!("clip range [{lo}, {hi}] is empty")));
                }
                TestFunctionalKind::ClippedCoord {
                    index: *index,
                    lo: *lo,
                    hi: *hi,
                    offset: *offset,
                }
            }
            TestFunctionalConfig::SegmentBump {
                centre: c,
                width,
                floor,
            } => TestFunctionalKind::SegmentBump {
                centre: centre(c)?,
                width: positive(*width)?,
                floor: *floor,
            },
        };
        Ok(TestFunctional {
            kind,
            nu: sc.nu.clone(),
        })
    }

    pub fn label(&self) -> String {
        match &self.kind {
            TestFunctionalKind::Constant { value } => format!("constant({value})"),
            TestFunctionalKind::GaussianBump { width, .. } => format!("bump(w={width})"),
            TestFunctionalKind::ClippedNormSq { cap, .. } => format!("clipped-norm-sq(cap={cap})"),
            TestFunctionalKind::ClippedCoord { index, .. } => format!("clipped-coord({index})"),
            TestFunctionalKind::SegmentBump { width, .. } => format!("segment-bump(w={width})"),
        }
    }

    pub fn infimum(&self) -> f64 {
        match &self.kind {
            TestFunctionalKind::Constant { value } => *value,
            TestFunctionalKind::GaussianBump { floor, .. }
            | TestFunctionalKind::ClippedNormSq { floor, .. }
            | TestFunctionalKind::SegmentBump { floor, .. } => *floor,
            TestFunctionalKind::ClippedCoord { lo, offset, .. } => offset + lo,
        }
    }

    pub fn supremum(&self) -> f64 {
        match &self.kind {
            TestFunctionalKind::Constant { value } => *value,
            TestFunctionalKind::GaussianBump { floor, .. } | TestFunctionalKind::SegmentBump { floor, .. } => {
                floor + 1.0
            }
            TestFunctionalKind::ClippedNormSq { cap, floor } => floor + cap,
            TestFunctionalKind::ClippedCoord { hi, offset, .. } => offset + hi,
        }
    }

    /// `f(seg + offset)`, with `offset` added at every lag.
    pub fn eval(&self, seg: &impl SegmentView, offset: Option<&[f64]>) -> f64 {
        let shifted = |l: usize, i: usize| seg.lag(l)[i] + offset.map_or(0.0, |o| o[i]);
        let d = seg.dim();
        match &self.kind {
            TestFunctionalKind::Constant { value } => *value,
            TestFunctionalKind::GaussianBump { centre, width, floor } => {
                let q: f64 = (0..d).map(|i| (shifted(0, i) - centre[i]).powi(2)).sum();
                floor + (-q / width).exp()
            }
            TestFunctionalKind::ClippedNormSq { cap, floor } => {
                let q: f64 = (0..d).map(|i| shifted(0, i).powi(2)).sum();
                floor + q.min(*cap)
            }
            TestFunctionalKind::ClippedCoord {
                index,
                lo,
                hi,
                offset: c,
            } => c + shifted(0, *index).clamp(*lo, *hi),
            TestFunctionalKind::SegmentBump { centre, width, floor } => {
                let diff = SegmentPath {
                    dt: seg.dt(),
                    max_lag: seg.max_lag(),
                    dim: d,
                    values: (0..=seg.max_lag())
                        .flat_map(|l| (0..d).map(move |i| (l, i)))
                        .map(|(l, i)| shifted(l, i) - centre[i])
                        .collect(),
                    interpolation: "grid",
                };
                floor + (-segment_norm_sq_unchecked(&diff, &self.nu) / width).exp()
            }
        }
    }
}

/// Per-path samples for one coupling cell.
#[derive(Debug, Clone, Serialize)]
pub struct CellSamples {
    pub label: String,
    /// `|h(0)|` or `|η|`.
    pub shift_norm: f64,
    pub log_r: Vec<f64>,
    /// `∫|ψ|² dt` per path.
    pub quad_var: Vec<f64>,
    /// `[functional][path]`: `f` at the coupled terminal segment.
    pub coupled: Vec<Vec<f64>>,
    /// `[functional][path]`: `f(offset + ·)` at the reference terminal segment.
    pub reference: Vec<Vec<f64>>,
    /// `[functional][path]`: `f` at the terminal segment of the direct run.
    pub direct: Vec<Vec<f64>>,
    /// `max |Z̄ − Z − Γ|` over paths and steps.
    pub identity_error: f64,
    pub terminal_residual: f64,
    /// Largest gap between the grid `Γ` and the continuous `Γ`.
    pub discretization_gap: f64,
}

impl CellSamples {
    pub fn weights(&self) -> Vec<f64> {
        self.log_r.iter().map(|l| l.exp()).collect()
    }

    pub fn n_paths(&self) -> usize {
        self.log_r.len()
    }
}

/// One coupling cell: the plan, the direct-run start and the offset applied
/// to `f` on the reference side.
#[derive(Debug, Clone)]
pub struct CellSpec {
    pub label: String,
    pub shift_norm: f64,
    pub plan: CouplingPlan,
    pub direct_start: SegmentPath,
    pub reference_offset: Option<Vec<f64>>,
}

struct PathOut {
    log_r: Vec<f64>,
    qv: Vec<f64>,
    coupled: Vec<f64>,
    reference: Vec<f64>,
    identity: f64,
}

/// Streams A and B for all cells at once.
pub fn simulate_cells(
    sc: &Scenario,
    cells: &[CellSpec],
    functionals: &[TestFunctional],
    n_paths: usize,
    seed: u64,
) -> Result<Vec<CellSamples>> {
    let engine = &sc.engine;
    let tables: Vec<PlanTable> = cells
        .iter()
        .map(|c| PlanTable::new(&c.plan, engine, sc.grid.max_lag))
        .collect::<Result<_>>()?;
    for t in &tables {
        if t.n_steps != sc.grid.n_steps {
            return Err(Error::PlanMismatch(format!(
                "plan has {} steps, scenario {}",
                t.n_steps, sc.grid.n_steps
            )));
        }
    }
    let table_refs: Vec<&PlanTable> = tables.iter().collect();
    let (nc, nf) = (cells.len(), functionals.len());

    let stream_a: Vec<Result<PathOut>> = map_paths(n_paths, seed, Purpose::Reference, |_, rng| {
        run_coupled(
            engine,
            &sc.drift,
            &sc.functional,
            &sc.xi0,
            &table_refs,
            rng,
            |_, _, _| {},
            |run| {
                let mut out = PathOut {
                    log_r: run.ledgers.iter().map(|l| l.log_r.unwrap_or(0.0)).collect(),
                    qv: run.ledgers.iter().map(|l| l.quad_var).collect(),
                    coupled: Vec::with_capacity(nc * nf),
                    reference: Vec::with_capacity(nc * nf),
                    identity: run.identity_errors.iter().copied().fold(0.0, f64::max),
                };
                for (j, c) in cells.iter().enumerate() {
                    for f in functionals {
                        out.coupled.push(f.eval(&run.coupled[j], None));
                        out.reference.push(f.eval(run.reference, c.reference_offset.as_deref()));
                    }
                }
                out
            },
        )
    });
    let stream_a: Vec<PathOut> = stream_a.into_iter().collect::<Result<_>>()?;

    // Direct runs, reusing results for repeated starts.
    let mut direct: Vec<Vec<Vec<f64>>> = Vec::with_capacity(nc);
    for (j, c) in cells.iter().enumerate() {
        if let Some(prev) = (0..j).find(|&i| cells[i].direct_start == c.direct_start) {
            direct.push(direct[prev].clone());
            continue;
        }
        let runs: Vec<Result<Vec<f64>>> = map_paths(n_paths, seed, Purpose::Direct, |_, rng| {
            let hist = engine.run_mild(
                &sc.drift,
                &sc.functional,
                &c.direct_start,
                sc.grid.n_steps,
                rng,
                |_, _, _| {},
            )?;
            Ok(functionals.iter().map(|f| f.eval(&hist, None)).collect())
        });
        let runs: Vec<Vec<f64>> = runs.into_iter().collect::<Result<_>>()?;
        direct.push((0..nf).map(|k| runs.iter().map(|r| r[k]).collect()).collect());
    }

    Ok(cells
        .iter()
        .enumerate()
        .zip(direct)
        .map(|((j, c), direct)| CellSamples {
            label: c.label.clone(),
            shift_norm: c.shift_norm,
            log_r: stream_a.iter().map(|p| p.log_r[j]).collect(),
            quad_var: stream_a.iter().map(|p| p.qv[j]).collect(),
            coupled: (0..nf)
                .map(|k| stream_a.iter().map(|p| p.coupled[j * nf + k]).collect())
                .collect(),
            reference: (0..nf)
                .map(|k| stream_a.iter().map(|p| p.reference[j * nf + k]).collect())
                .collect(),
            direct,
            identity_error: stream_a.iter().map(|p| p.identity).fold(0.0, f64::max),
            terminal_residual: c.plan.terminal_residual(),
            discretization_gap: tables[j].discretization_gap(),
        })
        .collect())
}

/// `E f(Z_T)` from `start`, or `E[R f(Z̄_T)]` for the coupling `weight`
/// started from the reference `start`.
pub fn mc_functional(
    sc: &Scenario,
    f: &TestFunctional,
    start: &SegmentPath,
    weight: Option<&CouplingPlan>,
    n_paths: usize,
    seed: u64,
) -> Result<MCEstimate> {
    let engine = &sc.engine;
    let values: Vec<Result<f64>> = match weight {
        None => map_paths(n_paths, seed, Purpose::Direct, |_, rng| {
            let hist = engine.run_mild(&sc.drift, &sc.functional, start, sc.grid.n_steps, rng, |_, _, _| {})?;
            Ok(f.eval(&hist, None))
        }),
        Some(plan) => {
            let table = PlanTable::new(plan, engine, start.max_lag)?;
            map_paths(n_paths, seed, Purpose::Reference, |_, rng| {
                run_coupled(
                    engine,
                    &sc.drift,
                    &sc.functional,
                    start,
                    &[&table],
                    rng,
                    |_, _, _| {},
                    |run| run.ledgers[0].log_r.unwrap_or(0.0).exp() * f.eval(&run.coupled[0], None),
                )
            })
        }
    };
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    Ok(MCEstimate::from_samples(&values))
}

#[derive(Debug, Clone, Serialize)]
pub struct TransferRow {
    pub cell: String,
    pub shift_norm: f64,
    pub functional: String,
    pub weighted: MCEstimate,
    pub direct: MCEstimate,
    pub agree: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransferReport {
    pub rows: Vec<TransferRow>,
    pub z: f64,
    pub pass: bool,
}

/// Weighted `E[R f(Z̄_T)]` against direct `E f(Z_T)` from the target start.
pub fn verify_measure_transfer(cells: &[CellSamples], functionals: &[TestFunctional], z: f64) -> TransferReport {
    let mut rows = Vec::new();
    for c in cells {
        let w = c.weights();
        for (k, f) in functionals.iter().enumerate() {
            let weighted: Vec<f64> = w.iter().zip(&c.coupled[k]).map(|(r, v)| r * v).collect();
            let weighted = MCEstimate::from_samples(&weighted);
            let direct = MCEstimate::from_samples(&c.direct[k]);
            rows.push(TransferRow {
                cell: c.label.clone(),
                shift_norm: c.shift_norm,
                functional: f.label(),
                weighted,
                direct,
                agree: agree_within(&weighted, &direct, z),
            });
        }
    }
    let pass = rows.iter().all(|r| r.agree);
    TransferReport { rows, z, pass }
}

#[derive(Debug, Clone, Serialize)]
pub struct LedgerSummary {
    pub cell: String,
    pub shift_norm: f64,
    pub mean_r: MCEstimate,
    /// `E[R · ½∫|ψ|²]`.
    pub entropy: MCEstimate,
    /// `E[R log R]`, estimated directly.
    pub entropy_direct: MCEstimate,
    pub mean_log_r: MCEstimate,
    pub max_quad_var: f64,
    pub normalized: bool,
    pub entropy_agree: bool,
    pub identity_error: f64,
    pub terminal_residual: f64,
    pub discretization_gap: f64,
}

/// Normalization `E R = 1` at `z` standard errors plus the two entropy estimators.
pub fn summarize_ledgers(cells: &[CellSamples], z: f64) -> Vec<LedgerSummary> {
    cells
        .iter()
        .map(|c| {
            let w = c.weights();
            let mean_r = MCEstimate::from_samples(&w);
            let ent: Vec<f64> = w.iter().zip(&c.quad_var).map(|(r, q)| 0.5 * r * q).collect();
            let ent_direct: Vec<f64> = w.iter().zip(&c.log_r).map(|(r, l)| r * l).collect();
            let entropy = MCEstimate::from_samples(&ent);
            let entropy_direct = MCEstimate::from_samples(&ent_direct);
            LedgerSummary {
                cell: c.label.clone(),
                shift_norm: c.shift_norm,
                normalized: (mean_r.mean - 1.0).abs() <= z * mean_r.std_error + 1e-12,
                entropy_agree: agree_within(&entropy, &entropy_direct, z),
                mean_r,
                entropy,
                entropy_direct,
                mean_log_r: MCEstimate::from_samples(&c.log_r),
                max_quad_var: c.quad_var.iter().copied().fold(0.0, f64::max),
                identity_error: c.identity_error,
                terminal_residual: c.terminal_residual,
                discretization_gap: c.discretization_gap,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HarnackKind {
    Log,
    Power,
    ShiftLog,
    ShiftPower,
}

impl HarnackKind {
    pub fn name(self) -> &'static str {
        match self {
            HarnackKind::Log => "log",
            HarnackKind::Power => "power",
            HarnackKind::ShiftLog => "shift-log",
            HarnackKind::ShiftPower => "shift-power",
        }
    }

    pub fn is_log(self) -> bool {
        matches!(self, HarnackKind::Log | HarnackKind::ShiftLog)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    pub kind: HarnackKind,
    pub cell: String,
    pub shift_norm: f64,
    pub p: Option<f64>,
    pub lhs: MCEstimate,
    pub rhs: MCEstimate,
    pub slack: f64,
    pub combined_se: f64,
    pub z: f64,
    pub pass: bool,
    /// Sharp intermediate bound: `E R log R` (log kinds) or `max ∫|ψ|²` (power kinds).
    pub sharp_bound: f64,
    /// `Σ` or `β` at the calibrated constant.
    pub bound_value: Option<f64>,
    /// `p/(2(p−1))` times the sharp bound, for power kinds.
    pub exponent: Option<f64>,
}

/// One inequality row for `cell` with test function index `k`.
pub fn verify_harnack(
    kind: HarnackKind,
    p: Option<f64>,
    cell: &CellSamples,
    k: usize,
    f: &TestFunctional,
    f_min: f64,
    bound_value: Option<f64>,
    z: f64,
) -> Result<InequalityReport> {
    if !(f.infimum() > 0.0) || (kind.is_log() && f.infimum() < f_min) {
        return Err(Error::Domain(format!(
            "{} has infimum {} below the floor {f_min}",
            f.label(),
            f.infimum()
        )));
    }
    let n = cell.n_paths();
    let w = cell.weights();
    let reference = &cell.reference[k];
    let direct = &cell.direct[k];
    let (lhs, rhs, sharp, exponent) = if kind.is_log() {
        let logs: Vec<f64> = direct.iter().map(|v| v.ln()).collect();
        let lhs = MCEstimate::from_samples(&logs);
        let m = stats::mean(reference);
        let ent: Vec<f64> = w.iter().zip(&cell.quad_var).map(|(r, q)| 0.5 * r * q).collect();
        let e = stats::mean(&ent);
        let (bound, use_sharp) = match bound_value {
            Some(b) if b < e => (b, false),
            _ => (e, true),
        };
        let influence: Vec<f64> = reference
            .iter()
            .zip(&ent)
            .map(|(v, en)| v / m + if use_sharp { *en } else { 0.0 })
            .collect();
        let se = (stats::variance(&influence) / n as f64).sqrt();
        let rhs = MCEstimate {
            mean: m.ln() + bound,
            std_error: se,
            n_paths: n,
            confidence_z: z,
        };
        (lhs, rhs, e, None)
    } else {
        let p = p.ok_or_else(|| Error::Domain("power kinds need p".into()))?;
        if !(p > 1.0) {
            return Err(Error::Domain(format!("p = {p} must exceed 1")));
        }
        let direct_mean = MCEstimate::from_samples(direct);
        let lhs = direct_mean.map(direct_mean.mean.powf(p), p * direct_mean.mean.powf(p - 1.0));
        let pow: Vec<f64> = reference.iter().map(|v| v.powf(p)).collect();
        let pow = MCEstimate::from_samples(&pow);
        let sharp = cell.quad_var.iter().copied().fold(0.0, f64::max);
        let expo = p / (2.0 * (p - 1.0)) * sharp;
        let factor = expo.exp();
        let rhs = pow.map(pow.mean * factor, factor);
        (lhs, rhs, sharp, Some(expo))
    };
    let slack = rhs.mean - lhs.mean;
    let combined_se = (lhs.std_error.powi(2) + rhs.std_error.powi(2)).sqrt();
    Ok(InequalityReport {
        kind,
        cell: cell.label.clone(),
        shift_norm: cell.shift_norm,
        p: if kind.is_log() { None } else { p },
        lhs: MCEstimate { confidence_z: z, ..lhs },
        rhs: MCEstimate { confidence_z: z, ..rhs },
        slack,
        combined_se,
        z,
        pass: slack >= -z * combined_se,
        sharp_bound: sharp,
        bound_value,
        exponent,
    })
}

/// `true` when slack does not decrease as the shift grows.
pub fn slack_monotone(rows: &[&InequalityReport]) -> bool {
    let mut sorted: Vec<&&InequalityReport> = rows.iter().collect();
    sorted.sort_by(|a, b| a.shift_norm.total_cmp(&b.shift_norm));
    sorted.windows(2).all(|w| w[1].slack >= w[0].slack)
}
