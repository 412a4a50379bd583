//! Truncated operators and the executable structural checks.

use serde::Serialize;

use crate::config::{EigenLaw, MatrixSpec, ModelConfig, ScenarioConfig};
use crate::error::{Condition, Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::quadrature::{integrate_mat, DEFAULT_REL_TOL};

pub const INTERTWINING_TOL: f64 = 1e-10;
pub const MAX_CONDITION: f64 = 1e12;
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncatedSpace {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    /// Eigenvalues of `−A₂`, non-decreasing.
    pub eigenvalues: Vec<f64>,
    pub epsilon: f64,
    /// `(scale, exponent)` when the eigenvalues follow a power law.
    pub growth_law: Option<(f64, f64)>,
}

impl TruncatedSpace {
    /// `Σ_{i ≤ n2} λ_i^{ε−1}`.
    pub fn partial_trace(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.powf(self.epsilon - 1.0)).sum()
    }

    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Orthogonal projection of `H₂` onto its first `n` eigenmodes.
    pub fn projector2(&self, n: usize) -> Mat {
        let m = self.n2;
        Mat::from_fn(m, m, |i, j| if i == j && i < n { 1.0 } else { 0.0 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub condition: Condition,
    pub label: &'static str,
    pub name: &'static str,
    pub residual: f64,
    pub threshold: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
    pub partial_trace: f64,
    pub all_pass: bool,
}

impl AssumptionReport {
    fn record(
        &mut self,
        condition: Condition,
        residual: f64,
        threshold: f64,
        passed: bool,
        detail: String,
    ) -> Result<()> {
        self.checks.push(AssumptionCheck {
            condition,
            label: condition.label(),
            name: condition.name(),
            residual,
            threshold,
            passed,
            detail: detail.clone(),
        });
        if passed {
            Ok(())
        } else {
            Err(Error::violation(condition, residual, detail))
        }
    }
}

/// Validated operators. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSet {
    pub space: TruncatedSpace,
    pub a1: Mat,
    pub a2: Mat,
    pub b: Mat,
    pub q: Mat,
    pub a0: Mat,
    pub a0_derived: bool,
    pub delta: f64,
    /// `Q*(QQ*)⁻¹`, mapping `H₂` drift mismatches to `H₃` shifts.
    pub q_pinv: Mat,
    pub b_norm: f64,
    pub report: AssumptionReport,
}

impl OperatorSet {
    pub fn n1(&self) -> usize {
        self.space.n1
    }
    pub fn n2(&self) -> usize {
        self.space.n2
    }
    pub fn n3(&self) -> usize {
        self.space.n3
    }
    pub fn dim(&self) -> usize {
        self.space.n1 + self.space.n2
    }

    /// Augmented generator `[[A₁, B], [0, A₂]]` of the linear flow.
    pub fn augmented_drift(&self) -> Mat {
        let (n1, n2) = (self.n1(), self.n2());
        let mut m = Mat::zeros(n1 + n2, n1 + n2);
        m.view_mut((0, 0), (n1, n1)).copy_from(&self.a1);
        m.view_mut((0, n1), (n1, n2)).copy_from(&self.b);
        m.view_mut((n1, n1), (n2, n2)).copy_from(&self.a2);
        m
    }

    /// Noise map `[0; Q]`.
    pub fn augmented_noise(&self) -> Mat {
        let (n1, n2, n3) = (self.n1(), self.n2(), self.n3());
        let mut g = Mat::zeros(n1 + n2, n3);
        g.view_mut((n1, 0), (n2, n3)).copy_from(&self.q);
        g
    }

    /// A copy with `Q` replaced by `Q·U`; `QQ*` is unchanged for orthogonal `U`.
    pub fn with_noise(&self, q: Mat) -> Result<Self> {
        let qq = &q * q.transpose();
        let q_pinv = q.transpose()
            * qq.try_inverse()
                .ok_or_else(|| Error::violation(Condition::NoiseInvertible, 0.0, "QQ* is singular"))?;
        Ok(OperatorSet {
            space: TruncatedSpace {
                n3: q.ncols(),
                ..self.space.clone()
            },
            q,
            q_pinv,
            ..self.clone()
        })
    }
}

fn eigenvalues(cfg: &ModelConfig) -> Result<(Vec<f64>, Option<(f64, f64)>)> {
    match &cfg.eigenvalues {
        EigenLaw::Power { scale, exponent } => Ok((
            (1..=cfg.n2).map(|k| scale * (k as f64).powf(*exponent)).collect(),
            Some((*scale, *exponent)),
        )),
        EigenLaw::Explicit { values } => {
            if values.len() != cfg.n2 {
                return Err(Error::violation(
                    Condition::Dimensions,
                    values.len() as f64,
                    format!("{} eigenvalues given for n2 = {}", values.len(), cfg.n2),
                ));
            }
            Ok((values.clone(), None))
        }
    }
}

fn matrix(spec: &MatrixSpec, rows: usize, cols: usize, a2: &Mat, what: &str) -> Result<Mat> {
    let bad = |got: String| Error::violation(Condition::Dimensions, 0.0, format!("{what}: {got}"));
    let m = match spec {
        MatrixSpec::Identity => linalg::eye(rows, cols),
        MatrixSpec::Zero => Mat::zeros(rows, cols),
        MatrixSpec::Scaled { scale } => linalg::eye(rows, cols) * *scale,
        MatrixSpec::SameAsA2 | MatrixSpec::ShiftedA2 { .. } => {
            if (rows, cols) != a2.shape() {
                return Err(bad(format!("needs shape {:?} to copy A2", a2.shape())));
            }
            let shift = match spec {
                MatrixSpec::ShiftedA2 { shift } => *shift,
                _ => 0.0,
            };
            a2 + Mat::identity(rows, cols) * shift
        }
        MatrixSpec::Diagonal { values } => {
            if values.len() != rows.min(cols) {
                return Err(bad(format!(
                    "{} diagonal entries for shape {rows}x{cols}",
                    values.len()
                )));
            }
            Mat::from_fn(rows, cols, |i, j| if i == j { values[i] } else { 0.0 })
        }
        MatrixSpec::Dense { rows: data } => {
            let m = linalg::from_rows(data).ok_or_else(|| bad("ragged rows".into()))?;
            if m.shape() != (rows, cols) {
                return Err(bad(format!("shape {:?}, expected {rows}x{cols}", m.shape())));
            }
            m
        }
    };
    if m.iter().any(|v| !v.is_finite()) {
        return Err(bad("non-finite entry".into()));
    }
    Ok(m)
}

/// Projection onto `span(B e₁, …, B e_n)`.
fn range_projector(b: &Mat, n: usize) -> Mat {
    let cols = b.columns(0, n).into_owned();
    let svd = cols.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors");
    let smax = svd.singular_values.max();
    let mut p = Mat::zeros(b.nrows(), b.nrows());
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s > RANK_TOL * smax.max(1.0) {
            let uk = u.column(k);
            p += &uk * uk.transpose();
        }
    }
    p
}

pub fn intertwining_residual(a1: &Mat, a2: &Mat, a0: &Mat, b: &Mat, times: &[f64]) -> f64 {
    times
        .iter()
        .map(|&t| (b * linalg::expm(a2, t) - linalg::expm(a1, t) * linalg::expm(a0, t) * b).norm())
        .fold(0.0, f64::max)
}

/// Builds the truncated operators and verifies, in order: dimensions,
/// eigenvalue law and trace proxy, `QQ*` invertible, `BB*` invertible,
/// intertwining, block commutation, dissipativity and Gramian invertibility.
pub fn build_model(config: &ScenarioConfig) -> Result<OperatorSet> {
    let cfg = &config.model;
    let horizon = config.simulation.horizon;
    let mut report = AssumptionReport::default();

    let dims_ok = cfg.n1 >= 1 && cfg.n2 >= 1 && cfg.n3 >= 1;
    report.record(
        Condition::Dimensions,
        0.0,
        1.0,
        dims_ok,
        format!("n1 = {}, n2 = {}, n3 = {}", cfg.n1, cfg.n2, cfg.n3),
    )?;

    let (eig, growth_law) = eigenvalues(cfg)?;
    let positive = eig.iter().all(|l| *l > 0.0 && l.is_finite());
    let sorted = eig.windows(2).all(|w| w[0] <= w[1]);
    let eps_ok = cfg.epsilon > 0.0 && cfg.epsilon < 1.0;
    let space = TruncatedSpace {
        n1: cfg.n1,
        n2: cfg.n2,
        n3: cfg.n3,
        eigenvalues: eig.clone(),
        epsilon: cfg.epsilon,
        growth_law,
    };
    report.partial_trace = if positive { space.partial_trace() } else { f64::NAN };
    // For a power law the full series converges iff exponent (1 − ε) > 1.
    let (law_ok, law_detail) = match growth_law {
        Some((scale, p)) => (
            scale > 0.0 && p * (1.0 - cfg.epsilon) > 1.0,
            format!("λ_k = {scale}·k^{p}, series exponent {:.3}", p * (1.0 - cfg.epsilon)),
        ),
        None => (true, "explicit eigenvalues, growth law not checkable".to_string()),
    };
    report.record(
        Condition::TraceClass,
        report.partial_trace,
        f64::INFINITY,
        positive && sorted && eps_ok && law_ok,
        format!(
            "{law_detail}; positive {positive}, non-decreasing {sorted}, ε in (0,1) {eps_ok}; partial trace {:.6}",
            report.partial_trace
        ),
    )?;

    let a2 = Mat::from_diagonal(&Vector::from_iterator(cfg.n2, eig.iter().map(|l| -l)));
    let a1 = matrix(&cfg.a1, cfg.n1, cfg.n1, &a2, "A1")?;
    let b = matrix(&cfg.b, cfg.n1, cfg.n2, &a2, "B")?;
    let q = matrix(&cfg.q, cfg.n2, cfg.n3, &a2, "Q")?;

    let qq = &q * q.transpose();
    let qq_scale = linalg::operator_norm(&qq).max(1.0);
    let qq_min = linalg::smallest_singular_value(&qq);
    report.record(
        Condition::NoiseInvertible,
        qq_min,
        RANK_TOL * qq_scale,
        qq_min > RANK_TOL * qq_scale,
        format!("smallest singular value of QQ* is {qq_min:.3e}"),
    )?;

    let bb = &b * b.transpose();
    let bb_scale = linalg::operator_norm(&bb).max(1.0);
    let bb_min = linalg::smallest_singular_value(&bb);
    report.record(
        Condition::ControlInvertible,
        bb_min,
        RANK_TOL * bb_scale,
        bb_min > RANK_TOL * bb_scale,
        format!("smallest singular value of BB* is {bb_min:.3e}"),
    )?;
    let bb_inv = bb.clone().try_inverse().expect("checked invertible");

    let (a0, a0_derived) = match &cfg.a0 {
        Some(spec) => (matrix(spec, cfg.n1, cfg.n1, &a2, "A0")?, false),
        // Differentiating the intertwining relation at t = 0 gives A₀B = BA₂ − A₁B.
        None => ((&b * &a2 - &a1 * &b) * b.transpose() * &bb_inv, true),
    };
    let times: Vec<f64> = (0..=20).map(|i| horizon.max(1.0) * i as f64 / 20.0).collect();
    let resid = intertwining_residual(&a1, &a2, &a0, &b, &times);
    report.record(
        Condition::Intertwining,
        resid,
        INTERTWINING_TOL,
        resid <= INTERTWINING_TOL,
        format!(
            "max_t |B e^(A2 t) - e^(A1 t) e^(A0 t) B| = {resid:.3e} ({} A0)",
            if a0_derived { "derived" } else { "supplied" }
        ),
    )?;

    let scale = 1.0 + a1.norm() + b.norm();
    let mut comm = 0.0f64;
    let mut worst_n = cfg.n0;
    for n in cfg.n0.max(1)..=cfg.n2 {
        let p1 = range_projector(&b, n);
        let p2 = space.projector2(n);
        let r = (&p1 * &b - &b * &p2).norm().max((&p1 * &a1 - &a1 * &p1).norm());
        if r > comm {
            comm = r;
            worst_n = n;
        }
    }
    report.record(
        Condition::BlockCommutation,
        comm,
        INTERTWINING_TOL * scale,
        comm <= INTERTWINING_TOL * scale,
        format!("worst projector commutator {comm:.3e} at n = {worst_n}"),
    )?;

    let sym = (&a1 + a1.transpose()) * 0.5;
    let top = linalg::symmetric_eigenvalues(&sym).max();
    let bound = cfg.delta - space.lambda1();
    report.record(
        Condition::Dissipativity,
        top - bound,
        0.0,
        cfg.delta > 0.0 && top <= bound + 1e-12 * (1.0 + bound.abs()),
        format!("largest eigenvalue of sym(A1) is {top:.6}, required <= δ - λ1 = {bound:.6}"),
    )?;

    let mut ops = OperatorSet {
        b_norm: linalg::operator_norm(&b),
        q_pinv: q.transpose() * qq.try_inverse().expect("checked invertible"),
        space,
        a1,
        a2,
        b,
        q,
        a0,
        a0_derived,
        delta: cfg.delta,
        report: AssumptionReport::default(),
    };
    let (gram, cond) = gramian_with_condition(&ops, GramianKind::Plain, horizon);
    let _ = gram;
    report.record(
        Condition::GramianInvertible,
        cond,
        MAX_CONDITION,
        cond.is_finite() && cond <= MAX_CONDITION,
        format!("condition number of Λ_T at T = {horizon} is {cond:.3e}"),
    )?;
    report.all_pass = report.checks.iter().all(|c| c.passed);
    ops.report = report;
    Ok(ops)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GramianKind {
    /// `∫₀^t e^{sA₀}BB*e^{sA₀*} ds`.
    Plain,
    /// `∫₀^t s(t−s) e^{sA₀}BB*e^{sA₀*} ds` with `t = T − r`.
    Harnack,
    /// Same weight with `t = T`.
    Shift,
}

fn gramian_with_condition(ops: &OperatorSet, kind: GramianKind, horizon: f64) -> (Mat, f64) {
    let bb = &ops.b * ops.b.transpose();
    let zero_a0 = ops.a0.iter().all(|v| *v == 0.0);
    let g = integrate_mat(
        |s| {
            let w = match kind {
                GramianKind::Plain => 1.0,
                GramianKind::Harnack | GramianKind::Shift => s * (horizon - s),
            };
            if zero_a0 {
                &bb * w
            } else {
                let e = linalg::expm(&ops.a0, s);
                &e * &bb * e.transpose() * w
            }
        },
        0.0,
        horizon,
        DEFAULT_REL_TOL,
    );
    let g = (&g + g.transpose()) * 0.5;
    let cond = linalg::spd_condition_number(&g);
    (g, cond)
}

/// Weighted controllability Gramian, symmetrized.
pub fn weighted_gramian(ops: &OperatorSet, kind: GramianKind, horizon: f64) -> Result<Mat> {
    if !(horizon > 0.0) {
        return Err(Error::Horizon(format!("gramian horizon {horizon} must be positive")));
    }
    let (g, cond) = gramian_with_condition(ops, kind, horizon);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::SingularGramian { condition_number: cond });
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;

    #[test]
    fn default_model_derives_zero_a0() {
        let ops = build_model(&ScenarioConfig::default()).unwrap();
        assert!(ops.a0_derived);
        assert_eq!(ops.a0.norm(), 0.0);
        assert!(ops.report.all_pass);
        assert_eq!(ops.a2[(3, 3)], -16.0);
    }

    #[test]
    fn zero_row_in_b_is_rejected() {
        let mut cfg = ScenarioConfig::default();
        let mut rows = vec![vec![0.0; 4]; 4];
        for (i, row) in rows.iter_mut().enumerate().take(3) {
            row[i] = 1.0;
        }
        cfg.model.b = MatrixSpec::Dense { rows };
        match build_model(&cfg) {
            Err(Error::AssumptionViolation { condition, .. }) => assert_eq!(condition, Condition::ControlInvertible),
            other => panic!("expected BB* failure, got {other:?}"),
        }
    }

    #[test]
    fn shifted_a1_derives_compensating_a0() {
        let mut cfg = ScenarioConfig::default();
        cfg.model.a1 = MatrixSpec::ShiftedA2 { shift: 0.5 };
        let ops = build_model(&cfg).unwrap();
        assert!((ops.a0.clone() + Mat::identity(4, 4) * 0.5).norm() < 1e-14);
    }

    #[test]
    fn gramian_closed_forms() {
        let ops = build_model(&ScenarioConfig::default()).unwrap();
        let plain = weighted_gramian(&ops, GramianKind::Plain, 2.0).unwrap();
        assert!((plain - Mat::identity(4, 4) * 2.0).norm() < 1e-12);
        let h = weighted_gramian(&ops, GramianKind::Harnack, 3.0).unwrap();
        assert!((&h - Mat::identity(4, 4) * 4.5).norm() < 1e-12);
        assert!((&h - h.transpose()).norm() < 1e-12);
    }
}
