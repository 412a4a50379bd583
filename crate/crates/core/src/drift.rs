//! Built-in Hölder–Dini drifts, Lipschitz segment functionals and
//! sampling checkers for their modulus constants.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::config::{CoefficientsConfig, DiniConfig, DriftConfig, FunctionalConfig};
use crate::delay::{segment_norm_sq_unchecked, DelayMeasure, SegmentPath, SegmentView};
use crate::error::{Error, Result};
use crate::quadrature::integrate;
use crate::rng::{path_rng, Purpose};

/// `φ(s) = K / log^{1+δ}(c + 1/s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiniModulus {
    pub k_phi: f64,
    pub delta: f64,
    pub c: f64,
}

pub fn default_dini_offset() -> f64 {
    3f64.exp()
}

impl DiniModulus {
    pub fn new(k_phi: f64, delta: f64, c: f64) -> Result<Self> {
        if !(k_phi >= 0.0 && delta > 0.0 && c >= std::f64::consts::E) {
            return Err(Error::Config(format!(
                "Dini modulus needs K >= 0, δ > 0, c >= e (got K = {k_phi}, δ = {delta}, c = {c})"
            )));
        }
        Ok(DiniModulus { k_phi, delta, c })
    }

    pub fn from_config(cfg: &DiniConfig, scale: f64) -> Result<Self> {
        Self::new(cfg.k * scale, cfg.delta, cfg.c.unwrap_or_else(default_dini_offset))
    }

    pub fn phi(&self, s: f64) -> f64 {
        dini_phi(s, self)
    }

    /// `lim_{s→∞} φ(s) = K / log^{1+δ}(c)`.
    pub fn sup(&self) -> f64 {
        self.k_phi / self.c.ln().powf(1.0 + self.delta)
    }

    /// `∫₀¹ φ(s)/s ds`, via `s = e^{−u}` with an analytic tail past `u = U`.
    pub fn dini_integral(&self) -> f64 {
        const U: f64 = 200.0;
        let body = integrate(
            |u| self.k_phi / (self.c + u.exp()).ln().powf(1.0 + self.delta),
            0.0,
            U,
            1e-10,
        );
        body + self.k_phi * U.powf(-self.delta) / self.delta
    }
}

pub fn dini_phi(s: f64, m: &DiniModulus) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    m.k_phi / (m.c + 1.0 / s).ln().powf(1.0 + m.delta)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiniReport {
    pub increasing: bool,
    pub phi_sq_concave: bool,
    pub worst_concavity_gap: f64,
    pub dini_integral: f64,
    pub pass: bool,
}

/// Monotonicity and midpoint concavity of `φ²` on a log-spaced grid.
pub fn check_dini_modulus(m: &DiniModulus) -> DiniReport {
    let grid: Vec<f64> = (0..=60).map(|i| 10f64.powf(-8.0 + 11.0 * i as f64 / 60.0)).collect();
    let increasing = grid.windows(2).all(|w| m.phi(w[0]) <= m.phi(w[1]));
    let sq = |s: f64| m.phi(s).powi(2);
    let mut worst = f64::NEG_INFINITY;
    for (i, &a) in grid.iter().enumerate() {
        for &b in &grid[i + 1..] {
            let gap = (sq(a) + sq(b)) / 2.0 - sq((a + b) / 2.0);
            worst = worst.max(gap);
        }
    }
    let concave = worst <= 1e-12;
    let integral = m.dini_integral();
    DiniReport {
        increasing,
        phi_sq_concave: concave,
        worst_concavity_gap: worst,
        dini_integral: integral,
        pass: increasing && concave && integral.is_finite(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DriftKind {
    Zero,
    Constant {
        value: Vec<f64>,
    },
    SinHolder {
        amplitude: f64,
        power: f64,
        direction: Vec<f64>,
    },
    DiniLog {
        amp_x: f64,
        amp_y: f64,
        direction: Vec<f64>,
    },
}

/// A bounded drift `b : H → H₂` with its claimed moduli constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderDiniDrift {
    pub n1: usize,
    pub n2: usize,
    pub kind: DriftKind,
    pub alpha: f64,
    pub k_holder: f64,
    /// Modulus in `y`; for the Dini drift it is `|amp_y|` times the unit modulus.
    pub modulus: DiniModulus,
    /// The unscaled modulus the Dini drift evaluates.
    unit: DiniModulus,
    pub sup_bound: f64,
}

fn unit_direction(direction: &Option<Vec<f64>>, n: usize) -> Result<Vec<f64>> {
    let v = direction.clone().unwrap_or_else(|| vec![1.0; n]);
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            what: "drift direction",
            expected: n,
            got: v.len(),
        });
    }
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::Config("drift direction must be non-zero".into()));
    }
    Ok(v.iter().map(|a| a / norm).collect())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

impl HolderDiniDrift {
    pub fn from_config(cfg: &DriftConfig, n1: usize, n2: usize) -> Result<Self> {
        let default_modulus = DiniModulus::from_config(&DiniConfig::default(), 1.0)?;
        let zero_modulus = DiniModulus {
            k_phi: 0.0,
            ..default_modulus
        };
        let drift = match cfg {
            DriftConfig::Zero => HolderDiniDrift {
                n1,
                n2,
                kind: DriftKind::Zero,
                alpha: default_alpha(),
                k_holder: 0.0,
                modulus: zero_modulus,
                unit: default_modulus,
                sup_bound: 0.0,
            },
            DriftConfig::Constant { value } => {
                if value.len() != n2 {
                    return Err(Error::DimensionMismatch {
                        what: "constant drift",
                        expected: n2,
                        got: value.len(),
                    });
                }
                HolderDiniDrift {
                    n1,
                    n2,
                    kind: DriftKind::Constant { value: value.clone() },
                    alpha: default_alpha(),
                    k_holder: 0.0,
                    modulus: zero_modulus,
                    unit: default_modulus,
                    sup_bound: norm(value),
                }
            }
            DriftConfig::SinHolder {
                amplitude,
                power,
                alpha,
                direction,
            } => {
                if !(*power > 0.0 && *power <= 1.0 && *alpha <= *power) {
                    return Err(Error::Config(format!(
                        "sin-holder needs alpha <= power <= 1 (got {alpha}, {power})"
                    )));
                }
                HolderDiniDrift {
                    n1,
                    n2,
                    kind: DriftKind::SinHolder {
                        amplitude: *amplitude,
                        power: *power,
                        direction: unit_direction(direction, n2)?,
                    },
                    alpha: *alpha,
                    k_holder: amplitude.abs(),
                    modulus: zero_modulus,
                    unit: default_modulus,
                    sup_bound: amplitude.abs(),
                }
            }
            DriftConfig::DiniLog {
                amp_x,
                amp_y,
                alpha,
                modulus,
                direction,
            } => {
                let unit = DiniModulus::from_config(modulus, 1.0)?;
                let scaled = DiniModulus::from_config(modulus, amp_y.abs())?;
                HolderDiniDrift {
                    n1,
                    n2,
                    kind: DriftKind::DiniLog {
                        amp_x: *amp_x,
                        amp_y: *amp_y,
                        direction: unit_direction(direction, n2)?,
                    },
                    alpha: *alpha,
                    k_holder: amp_x.abs(),
                    modulus: scaled,
                    unit,
                    sup_bound: amp_x.abs() + scaled.sup(),
                }
            }
        };
        Ok(drift)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, DriftKind::Zero)
    }

    /// `out = b(x, y)`.
    #[inline]
    pub fn eval_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        match &self.kind {
            DriftKind::Zero => out.fill(0.0),
            DriftKind::Constant { value } => out.copy_from_slice(value),
            DriftKind::SinHolder {
                amplitude,
                power,
                direction,
            } => {
                let s = amplitude * norm(x).powf(*power).sin();
                for (o, d) in out.iter_mut().zip(direction) {
                    *o = s * d;
                }
            }
            DriftKind::DiniLog {
                amp_x,
                amp_y,
                direction,
            } => {
                let s = amp_x * norm(x).powf(self.alpha).sin() + amp_y * self.unit.phi(norm(y));
                for (o, d) in out.iter_mut().zip(direction) {
                    *o = s * d;
                }
            }
        }
    }

    /// Evaluation at a full state `z = (x, y)`.
    pub fn eval(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n2];
        self.eval_into(&z[..self.n1], &z[self.n1..], &mut out);
        out
    }
}

fn default_alpha() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FunctionalKind {
    Zero,
    LinearAverage { c0: f64 },
}

/// A Lipschitz functional `F : C_ν → H₂`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentFunctional {
    pub n1: usize,
    pub n2: usize,
    pub kind: FunctionalKind,
    pub lipschitz_c: f64,
    lags: Vec<usize>,
    weights: Vec<f64>,
}

impl SegmentFunctional {
    pub fn from_config(cfg: &FunctionalConfig, n1: usize, n2: usize, nu: &DelayMeasure) -> Result<Self> {
        let (kind, lipschitz_c) = match cfg {
            FunctionalConfig::Zero => (FunctionalKind::Zero, 0.0),
            FunctionalConfig::LinearAverage { c0, lipschitz } => (
                FunctionalKind::LinearAverage { c0: *c0 },
                lipschitz.unwrap_or(c0.abs() * nu.quadrature_mass().sqrt()),
            ),
        };
        Ok(SegmentFunctional {
            n1,
            n2,
            kind,
            lipschitz_c,
            lags: nu.lags.clone(),
            weights: nu.weights.clone(),
        })
    }

    /// Deepest lag the functional reads.
    pub fn max_lag(&self) -> usize {
        self.lags.iter().copied().max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        match self.kind {
            FunctionalKind::Zero => true,
            FunctionalKind::LinearAverage { c0 } => c0 == 0.0 || self.weights.iter().all(|w| *w == 0.0),
        }
    }

    #[inline]
    pub fn eval_into(&self, seg: &impl SegmentView, out: &mut [f64]) {
        out.fill(0.0);
        if let FunctionalKind::LinearAverage { c0 } = self.kind {
            for (&l, &w) in self.lags.iter().zip(&self.weights) {
                let y = &seg.lag(l)[self.n1..];
                for (o, v) in out.iter_mut().zip(y) {
                    *o += w * v;
                }
            }
            for o in out.iter_mut() {
                *o *= c0;
            }
        }
    }
}

/// `(b(z_now), F(seg))`.
pub fn eval_coefficients(
    b: &HolderDiniDrift,
    f: &SegmentFunctional,
    z_now: &[f64],
    seg: &impl SegmentView,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = b.n1 + b.n2;
    if z_now.len() != d {
        return Err(Error::DimensionMismatch {
            what: "state",
            expected: d,
            got: z_now.len(),
        });
    }
    if seg.dim() != d {
        return Err(Error::DimensionMismatch {
            what: "segment",
            expected: d,
            got: seg.dim(),
        });
    }
    if let Some(&l) = f.lags.iter().max() {
        if seg.max_lag() < l {
            return Err(Error::GridMismatch(format!(
                "segment covers {} lags, F needs {l}",
                seg.max_lag()
            )));
        }
    }
    let mut fv = vec![0.0; b.n2];
    f.eval_into(seg, &mut fv);
    Ok((b.eval(z_now), fv))
}

/// Drift and functional built from the coefficient block.
pub fn coefficients_from_config(
    cfg: &CoefficientsConfig,
    n1: usize,
    n2: usize,
    nu: &DelayMeasure,
) -> Result<(HolderDiniDrift, SegmentFunctional)> {
    Ok((
        HolderDiniDrift::from_config(&cfg.drift, n1, n2)?,
        SegmentFunctional::from_config(&cfg.functional, n1, n2, nu)?,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModuliReport {
    pub n_samples: usize,
    /// `max |b(z) − b(z′)| / (K|x−x′|^α + φ(|y−y′|))`.
    pub holder_worst_ratio: f64,
    /// `max |F(ξ) − F(η)| / (c ‖ξ − η‖_ν)`.
    pub lipschitz_worst_ratio: f64,
    pub sup_observed: f64,
    pub sup_bound: f64,
    pub dini: DiniReport,
    pub pass: bool,
}

const RATIO_TOL: f64 = 1e-9;

fn gaussian_vec(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn random_unit(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let v = gaussian_vec(rng, n, 1.0);
        let nv = norm(&v);
        if nv > 1e-12 {
            return v.iter().map(|a| a / nv).collect();
        }
    }
}

/// Sampling check of the Hölder–Dini inequality for `b`, the Lipschitz
/// bound for `F`, the sup bound and the modulus properties.
pub fn check_drift_moduli(
    b: &HolderDiniDrift,
    f: &SegmentFunctional,
    nu: &DelayMeasure,
    n_samples: usize,
    seed: u64,
) -> ModuliReport {
    let n_samples = n_samples.max(1);
    let (n1, n2) = (b.n1, b.n2);
    let mut rng = path_rng(seed, Purpose::Checks, 0);
    let log_sep = |rng: &mut rand_chacha::ChaCha8Rng| 10f64.powf(rng.random_range(-6.0..=0.0));

    let mut holder = 0.0f64;
    let mut sup = 0.0f64;
    for i in 0..n_samples {
        let x = gaussian_vec(&mut rng, n1, 2.0);
        let y = gaussian_vec(&mut rng, n2, 2.0);
        let (mut x2, mut y2) = (x.clone(), y.clone());
        let (mut dx, mut dy) = (0.0, 0.0);
        if i % 3 != 1 {
            dx = log_sep(&mut rng);
            for (a, u) in x2.iter_mut().zip(random_unit(&mut rng, n1)) {
                *a += dx * u;
            }
        }
        if i % 3 != 0 {
            dy = log_sep(&mut rng);
            for (a, u) in y2.iter_mut().zip(random_unit(&mut rng, n2)) {
                *a += dy * u;
            }
        }
        let mut b1 = vec![0.0; n2];
        let mut b2 = vec![0.0; n2];
        b.eval_into(&x, &y, &mut b1);
        b.eval_into(&x2, &y2, &mut b2);
        let lhs = norm(&b1.iter().zip(&b2).map(|(p, q)| p - q).collect::<Vec<_>>());
        let rhs = b.k_holder * dx.powf(b.alpha) + b.modulus.phi(dy);
        let ratio = if lhs == 0.0 {
            0.0
        } else if rhs == 0.0 {
            f64::INFINITY
        } else {
            lhs / rhs
        };
        holder = holder.max(ratio);

        let far_x = gaussian_vec(&mut rng, n1, 10.0);
        let far_y = gaussian_vec(&mut rng, n2, 10.0);
        b.eval_into(&far_x, &far_y, &mut b1);
        sup = sup.max(norm(&b1)).max(norm(&b2));
    }

    // Segment pairs: i.i.d. noise, constant differences, and constant
    // differences vanishing at θ = 0 (the extremal direction of a ν-average).
    let d = n1 + n2;
    let mut lipschitz = 0.0f64;
    for i in 0..n_samples {
        let base = SegmentPath::from_fn(nu.dt, nu.max_lag, d, |_| gaussian_vec(&mut rng, d, 1.0)).expect("finite");
        let v = gaussian_vec(&mut rng, d, 1.0);
        let scale = log_sep(&mut rng);
        let diff = match i % 3 {
            0 => SegmentPath::from_fn(nu.dt, nu.max_lag, d, |_| gaussian_vec(&mut rng, d, scale)).expect("finite"),
            1 => SegmentPath::constant(nu.dt, nu.max_lag, &v.iter().map(|a| a * scale).collect::<Vec<_>>()),
            _ => SegmentPath::from_fn(nu.dt, nu.max_lag, d, |theta| {
                if theta == 0.0 {
                    vec![0.0; d]
                } else {
                    v.iter().map(|a| a * scale).collect()
                }
            })
            .expect("finite"),
        };
        let other = base.add(&diff).expect("same grid");
        let mut f1 = vec![0.0; n2];
        let mut f2 = vec![0.0; n2];
        f.eval_into(&base, &mut f1);
        f.eval_into(&other, &mut f2);
        let lhs = norm(&f1.iter().zip(&f2).map(|(p, q)| p - q).collect::<Vec<_>>());
        let rhs = f.lipschitz_c * segment_norm_sq_unchecked(&diff, nu).sqrt();
        let ratio = if lhs == 0.0 {
            0.0
        } else if rhs == 0.0 {
            f64::INFINITY
        } else {
            lhs / rhs
        };
        lipschitz = lipschitz.max(ratio);
    }

    let dini = check_dini_modulus(&b.modulus);
    let dini_ok = b.modulus.k_phi == 0.0 || dini.pass;
    let pass = holder <= 1.0 + RATIO_TOL
        && lipschitz <= 1.0 + RATIO_TOL
        && sup <= b.sup_bound * (1.0 + RATIO_TOL) + 1e-15
        && dini_ok;
    ModuliReport {
        n_samples,
        holder_worst_ratio: holder,
        lipschitz_worst_ratio: lipschitz,
        sup_observed: sup,
        sup_bound: b.sup_bound,
        dini,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_reference_values() {
        let m = DiniModulus::new(1.0, 1.0, std::f64::consts::E).unwrap();
        assert_eq!(dini_phi(0.0, &m), 0.0);
        let expected = 1.0 / (std::f64::consts::E + 1.0).ln().powi(2);
        assert!((dini_phi(1.0, &m) - expected).abs() < 1e-15);
        assert!((expected - 0.5800).abs() < 5e-4);
    }

    #[test]
    fn default_modulus_is_in_the_dini_class() {
        let m = DiniModulus::from_config(&DiniConfig::default(), 1.0).unwrap();
        let r = check_dini_modulus(&m);
        assert!(r.pass, "{r:?}");
        assert!(r.dini_integral > 0.0 && r.dini_integral < 10.0);
    }
}
