use serde::Serialize;

use crate::delay::{segment_norm, DelayMeasure, SegmentPath, SegmentView};
use crate::drift::{DiniModulus, HolderDiniDrift, SegmentFunctional};
use crate::error::{Error, Result};
use crate::linalg::norm_sq;
use crate::model::OperatorSet;

/// Inputs of the explicit bounds. `c` is the single unnamed constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    pub c: f64,
    pub k_holder: f64,
    pub alpha: f64,
    pub modulus: DiniModulus,
    pub lipschitz: f64,
}

impl BoundConstants {
    pub fn from_coefficients(c: f64, b: &HolderDiniDrift, f: &SegmentFunctional) -> Self {
        BoundConstants {
            c,
            k_holder: b.k_holder,
            alpha: b.alpha,
            modulus: b.modulus,
            lipschitz: f.lipschitz_c,
        }
    }

    pub fn with_c(self, c: f64) -> Self {
        BoundConstants { c, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    Sigma,
    Beta,
}

#[derive(Debug, Clone, Copy)]
pub enum BoundArgument<'a> {
    /// Initial-segment shift `h` with the measure defining `‖h‖_ν`.
    Segment { h: &'a SegmentPath, nu: &'a DelayMeasure },
    /// Target shift `η ∈ H`.
    Point(&'a [f64]),
}

/// The four terms, in display order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundTerms {
    pub forcing: f64,
    pub holder: f64,
    pub dini: f64,
    pub lipschitz: f64,
}

impl BoundTerms {
    pub fn total(&self) -> f64 {
        self.forcing + self.holder + self.dini + self.lipschitz
    }
}

fn norm(v: &[f64]) -> f64 {
    norm_sq(v).sqrt()
}

/// Terms of `Σ(T, h, r)`:
/// `C(T−r)(|h₂(0)|/(T−r) + ‖B‖|h(0)|)²`, `CT K²(|h₁(0)| + ‖B‖|h(0)|)^{2α}`,
/// `CT φ²(C(|h₂(0)| + ‖B‖|h(0)|))` and `CT c_F²(‖h‖_ν + ‖B‖|h(0)|)²`.
pub fn sigma_terms(
    ops: &OperatorSet,
    horizon: f64,
    h: &SegmentPath,
    r: f64,
    nu: &DelayMeasure,
    k: &BoundConstants,
) -> Result<BoundTerms> {
    if !(horizon > r) {
        return Err(Error::Horizon(format!("Σ needs T > r, got T = {horizon}, r = {r}")));
    }
    let n1 = ops.n1();
    let h0 = h.lag(0);
    let (a1, a2, a) = (norm(&h0[..n1]), norm(&h0[n1..]), norm(h0));
    let bn = ops.b_norm;
    let hn = segment_norm(h, nu)?;
    let c = k.c;
    let s = horizon - r;
    Ok(BoundTerms {
        forcing: c * s * (a2 / s + bn * a).powi(2),
        holder: c * horizon * k.k_holder.powi(2) * (a1 + bn * a).powf(2.0 * k.alpha),
        dini: c * horizon * k.modulus.phi(c * (a2 + bn * a)).powi(2),
        lipschitz: c * horizon * k.lipschitz.powi(2) * (hn + bn * a).powi(2),
    })
}

pub fn sigma_bound(
    ops: &OperatorSet,
    horizon: f64,
    h: &SegmentPath,
    r: f64,
    nu: &DelayMeasure,
    k: &BoundConstants,
) -> Result<f64> {
    Ok(sigma_terms(ops, horizon, h, r, nu, k)?.total())
}

/// Terms of `β(T, η)`, with `u = T|η₂| + T²‖B‖|η|` and `v = T²|η₂| + T³‖B‖|η|`:
/// `CT‖B‖^{2α}K² v^{2α}`, `CT φ²(C u)`, `CT c_F²(u² + ‖B‖²v²)` and
/// `CT(|η₂| + ‖B‖|η|)²`.
pub fn beta_terms(ops: &OperatorSet, horizon: f64, eta: &[f64], k: &BoundConstants) -> BoundTerms {
    let n1 = ops.n1();
    let (e2, e) = (norm(&eta[n1..]), norm(eta));
    let bn = ops.b_norm;
    let t = horizon;
    let c = k.c;
    let u = t * e2 + t * t * bn * e;
    let v = t * t * e2 + t.powi(3) * bn * e;
    BoundTerms {
        forcing: c * t * (e2 + bn * e).powi(2),
        holder: c * t * bn.powf(2.0 * k.alpha) * k.k_holder.powi(2) * v.powf(2.0 * k.alpha),
        dini: c * t * k.modulus.phi(c * u).powi(2),
        lipschitz: c * t * k.lipschitz.powi(2) * (u * u + (bn * v).powi(2)),
    }
}

pub fn beta_bound(ops: &OperatorSet, horizon: f64, eta: &[f64], k: &BoundConstants) -> f64 {
    beta_terms(ops, horizon, eta, k).total()
}

pub fn explicit_bound(
    kind: BoundKind,
    ops: &OperatorSet,
    horizon: f64,
    r: f64,
    arg: BoundArgument<'_>,
    k: &BoundConstants,
) -> Result<f64> {
    match (kind, arg) {
        (BoundKind::Sigma, BoundArgument::Segment { h, nu }) => sigma_bound(ops, horizon, h, r, nu, k),
        (BoundKind::Beta, BoundArgument::Point(eta)) => Ok(beta_bound(ops, horizon, eta, k)),
        _ => Err(Error::Domain("Σ takes a segment shift, β a point shift".into())),
    }
}

/// Smallest constant per cell and their maximum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub cells: Vec<(String, f64, f64)>,
    pub c: f64,
}

/// Smallest `C` with `bound(C) ≥ target`, for a bound increasing in `C`.
pub fn calibrate_constant(target: f64, bound: impl Fn(f64) -> f64) -> Result<f64> {
    if !(target > 0.0) {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1e-6f64);
    while bound(hi) < target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e15 {
            return Err(Error::NoConvergence {
                iterations: 70,
                rate: f64::NAN,
                last_change: bound(hi),
            });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bound(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(hi)
}

impl Calibration {
    pub fn from_cells(cells: Vec<(String, f64, f64)>) -> Self {
        let c = cells.iter().map(|c| c.2).fold(0.0, f64::max);
        Calibration { cells, c }
    }
}
