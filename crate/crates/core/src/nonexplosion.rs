//! Pathwise check of the Bihari–LaSalle a-priori bound
//! `sup_{[0,t]} |Ỹ|² ≤ Ψ⁻¹(Ψ(α) + t)` with `Ỹ = Y − M`, `M` the
//! stochastic convolution of the `Y` block.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::config::{BihariConfig, GrowthConfig, HFamily, PhiFamily};
use crate::delay::{DelayMeasure, SegmentPath, SegmentView};
use crate::drift::{HolderDiniDrift, SegmentFunctional};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::quadrature::integrate;
use crate::rng::{map_paths, path_rng, Purpose};
use crate::scenario::{initial_segment, Scenario};

const PSI_REL_TOL: f64 = 1e-13;
const INVERSE_TOL: f64 = 1e-10;
const CHECK_TOL: f64 = 1e-9;
/// Floor keeping the derived `h` strictly positive.
pub const H_FLOOR: f64 = 1e-6;

/// `(Φ, h)` of the growth condition; both time-independent here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthPair {
    pub phi: PhiFamily,
    pub h: HFamily,
}

impl GrowthPair {
    pub fn from_config(cfg: &GrowthConfig) -> Result<Self> {
        let c_phi = match cfg.phi {
            PhiFamily::Constant { c } | PhiFamily::Affine { c } | PhiFamily::LogAffine { c } => c,
        };
        if !(c_phi > 0.0 && c_phi.is_finite()) {
            return Err(Error::Config(format!("growth constant must be positive, got {c_phi}")));
        }
        let ok = match cfg.h {
            HFamily::Constant { c } => c > 0.0,
            HFamily::Quadratic { a, b } => a > 0.0 && b >= 0.0,
        };
        if !ok {
            return Err(Error::Config("h must be positive and increasing".into()));
        }
        Ok(GrowthPair { phi: cfg.phi, h: cfg.h })
    }

    /// The affine pair admitted by a bounded `b` and a Lipschitz `F`
    /// with `F(0) = 0`, by Cauchy–Schwarz and Young.
    pub fn derived(b: &HolderDiniDrift, f: &SegmentFunctional) -> Self {
        let l = f.lipschitz_c;
        GrowthPair {
            phi: PhiFamily::Affine {
                c: (0.5 * b.sup_bound * b.sup_bound).max(0.5 * (1.0 + 4.0 * l)),
            },
            h: HFamily::Quadratic { a: H_FLOOR, b: 0.5 * l },
        }
    }

    pub fn phi(&self, s: f64) -> f64 {
        match self.phi {
            PhiFamily::Constant { c } => c,
            PhiFamily::Affine { c } => c * (1.0 + s),
            PhiFamily::LogAffine { c } => c * (1.0 + s) * (std::f64::consts::E + s).ln(),
        }
    }

    pub fn h(&self, s: f64) -> f64 {
        match self.h {
            HFamily::Constant { c } => c,
            HFamily::Quadratic { a, b } => a + b * s * s,
        }
    }

    /// `∫₁^∞ ds/Φ(s) = ∞`; holds analytically for every family offered.
    pub fn divergent(&self) -> bool {
        true
    }

    /// `Ψ(s) = ∫₁ˢ dv / (2Φ(N + Nv))` by quadrature, for `s ≥ 0`.
    pub fn psi(&self, n: f64, s: f64) -> Result<f64> {
        if !(s >= 0.0) || !(n > 1.0) {
            return Err(Error::Domain(format!("Ψ needs s ≥ 0 and N > 1, got s = {s}, N = {n}")));
        }
        let f = |v: f64| 0.5 / self.phi(n + n * v);
        Ok(if s >= 1.0 {
            integrate(|w| w.exp() * f(w.exp()), 0.0, s.ln(), PSI_REL_TOL)
        } else {
            -integrate(f, s, 1.0, PSI_REL_TOL)
        })
    }

    /// Closed form of [`GrowthPair::psi`] where one exists.
    pub fn psi_closed_form(&self, n: f64, s: f64) -> Option<f64> {
        match self.phi {
            PhiFamily::Constant { c } => Some((s - 1.0) / (2.0 * c)),
            PhiFamily::Affine { c } => Some(((1.0 + n + n * s) / (1.0 + 2.0 * n)).ln() / (2.0 * c * n)),
            PhiFamily::LogAffine { .. } => None,
        }
    }

    /// `Ψ⁻¹(v)` by bisection; values below `Ψ(0)` map to `0`.
    pub fn psi_inv(&self, n: f64, v: f64) -> Result<f64> {
        if v <= self.psi(n, 0.0)? {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (0.0, 2.0);
        while self.psi(n, hi)? < v {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return Ok(f64::INFINITY);
            }
        }
        while hi - lo > INVERSE_TOL * lo.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if self.psi(n, mid)? < v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthCheck {
    pub n_samples: usize,
    /// `max ⟨F + b, η(0)⟩ / (Φ(‖ξ‖² + ‖η‖²) + h(‖η′‖))`.
    pub worst_ratio: f64,
    pub pass: bool,
}

/// Sampling check of the growth condition over random segment triples
/// `(ξ, η, η′)` with magnitudes spread over four decades.
pub fn check_growth(
    pair: &GrowthPair,
    b: &HolderDiniDrift,
    f: &SegmentFunctional,
    nu: &DelayMeasure,
    n_samples: usize,
    seed: u64,
) -> GrowthCheck {
    let (n1, n2) = (b.n1, b.n2);
    let d = n1 + n2;
    let max_lag = nu.max_lag;
    let mut rng = path_rng(seed, Purpose::Checks, 1);
    let mut worst = f64::NEG_INFINITY;
    let mut bv = vec![0.0; n2];
    let mut fv = vec![0.0; n2];
    for i in 0..n_samples.max(1) {
        let block = |n: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
            let scale = 10f64.powf(rng.random_range(-2.0..=2.0));
            let base: Vec<f64> = (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
            let mut out = Vec::with_capacity((max_lag + 1) * n);
            for _ in 0..=max_lag {
                if i % 2 == 0 {
                    out.extend_from_slice(&base);
                } else {
                    out.extend((0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)));
                }
            }
            out
        };
        let xi = block(n1, &mut rng);
        let mut eta = block(n2, &mut rng);
        let eta_p = block(n2, &mut rng);
        if i % 5 == 0 {
            // η aligned with the drift direction, the worst case for ⟨b, η(0)⟩
            b.eval_into(&xi[..n1], &eta[..n2], &mut bv);
            let nb = linalg::norm_sq(&bv).sqrt();
            if nb > 0.0 {
                let s = linalg::norm_sq(&eta[..n2]).sqrt() / nb;
                for l in 0..=max_lag {
                    for k in 0..n2 {
                        eta[l * n2 + k] = s * bv[k];
                    }
                }
            }
        }
        let mut full = Vec::with_capacity((max_lag + 1) * d);
        for l in 0..=max_lag {
            full.extend_from_slice(&xi[l * n1..(l + 1) * n1]);
            full.extend((0..n2).map(|k| eta[l * n2 + k] + eta_p[l * n2 + k]));
        }
        let seg = SegmentPath {
            dt: nu.dt,
            max_lag,
            dim: d,
            values: full,
            interpolation: "grid",
        };
        let z0 = seg.lag(0);
        b.eval_into(&z0[..n1], &z0[n1..], &mut bv);
        f.eval_into(&seg, &mut fv);
        let lhs: f64 = (0..n2).map(|k| (bv[k] + fv[k]) * eta[k]).sum();
        let sq = |v: &[f64], n: usize| -> f64 {
            let mut acc = linalg::norm_sq(&v[..n]);
            for (&l, &w) in nu.lags.iter().zip(&nu.weights) {
                acc += w * linalg::norm_sq(&v[l * n..(l + 1) * n]);
            }
            acc
        };
        let rhs = pair.phi(sq(&xi, n1) + sq(&eta, n2)) + pair.h(sq(&eta_p, n2).sqrt());
        worst = worst.max(lhs / rhs);
    }
    GrowthCheck {
        n_samples: n_samples.max(1),
        worst_ratio: worst,
        pass: worst <= 1.0 + CHECK_TOL,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BihariPath {
    pub path: usize,
    /// `|Y(0)|² + 2∫₀ᵀ h(‖M_s‖_ν) ds`.
    pub alpha: f64,
    /// The realized domination constant `N`.
    pub n_const: f64,
    /// `sup_{[0,T]} |Ỹ|²`.
    pub sup_ytilde_sq: f64,
    pub bound_at_horizon: f64,
    pub pass: bool,
    pub first_violation: Option<f64>,
    /// Outcome with `α` scaled by the falsification factor.
    pub falsified_pass: bool,
    /// `(t, sup_{[0,t]} |Ỹ|², Ψ⁻¹(Ψ(α) + t))` at the curve stride.
    #[serde(skip)]
    pub curve: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BihariReport {
    pub growth: GrowthPair,
    pub condition: GrowthCheck,
    pub falsify_factor: f64,
    pub paths: Vec<BihariPath>,
    pub passed: usize,
    pub falsified_failures: usize,
    pub pass: bool,
}

/// Per-path data of one simulated trajectory.
struct PathTrace {
    times: Vec<f64>,
    sup: Vec<f64>,
    alpha: f64,
    n_const: f64,
}

fn trace_path(
    sc: &Scenario,
    pair: &GrowthPair,
    xi0: &SegmentPath,
    e2: &Mat,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<PathTrace> {
    let (n1, n2) = (sc.ops.n1(), sc.ops.n2());
    let nu = &sc.nu;
    let n = sc.grid.n_steps;
    let dt = sc.grid.dt;
    let mut m_hist = vec![0.0; (n + 1) * n2];
    let y0 = &xi0.lag(0)[n1..];
    let mut sup = Vec::with_capacity(n + 1);
    let mut h_vals = Vec::with_capacity(n + 1);
    let mut ratio = 0.0f64;
    // ‖·‖²_ν of X and of Ỹ at grid index k; the history before 0 is ξ with M = 0
    let mut observe =
        |k: usize, seg: &dyn Fn(usize) -> Vec<f64>, m_hist: &[f64], sup: &mut Vec<f64>, h_vals: &mut Vec<f64>| {
            let m_at = |j: isize| -> &[f64] {
                if j < 0 {
                    &[]
                } else {
                    &m_hist[j as usize * n2..(j as usize + 1) * n2]
                }
            };
            let ytilde_sq_at = |l: usize| -> (f64, f64) {
                let z = seg(l);
                let m = m_at(k as isize - l as isize);
                let x_sq = linalg::norm_sq(&z[..n1]);
                let y_sq: f64 = (0..n2)
                    .map(|i| (z[n1 + i] - m.get(i).copied().unwrap_or(0.0)).powi(2))
                    .sum();
                (x_sq, y_sq)
            };
            let (x0, y0sq) = ytilde_sq_at(0);
            let (mut xs, mut ys) = (x0, y0sq);
            let mut ms = linalg::norm_sq(m_at(k as isize));
            for (&l, &w) in nu.lags.iter().zip(&nu.weights) {
                let (x, y) = ytilde_sq_at(l);
                xs += w * x;
                ys += w * y;
                let mj = m_at(k as isize - l as isize);
                ms += w * linalg::norm_sq(mj);
            }
            let s = sup.last().copied().unwrap_or(0.0f64).max(y0sq);
            sup.push(s);
            h_vals.push(pair.h(ms.sqrt()));
            ratio = ratio.max((xs + ys) / (1.0 + s));
        };
    observe(0, &|l| xi0.lag(l).to_vec(), &m_hist, &mut sup, &mut h_vals);
    sc.engine
        .run_mild(&sc.drift, &sc.functional, xi0, n, rng, |k, hist, noise| {
            let (prev, cur) = m_hist.split_at_mut(k * n2);
            let prev = &prev[(k - 1) * n2..];
            for i in 0..n2 {
                let mut acc = noise.xi[n1 + i];
                for j in 0..n2 {
                    acc += e2[(i, j)] * prev[j];
                }
                cur[i] = acc;
            }
            observe(k, &|l| hist.lag(l).to_vec(), &m_hist, &mut sup, &mut h_vals);
        })?;
    let integral = dt * (h_vals.iter().sum::<f64>() - 0.5 * (h_vals[0] + h_vals[n]));
    Ok(PathTrace {
        times: (0..=n).map(|k| k as f64 * dt).collect(),
        sup,
        alpha: linalg::norm_sq(y0) + 2.0 * integral,
        n_const: 1.0 + ratio.max(1.0),
    })
}

/// First grid time where `Ψ(sup|Ỹ|²) > Ψ(α) + t`.
fn violation(pair: &GrowthPair, n: f64, alpha: f64, tr: &PathTrace) -> Result<Option<f64>> {
    let base = pair.psi(n, alpha)?;
    let mut last = (f64::NAN, f64::NAN);
    for (t, s) in tr.times.iter().zip(&tr.sup) {
        let psi_s = if *s == last.0 { last.1 } else { pair.psi(n, *s)? };
        last = (*s, psi_s);
        if psi_s > base + t + CHECK_TOL * (1.0 + base.abs()) {
            return Ok(Some(*t));
        }
    }
    Ok(None)
}

/// Simulates `n_paths` trajectories from `xi0`, forms `Ỹ = Y − M` and
/// checks the bound at every grid time, plus the halved-`α` control.
pub fn bihari_bound_check(
    sc: &Scenario,
    pair: &GrowthPair,
    xi0: &SegmentPath,
    cfg: &BihariConfig,
    seed: u64,
) -> Result<BihariReport> {
    let condition = check_growth(pair, &sc.drift, &sc.functional, &sc.nu, cfg.check_samples, seed);
    if !condition.pass {
        return Err(Error::ConditionUnsatisfied(format!(
            "sampled ⟨F + b, η(0)⟩ exceeds Φ + h by a factor {:.4}",
            condition.worst_ratio
        )));
    }
    if !(cfg.falsify_factor > 0.0) {
        return Err(Error::Config("falsification factor must be positive".into()));
    }
    let e2 = sc.engine.e2();
    let stride = (sc.grid.n_steps / 100).max(1);
    let results = map_paths(cfg.n_paths, seed, Purpose::Reference, |i, rng| -> Result<BihariPath> {
        let tr = trace_path(sc, pair, xi0, &e2, rng)?;
        let n = tr.n_const;
        let first_violation = violation(pair, n, tr.alpha, &tr)?;
        let falsified = violation(pair, n, cfg.falsify_factor * tr.alpha, &tr)?;
        let base = pair.psi(n, tr.alpha)?;
        let mut curve = Vec::new();
        for k in (0..tr.times.len()).step_by(stride) {
            curve.push((tr.times[k], tr.sup[k], pair.psi_inv(n, base + tr.times[k])?));
        }
        let horizon = *tr.times.last().unwrap_or(&0.0);
        Ok(BihariPath {
            path: i,
            alpha: tr.alpha,
            n_const: n,
            sup_ytilde_sq: *tr.sup.last().unwrap_or(&0.0),
            bound_at_horizon: pair.psi_inv(n, base + horizon)?,
            pass: first_violation.is_none(),
            first_violation,
            falsified_pass: falsified.is_none(),
            curve,
        })
    });
    let paths = results.into_iter().collect::<Result<Vec<_>>>()?;
    let passed = paths.iter().filter(|p| p.pass).count();
    let falsified_failures = paths.iter().filter(|p| !p.falsified_pass).count();
    Ok(BihariReport {
        growth: *pair,
        condition,
        falsify_factor: cfg.falsify_factor,
        pass: passed == paths.len() && falsified_failures >= 1,
        passed,
        falsified_failures,
        paths,
    })
}

/// The configured experiment: growth pair from the config or derived from
/// the coefficients, started from the constant segment at `initial_level`.
pub fn run_bihari(sc: &Scenario) -> Result<BihariReport> {
    let cfg = &sc.config.experiment.bihari;
    let pair = match &cfg.growth {
        Some(g) => GrowthPair::from_config(g)?,
        None => GrowthPair::derived(&sc.drift, &sc.functional),
    };
    let level = crate::config::InitialConfig {
        level: cfg.initial_level,
        ..Default::default()
    };
    let xi0 = initial_segment(&level, sc.ops.n1(), sc.ops.n2(), sc.grid.dt, sc.grid.max_lag)?;
    bihari_bound_check(sc, &pair, &xi0, cfg, sc.grid.seed)
}
