use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::grid::SimGrid;
use super::law::transition_covariance;
use crate::delay::{SegmentPath, SegmentView};
use crate::drift::{HolderDiniDrift, SegmentFunctional};
use crate::error::{Error, Result};
use crate::linalg::{self, matvec, matvec_add, Mat};
use crate::model::OperatorSet;

/// Per-step matrices for a fixed `dt`, stored row-major.
///
/// The exact one-step noise of the linear flow is `ξ = D ΔW/dt + L_res h`
/// with `D = ∫₀^dt e^{Mv} G dv` and `L_res L_res* = C(dt) − DD*/dt`, so the
/// mild scheme and the exact sampler share `ΔW` and `ξ_Y`.
#[derive(Debug, Clone)]
pub struct Engine {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub dt: f64,
    sqrt_dt: f64,
    e1: Vec<f64>,
    p1b: Vec<f64>,
    e2: Vec<f64>,
    p2: Vec<f64>,
    p2_inv: Vec<f64>,
    e_m: Vec<f64>,
    d_hat: Vec<f64>,
    l_res: Vec<f64>,
    q_pinv: Vec<f64>,
}

/// One step's worth of shared noise.
#[derive(Debug, Clone)]
pub struct StepNoise {
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    /// `ΔW = √dt · g`.
    pub dw: Vec<f64>,
    /// Exact linear-flow noise; its `Y` block drives the mild scheme.
    pub xi: Vec<f64>,
}

impl StepNoise {
    pub fn new(n3: usize, d: usize) -> Self {
        StepNoise {
            g: vec![0.0; n3],
            h: vec![0.0; d],
            dw: vec![0.0; n3],
            xi: vec![0.0; d],
        }
    }
}

impl Engine {
    pub fn new(ops: &OperatorSet, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::GridMismatch(format!("dt = {dt} must be positive")));
        }
        let (n1, n2, n3) = (ops.n1(), ops.n2(), ops.n3());
        let d = n1 + n2;
        let e1 = linalg::expm(&ops.a1, dt);
        let p1b = linalg::phi1(&ops.a1, dt) * dt * &ops.b;
        let e2 = linalg::expm(&ops.a2, dt);
        let p2 = linalg::phi1(&ops.a2, dt) * dt;
        let p2_inv = p2
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Domain("Φ₁(A₂, dt) is singular".into()))?;
        let m = ops.augmented_drift();
        let g = ops.augmented_noise();
        let e_m = linalg::expm(&m, dt);
        let d_mat = linalg::phi1(&m, dt) * dt * &g;
        let c = transition_covariance(ops, dt);
        let res = &c - &d_mat * d_mat.transpose() / dt;
        let l_res = linalg::psd_factor(&((&res + res.transpose()) * 0.5));
        let d_hat: Mat = &d_mat / dt.sqrt();
        debug_assert_eq!(l_res.shape(), (d, d));
        Ok(Engine {
            n1,
            n2,
            n3,
            dt,
            sqrt_dt: dt.sqrt(),
            e1: linalg::to_row_major(&e1),
            p1b: linalg::to_row_major(&p1b),
            e2: linalg::to_row_major(&e2),
            p2: linalg::to_row_major(&p2),
            p2_inv: linalg::to_row_major(&p2_inv),
            e_m: linalg::to_row_major(&e_m),
            d_hat: linalg::to_row_major(&d_hat),
            l_res: linalg::to_row_major(&l_res),
            q_pinv: linalg::to_row_major(&ops.q_pinv),
        })
    }

    pub fn dim(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn noise_buffer(&self) -> StepNoise {
        StepNoise::new(self.n3, self.dim())
    }

    /// Draws `g ~ N(0, I_{n3})` then `h ~ N(0, I_d)`, in that order.
    #[inline]
    pub fn draw(&self, rng: &mut ChaCha8Rng, noise: &mut StepNoise) {
        for v in noise.g.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for v in noise.h.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let d = self.dim();
        for (w, g) in noise.dw.iter_mut().zip(&noise.g) {
            *w = self.sqrt_dt * g;
        }
        matvec(&self.d_hat, d, self.n3, &noise.g, &mut noise.xi);
        matvec_add(&self.l_res, d, d, &noise.h, &mut noise.xi);
    }

    /// Exponential-Euler step: `x' = e^{A₁dt}x + Φ₁(A₁)dt·B y`,
    /// `y' = e^{A₂dt}y + Φ₁(A₂)dt·drive + ξ_Y`.
    #[inline]
    pub fn mild_step(&self, z: &[f64], drive: &[f64], xi: &[f64], out: &mut [f64]) {
        let (n1, n2) = (self.n1, self.n2);
        let (x, y) = z.split_at(n1);
        let (ox, oy) = out.split_at_mut(n1);
        matvec(&self.e1, n1, n1, x, ox);
        matvec_add(&self.p1b, n1, n2, y, ox);
        matvec(&self.e2, n2, n2, y, oy);
        matvec_add(&self.p2, n2, n2, drive, oy);
        for (o, v) in oy.iter_mut().zip(&xi[n1..]) {
            *o += v;
        }
    }

    /// Exact step of the linear flow: `z' = e^{M dt} z + ξ`.
    #[inline]
    pub fn exact_step(&self, z: &[f64], xi: &[f64], out: &mut [f64]) {
        let d = self.dim();
        out.copy_from_slice(xi);
        matvec_add(&self.e_m, d, d, z, out);
    }

    /// `out = (Φ₁(A₂, dt)dt)⁻¹ v`, the drift that moves `y` by `v` in one step.
    pub fn p2_inv_apply(&self, v: &[f64], out: &mut [f64]) {
        matvec(&self.p2_inv, self.n2, self.n2, v, out);
    }

    pub fn q_pinv_apply(&self, v: &[f64], out: &mut [f64]) {
        matvec(&self.q_pinv, self.n3, self.n2, v, out);
    }

    pub fn e1(&self) -> Mat {
        Mat::from_row_slice(self.n1, self.n1, &self.e1)
    }

    pub fn p1b(&self) -> Mat {
        Mat::from_row_slice(self.n1, self.n2, &self.p1b)
    }

    pub fn e2(&self) -> Mat {
        Mat::from_row_slice(self.n2, self.n2, &self.e2)
    }

    pub(crate) fn check_coefficients(&self, b: &HolderDiniDrift, f: &SegmentFunctional) -> Result<()> {
        for (what, expected, got) in [
            ("drift n1", self.n1, b.n1),
            ("drift n2", self.n2, b.n2),
            ("functional n1", self.n1, f.n1),
            ("functional n2", self.n2, f.n2),
        ] {
            if expected != got {
                return Err(Error::DimensionMismatch { what, expected, got });
            }
        }
        Ok(())
    }

    pub(crate) fn check_segment(&self, xi0: &SegmentPath, f: &SegmentFunctional) -> Result<()> {
        if xi0.dim != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "initial segment",
                expected: self.dim(),
                got: xi0.dim,
            });
        }
        if (xi0.dt - self.dt).abs() > 1e-12 * self.dt {
            return Err(Error::GridMismatch(format!(
                "segment dt {} vs step {}",
                xi0.dt, self.dt
            )));
        }
        if xi0.max_lag < f.max_lag() {
            return Err(Error::GridMismatch(format!(
                "segment covers {} lags, F needs {}",
                xi0.max_lag,
                f.max_lag()
            )));
        }
        Ok(())
    }

    /// Drift evaluated on a history: `b(Z(t)) + F(Z_t)`.
    #[inline]
    pub(crate) fn drive(
        &self,
        b: &HolderDiniDrift,
        f: &SegmentFunctional,
        hist: &History,
        scratch: &mut [f64],
        out: &mut [f64],
    ) {
        let z = hist.lag(0);
        b.eval_into(&z[..self.n1], &z[self.n1..], out);
        if !f.is_zero() {
            f.eval_into(hist, scratch);
            for (o, v) in out.iter_mut().zip(scratch.iter()) {
                *o += v;
            }
        }
    }

    /// Mild scheme from `xi0` for `n_steps`; `on_step(k, hist, noise)` sees the
    /// history after step `k` together with the noise that produced it.
    pub fn run_mild(
        &self,
        b: &HolderDiniDrift,
        f: &SegmentFunctional,
        xi0: &SegmentPath,
        n_steps: usize,
        rng: &mut ChaCha8Rng,
        mut on_step: impl FnMut(usize, &History, &StepNoise),
    ) -> Result<History> {
        self.check_coefficients(b, f)?;
        self.check_segment(xi0, f)?;
        let d = self.dim();
        let mut hist = History::from_segment(xi0);
        let mut noise = self.noise_buffer();
        let mut drive = vec![0.0; self.n2];
        let mut scratch = vec![0.0; self.n2];
        let mut next = vec![0.0; d];
        for k in 0..n_steps {
            self.draw(rng, &mut noise);
            self.drive(b, f, &hist, &mut scratch, &mut drive);
            self.mild_step(hist.lag(0), &drive, &noise.xi, &mut next);
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { step: k + 1 });
            }
            hist.push(&next);
            on_step(k + 1, &hist, &noise);
        }
        Ok(hist)
    }

    /// Exact linear flow from the point `z0`, drawing noise exactly as
    /// [`Engine::run_mild`] does.
    pub fn run_exact(
        &self,
        z0: &[f64],
        n_steps: usize,
        rng: &mut ChaCha8Rng,
        mut on_step: impl FnMut(usize, &[f64]),
    ) -> Result<Vec<f64>> {
        let d = self.dim();
        if z0.len() != d {
            return Err(Error::DimensionMismatch {
                what: "start point",
                expected: d,
                got: z0.len(),
            });
        }
        let mut z = z0.to_vec();
        let mut next = vec![0.0; d];
        let mut noise = self.noise_buffer();
        for k in 0..n_steps {
            self.draw(rng, &mut noise);
            self.exact_step(&z, &noise.xi, &mut next);
            std::mem::swap(&mut z, &mut next);
            on_step(k + 1, &z);
        }
        Ok(z)
    }
}

/// Ring buffer of the last `max_lag + 1` states, readable as a segment.
#[derive(Debug, Clone)]
pub struct History {
    dt: f64,
    dim: usize,
    cap: usize,
    head: usize,
    data: Vec<f64>,
}

impl History {
    pub fn from_segment(seg: &SegmentPath) -> Self {
        History {
            dt: seg.dt,
            dim: seg.dim,
            cap: seg.max_lag + 1,
            head: 0,
            data: seg.values.clone(),
        }
    }

    /// Makes `z` the new lag-0 state.
    #[inline]
    pub fn push(&mut self, z: &[f64]) {
        self.head = (self.head + self.cap - 1) % self.cap;
        let i = self.head * self.dim;
        self.data[i..i + self.dim].copy_from_slice(z);
    }

    #[inline]
    pub fn current(&self) -> &[f64] {
        self.lag(0)
    }

    pub fn to_segment(&self) -> SegmentPath {
        SegmentPath::from_view(self)
    }
}

impl SegmentView for History {
    fn dim(&self) -> usize {
        self.dim
    }
    fn dt(&self) -> f64 {
        self.dt
    }
    fn max_lag(&self) -> usize {
        self.cap - 1
    }
    #[inline]
    fn lag(&self, lag: usize) -> &[f64] {
        debug_assert!(lag < self.cap);
        let i = ((self.head + lag) % self.cap) * self.dim;
        &self.data[i..i + self.dim]
    }
}

/// A full recorded path on `[0, T]` plus its initial segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub dim: usize,
    pub n_steps: usize,
    pub initial: SegmentPath,
    /// Row `k` holds `Z(k·dt)`.
    pub states: Vec<f64>,
    /// Row `k` holds `W((k+1)dt) − W(k·dt)`, when recorded.
    pub increments: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.state(self.n_steps)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| k as f64 * self.dt).collect()
    }
}

/// The segment `Z_t(θ) = Z(t + θ)` for a grid time `t`.
pub fn extract_segment(traj: &Trajectory, t: f64) -> Result<SegmentPath> {
    let k = (t / traj.dt).round();
    if (t / traj.dt - k).abs() > 1e-9 * k.max(1.0) || k < 0.0 || k as usize > traj.n_steps {
        return Err(Error::OffGrid { t });
    }
    let k = k as usize;
    let r = traj.initial.max_lag;
    let mut values = Vec::with_capacity((r + 1) * traj.dim);
    for l in 0..=r {
        if l <= k {
            values.extend_from_slice(traj.state(k - l));
        } else {
            values.extend_from_slice(traj.initial.lag(l - k));
        }
    }
    Ok(SegmentPath {
        dt: traj.dt,
        max_lag: r,
        dim: traj.dim,
        values,
        interpolation: "grid",
    })
}

/// Mild scheme on `grid` from the segment `xi0`, recording every state.
pub fn integrate_mild(
    ops: &OperatorSet,
    b: &HolderDiniDrift,
    f: &SegmentFunctional,
    xi0: &SegmentPath,
    grid: &SimGrid,
    rng: &mut ChaCha8Rng,
) -> Result<Trajectory> {
    let engine = Engine::new(ops, grid.dt)?;
    let d = engine.dim();
    let mut states = Vec::with_capacity((grid.n_steps + 1) * d);
    states.extend_from_slice(xi0.lag(0));
    let mut increments = Vec::with_capacity(grid.n_steps * engine.n3);
    engine.run_mild(b, f, xi0, grid.n_steps, rng, |_, h, noise| {
        states.extend_from_slice(h.current());
        increments.extend_from_slice(&noise.dw);
    })?;
    Ok(Trajectory {
        dt: grid.dt,
        dim: d,
        n_steps: grid.n_steps,
        initial: xi0.clone(),
        states,
        increments: Some(increments),
    })
}

/// Exact samples of the linear flow on `grid`, sharing noise with
/// [`integrate_mild`] under the same RNG state.
pub fn sample_linear_flow(ops: &OperatorSet, z0: &[f64], grid: &SimGrid, rng: &mut ChaCha8Rng) -> Result<Trajectory> {
    let engine = Engine::new(ops, grid.dt)?;
    let d = engine.dim();
    let mut states = Vec::with_capacity((grid.n_steps + 1) * d);
    states.extend_from_slice(z0);
    engine.run_exact(z0, grid.n_steps, rng, |_, z| states.extend_from_slice(z))?;
    Ok(Trajectory {
        dt: grid.dt,
        dim: d,
        n_steps: grid.n_steps,
        initial: SegmentPath::constant(grid.dt, grid.max_lag, z0),
        states,
        increments: None,
    })
}
