use serde::Serialize;

use crate::delay::{SegmentPath, SegmentView};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::model::{weighted_gramian, GramianKind, OperatorSet};
use crate::quadrature::{integrate_mat, DEFAULT_REL_TOL};

fn col(v: &[f64]) -> Vector {
    Vector::from_column_slice(v)
}

#[derive(Debug, Clone, PartialEq)]
struct Operators {
    a0: Mat,
    a1: Mat,
    a2: Mat,
    b: Mat,
}

impl Operators {
    fn of(ops: &OperatorSet) -> Self {
        Operators {
            a0: ops.a0.clone(),
            a1: ops.a1.clone(),
            a2: ops.a2.clone(),
            b: ops.b.clone(),
        }
    }

    /// `B* e^{A₀* t} v`.
    fn control(&self, t: f64, v: &Vector) -> Vector {
        self.b.transpose() * (linalg::expm(&self.a0.transpose(), t) * v)
    }

    /// `∫ₐᵇ e^{(t−u)A₁} B Γ₂(u) du` for a continuous `Γ₂`.
    fn convolve(&self, t: f64, a: f64, b: f64, gamma2: &dyn Fn(f64) -> Vector) -> Vector {
        let m = integrate_mat(
            |u| {
                let v = &self.b * gamma2(u);
                Mat::from_column_slice(v.len(), 1, (linalg::expm(&self.a1, t - u) * v).as_slice())
            },
            a,
            b,
            DEFAULT_REL_TOL,
        );
        Vector::from_column_slice(m.as_slice())
    }
}

/// Coupling that starts at `ξ + h` and merges with the reference path by
/// time `T − r`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarnackPlan {
    pub horizon: f64,
    pub r: f64,
    /// `h` on the segment grid.
    pub h: SegmentPath,
    pub e: Vector,
    /// `Λ̄_{T−r}`.
    pub gramian: Mat,
    /// `|Λ̄ e + (h₁(0) + ∫ …)|`.
    pub e_residual: f64,
    n1: usize,
    ops: Operators,
}

pub fn build_harnack_plan(ops: &OperatorSet, horizon: f64, r: f64, h: &SegmentPath) -> Result<HarnackPlan> {
    if !(r >= 0.0 && horizon > r) {
        return Err(Error::Horizon(format!("need T > r ≥ 0, got T = {horizon}, r = {r}")));
    }
    let (n1, n2) = (ops.n1(), ops.n2());
    if h.dim != n1 + n2 {
        return Err(Error::DimensionMismatch {
            what: "shift h",
            expected: n1 + n2,
            got: h.dim,
        });
    }
    let s0 = horizon - r;
    let gramian = weighted_gramian(ops, GramianKind::Harnack, s0)?;
    let h0 = h.lag(0);
    let (h1, h2) = (col(&h0[..n1]), col(&h0[n1..]));
    let bh2 = &ops.b * &h2;
    let drift = integrate_mat(
        |u| {
            let v = linalg::expm(&ops.a0, u) * &bh2 * ((s0 - u) / s0);
            Mat::from_column_slice(n1, 1, v.as_slice())
        },
        0.0,
        s0,
        DEFAULT_REL_TOL,
    );
    let rhs = &h1 + Vector::from_column_slice(drift.as_slice());
    let e = -gramian.clone().lu().solve(&rhs).ok_or(Error::SingularGramian {
        condition_number: f64::INFINITY,
    })?;
    let e_residual = (&gramian * &e + &rhs).norm();
    Ok(HarnackPlan {
        horizon,
        r,
        h: h.clone(),
        e,
        gramian,
        e_residual,
        n1,
        ops: Operators::of(ops),
    })
}

impl HarnackPlan {
    fn merge_time(&self) -> f64 {
        self.horizon - self.r
    }

    fn h1(&self) -> Vector {
        col(&self.h.lag(0)[..self.n1])
    }

    fn h2(&self) -> Vector {
        col(&self.h.lag(0)[self.n1..])
    }

    /// `γ(t) = t(T−r−t)⁺ B* e^{A₀*t} e`.
    pub fn gamma(&self, t: f64) -> Vector {
        let s0 = self.merge_time();
        let w = t * (s0 - t).max(0.0);
        self.ops.control(t, &self.e) * w
    }

    /// Analytic derivative of `γ`.
    pub fn gamma_prime(&self, t: f64) -> Vector {
        let s0 = self.merge_time();
        if t >= s0 {
            return Vector::zeros(self.ops.b.ncols());
        }
        let d = self.ops.control(t, &self.e) * (s0 - 2.0 * t);
        let a0e = self.ops.a0.transpose() * &self.e;
        d + self.ops.control(t, &a0e) * (t * (s0 - t))
    }

    /// `(T−r−t)⁺/(T−r) h₂(0) + γ(t)`, so that `Γ₂(t) = e^{A₂t} g(t)` for `t > 0`.
    pub fn g(&self, t: f64) -> Vector {
        let s0 = self.merge_time();
        self.h2() * ((s0 - t).max(0.0) / s0) + self.gamma(t)
    }

    pub fn gamma2(&self, t: f64) -> Vector {
        if t <= 0.0 {
            return col(&self.h.lag(lag_of(t, self.h.dt))[self.n1..]);
        }
        linalg::expm(&self.ops.a2, t) * self.g(t)
    }

    pub fn gamma1(&self, t: f64) -> Vector {
        if t <= 0.0 {
            return col(&self.h.lag(lag_of(t, self.h.dt))[..self.n1]);
        }
        let s0 = self.merge_time();
        let g2 = |u: f64| self.gamma2(u.max(1e-300));
        let mut v = linalg::expm(&self.ops.a1, t) * self.h1();
        v += self.ops.convolve(t, 0.0, t.min(s0), &g2);
        if t > s0 {
            v += self.ops.convolve(t, s0, t, &g2);
        }
        v
    }

    pub fn gamma_at(&self, t: f64) -> Vector {
        let (g1, g2) = (self.gamma1(t), self.gamma2(t));
        Vector::from_iterator(g1.len() + g2.len(), g1.iter().chain(g2.iter()).copied())
    }

    /// `max(|Γ(T − r)|, |Γ(T)|)`; the segment `Γ_T` vanishes iff both do.
    pub fn terminal_residual(&self) -> f64 {
        self.gamma_at(self.merge_time())
            .norm()
            .max(self.gamma_at(self.horizon).norm())
    }
}

fn lag_of(t: f64, dt: f64) -> usize {
    (-t / dt).round() as usize
}

/// Coupling without delay that starts at the same point and ends shifted
/// by `η(T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftPlan {
    pub horizon: f64,
    pub eta: Vec<f64>,
    pub e_tilde: Vector,
    /// `Λ̃_T`.
    pub gramian: Mat,
    n1: usize,
    ops: Operators,
}

pub fn build_shift_plan(ops: &OperatorSet, horizon: f64, eta: &[f64]) -> Result<ShiftPlan> {
    if !(horizon > 0.0) {
        return Err(Error::Horizon(format!("shift plan needs T > 0, got {horizon}")));
    }
    let (n1, n2) = (ops.n1(), ops.n2());
    if eta.len() != n1 + n2 {
        return Err(Error::DimensionMismatch {
            what: "shift η",
            expected: n1 + n2,
            got: eta.len(),
        });
    }
    let gramian = weighted_gramian(ops, GramianKind::Shift, horizon)?;
    let (eta1, eta2) = (col(&eta[..n1]), col(&eta[n1..]));
    let neg_a1 = -&ops.a1;
    let first = linalg::phi1(&neg_a1, horizon) * horizon * &eta1;
    let second = integrate_mat(
        |u| {
            let eta2u = linalg::phi1(&ops.a2, u) * u * &eta2;
            let v = linalg::expm(&neg_a1, u) * (&ops.b * eta2u);
            Mat::from_column_slice(n1, 1, v.as_slice())
        },
        0.0,
        horizon,
        DEFAULT_REL_TOL,
    );
    let rhs = first - Vector::from_column_slice(second.as_slice());
    let e_tilde = gramian.clone().lu().solve(&rhs).ok_or(Error::SingularGramian {
        condition_number: f64::INFINITY,
    })?;
    Ok(ShiftPlan {
        horizon,
        eta: eta.to_vec(),
        e_tilde,
        gramian,
        n1,
        ops: Operators::of(ops),
    })
}

impl ShiftPlan {
    /// `η(t) = (tΦ₁(A₁,t)η₁, tΦ₁(A₂,t)η₂)`.
    pub fn eta_path(&self, t: f64) -> Vector {
        let n1 = self.n1;
        let a = linalg::phi1(&self.ops.a1, t) * col(&self.eta[..n1]) * t;
        let b = linalg::phi1(&self.ops.a2, t) * col(&self.eta[n1..]) * t;
        Vector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
    }

    fn eta2_path(&self, t: f64) -> Vector {
        linalg::phi1(&self.ops.a2, t) * col(&self.eta[self.n1..]) * t
    }

    /// `γ̃(t) = t(T−t) B* e^{A₀*t} ẽ`.
    pub fn gamma(&self, t: f64) -> Vector {
        self.ops.control(t, &self.e_tilde) * (t * (self.horizon - t))
    }

    pub fn gamma_prime(&self, t: f64) -> Vector {
        let d = self.ops.control(t, &self.e_tilde) * (self.horizon - 2.0 * t);
        let a0e = self.ops.a0.transpose() * &self.e_tilde;
        d + self.ops.control(t, &a0e) * (t * (self.horizon - t))
    }

    pub fn gamma2(&self, t: f64) -> Vector {
        if t <= 0.0 {
            return Vector::zeros(self.eta.len() - self.n1);
        }
        self.eta2_path(t) + linalg::expm(&self.ops.a2, t) * self.gamma(t)
    }

    pub fn gamma1(&self, t: f64) -> Vector {
        if t <= 0.0 {
            return Vector::zeros(self.n1);
        }
        self.ops.convolve(t, 0.0, t, &|u| self.gamma2(u))
    }

    pub fn gamma_at(&self, t: f64) -> Vector {
        let (g1, g2) = (self.gamma1(t), self.gamma2(t));
        Vector::from_iterator(g1.len() + g2.len(), g1.iter().chain(g2.iter()).copied())
    }

    /// `|Γ̃(T) − η(T)|`.
    pub fn terminal_residual(&self) -> f64 {
        (self.gamma_at(self.horizon) - self.eta_path(self.horizon)).norm()
    }

    /// Drift forcing `η₂ + e^{A₂t} γ̃′(t)`.
    pub fn forcing_rate(&self, t: f64) -> Vector {
        col(&self.eta[self.n1..]) + linalg::expm(&self.ops.a2, t) * self.gamma_prime(t)
    }
}

/// Either coupling.
#[derive(Debug, Clone, PartialEq)]
pub enum CouplingPlan {
    Harnack(HarnackPlan),
    Shift(ShiftPlan),
}

impl From<HarnackPlan> for CouplingPlan {
    fn from(p: HarnackPlan) -> Self {
        CouplingPlan::Harnack(p)
    }
}

impl From<ShiftPlan> for CouplingPlan {
    fn from(p: ShiftPlan) -> Self {
        CouplingPlan::Shift(p)
    }
}

impl CouplingPlan {
    pub fn horizon(&self) -> f64 {
        match self {
            CouplingPlan::Harnack(p) => p.horizon,
            CouplingPlan::Shift(p) => p.horizon,
        }
    }

    pub fn gamma_at(&self, t: f64) -> Vector {
        match self {
            CouplingPlan::Harnack(p) => p.gamma_at(t),
            CouplingPlan::Shift(p) => p.gamma_at(t),
        }
    }

    pub fn terminal_residual(&self) -> f64 {
        match self {
            CouplingPlan::Harnack(p) => p.terminal_residual(),
            CouplingPlan::Shift(p) => p.terminal_residual(),
        }
    }

    /// Change of `Y`-block over `[t_k, t_{k+1}]` that is not explained by
    /// `e^{A₂dt}`: `Γ₂(t_{k+1}) − e^{A₂dt}Γ₂(t_k)`, in closed form.
    fn forcing(&self, t0: f64, t1: f64) -> Vector {
        match self {
            CouplingPlan::Harnack(p) => linalg::expm(&p.ops.a2, t1) * (p.g(t1) - p.g(t0)),
            CouplingPlan::Shift(p) => p.eta2_path(t1 - t0) + linalg::expm(&p.ops.a2, t1) * (p.gamma(t1) - p.gamma(t0)),
        }
    }

    fn initial_shift(&self, dt: f64, max_lag: usize, dim: usize) -> Result<SegmentPath> {
        match self {
            CouplingPlan::Harnack(p) => {
                if (p.h.dt - dt).abs() > 1e-12 * dt || p.h.max_lag != max_lag {
                    return Err(Error::PlanMismatch(format!(
                        "h lives on (dt {}, {} lags), simulation on (dt {dt}, {max_lag} lags)",
                        p.h.dt, p.h.max_lag
                    )));
                }
                Ok(p.h.clone())
            }
            CouplingPlan::Shift(_) => {
                if max_lag != 0 {
                    return Err(Error::PlanMismatch("the shift coupling needs r = 0".into()));
                }
                Ok(SegmentPath::constant(dt, 0, &vec![0.0; dim]))
            }
        }
    }
}

/// A plan laid out on a simulation grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanTable {
    pub dt: f64,
    pub n_steps: usize,
    pub n1: usize,
    pub n2: usize,
    /// `Γ` on `[−r, 0]`.
    pub initial: SegmentPath,
    /// Row `k`: `Γ₂(t_{k+1}) − e^{A₂dt}Γ₂(t_k)`.
    pub forcing: Vec<f64>,
    /// Row `k`: `(Φ₁(A₂,dt)dt)⁻¹` applied to the forcing row.
    pub forcing_drift: Vec<f64>,
    /// Row `k`: the grid recursion of `Γ` that the coupled scheme realizes exactly.
    pub gamma_discrete: Vec<f64>,
    /// Row `k`: the continuous-time `Γ(t_k)`.
    pub gamma_exact: Vec<f64>,
}

impl PlanTable {
    pub fn new(plan: &CouplingPlan, engine: &crate::sde::Engine, max_lag: usize) -> Result<Self> {
        let dt = engine.dt;
        let horizon = plan.horizon();
        let n_steps = crate::delay::steps_of(horizon, dt, "T").map_err(|e| Error::PlanMismatch(e.to_string()))?;
        let (n1, n2) = (engine.n1, engine.n2);
        let d = n1 + n2;
        let initial = plan.initial_shift(dt, max_lag, d)?;
        let mut forcing = Vec::with_capacity(n_steps * n2);
        let mut forcing_drift = vec![0.0; n_steps * n2];
        for k in 0..n_steps {
            let f = plan.forcing(k as f64 * dt, (k + 1) as f64 * dt);
            forcing.extend_from_slice(f.as_slice());
        }
        for k in 0..n_steps {
            engine.p2_inv_apply(&forcing[k * n2..(k + 1) * n2], &mut forcing_drift[k * n2..(k + 1) * n2]);
        }
        let (e1, p1b, e2) = (engine.e1(), engine.p1b(), engine.e2());
        let mut gamma_discrete = Vec::with_capacity((n_steps + 1) * d);
        let mut g1 = col(&initial.lag(0)[..n1]);
        let mut g2 = col(&initial.lag(0)[n1..]);
        gamma_discrete.extend(g1.iter().chain(g2.iter()));
        for k in 0..n_steps {
            let next1 = &e1 * &g1 + &p1b * &g2;
            let next2 = &e2 * &g2 + col(&forcing[k * n2..(k + 1) * n2]);
            g1 = next1;
            g2 = next2;
            gamma_discrete.extend(g1.iter().chain(g2.iter()));
        }
        let gamma_exact = exact_tabulation(plan, dt, n_steps);
        Ok(PlanTable {
            dt,
            n_steps,
            n1,
            n2,
            initial,
            forcing,
            forcing_drift,
            gamma_discrete,
            gamma_exact,
        })
    }

    pub fn dim(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn forcing_row(&self, k: usize) -> &[f64] {
        &self.forcing[k * self.n2..(k + 1) * self.n2]
    }

    pub fn forcing_drift_row(&self, k: usize) -> &[f64] {
        &self.forcing_drift[k * self.n2..(k + 1) * self.n2]
    }

    pub fn gamma_discrete_row(&self, k: usize) -> &[f64] {
        &self.gamma_discrete[k * self.dim()..(k + 1) * self.dim()]
    }

    pub fn gamma_exact_row(&self, k: usize) -> &[f64] {
        &self.gamma_exact[k * self.dim()..(k + 1) * self.dim()]
    }

    /// Largest gap between the grid recursion and the continuous `Γ`.
    pub fn discretization_gap(&self) -> f64 {
        (0..=self.n_steps)
            .map(|k| {
                self.gamma_discrete_row(k)
                    .iter()
                    .zip(self.gamma_exact_row(k))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_trivial(&self) -> bool {
        self.initial.values.iter().all(|v| *v == 0.0) && self.forcing.iter().all(|v| *v == 0.0)
    }

    /// CSV rows `t, Γ_exact…, Γ_discrete…`.
    pub fn to_csv_rows(&self) -> Vec<Vec<f64>> {
        (0..=self.n_steps)
            .map(|k| {
                let mut row = vec![k as f64 * self.dt];
                row.extend_from_slice(self.gamma_exact_row(k));
                row.extend_from_slice(self.gamma_discrete_row(k));
                row
            })
            .collect()
    }
}

/// Continuous `Γ` on the grid: `Γ₂` in closed form, `Γ₁` by stepping the
/// exact variation-of-constants formula one cell at a time.
fn exact_tabulation(plan: &CouplingPlan, dt: f64, n_steps: usize) -> Vec<f64> {
    let ops = match plan {
        CouplingPlan::Harnack(p) => &p.ops,
        CouplingPlan::Shift(p) => &p.ops,
    };
    let n1 = ops.a1.nrows();
    let d = n1 + ops.a2.nrows();
    let gamma2 = |t: f64| match plan {
        CouplingPlan::Harnack(p) => p.gamma2(t.max(1e-300)),
        CouplingPlan::Shift(p) => p.gamma2(t),
    };
    let kink = match plan {
        CouplingPlan::Harnack(p) => Some(p.merge_time()),
        CouplingPlan::Shift(_) => None,
    };
    let e1 = linalg::expm(&ops.a1, dt);
    let g0 = plan.gamma_at(0.0);
    let mut g1 = Vector::from_column_slice(&g0.as_slice()[..n1]);
    let mut out = Vec::with_capacity((n_steps + 1) * d);
    out.extend_from_slice(g0.as_slice());
    for k in 0..n_steps {
        let (t0, t1) = (k as f64 * dt, (k + 1) as f64 * dt);
        let mut next = &e1 * &g1;
        match kink {
            Some(s) if t0 < s && s < t1 => {
                next += ops.convolve(t1, t0, s, &gamma2);
                next += ops.convolve(t1, s, t1, &gamma2);
            }
            _ => next += ops.convolve(t1, t0, t1, &gamma2),
        }
        g1 = next;
        out.extend_from_slice(g1.as_slice());
        out.extend_from_slice(gamma2(t1).as_slice());
    }
    out
}
