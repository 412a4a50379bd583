//! Desk-scale grid solver for the regularizing fixed point
//!
//! `u(s) = ∫_s^T e^{−λ(t−s)} P⁰_{s,t}(∇^{(2)}_{b} u(t) + b) dt`
//!
//! on a box in `ℝ^{n1+n2}` with `n1 + n2 ≤ 4`. `P⁰` is the linear flow's
//! Markov semigroup, evaluated by tensor Gauss–Hermite quadrature against
//! the exact Gaussian transition law and Catmull-Rom interpolation.

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::config::{DriftConfig, ScenarioConfig, ZvonkinConfig};
use crate::drift::HolderDiniDrift;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::model::{build_model, OperatorSet};
use crate::quadrature::gauss_hermite;
use crate::sde::{ou_transition_law, GaussianLaw};

pub const MAX_DIM: usize = 4;
/// Largest law mass allowed outside the box.
pub const ESCAPE_TOL: f64 = 1e-3;
/// Slack for rounding noise in the monotonicity check of the decay table.
const MONOTONE_FLOOR: f64 = 1e-12;

/// Tensor grid on `[−w, w]^{n1+n2}` with a uniform time grid on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateGrid {
    pub n1: usize,
    pub n2: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub points: Vec<usize>,
    pub spacing: Vec<f64>,
    pub horizon: f64,
    pub time_steps: usize,
    strides: Vec<usize>,
}

impl StateGrid {
    pub fn new(n1: usize, n2: usize, half_width: f64, points: usize, horizon: f64, time_steps: usize) -> Result<Self> {
        let d = n1 + n2;
        if n1 == 0 || n2 == 0 || d > MAX_DIM {
            return Err(Error::Config(format!(
                "the grid solver needs 1 ≤ n1, n2 and n1 + n2 ≤ {MAX_DIM}, got {n1} + {n2}"
            )));
        }
        if points < 4 {
            return Err(Error::Config("at least 4 points per axis are needed".into()));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Config("grid half width must be positive".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) || time_steps == 0 {
            return Err(Error::Horizon(format!(
                "grid horizon {horizon} with {time_steps} steps"
            )));
        }
        let mut strides = vec![1; d];
        for a in (0..d.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * points;
        }
        Ok(StateGrid {
            n1,
            n2,
            lo: vec![-half_width; d],
            hi: vec![half_width; d],
            points: vec![points; d],
            spacing: vec![2.0 * half_width / (points - 1) as f64; d],
            horizon,
            time_steps,
            strides,
        })
    }

    pub fn from_config(cfg: &ZvonkinConfig, n1: usize, n2: usize) -> Result<Self> {
        Self::new(n1, n2, cfg.half_width, cfg.points_per_axis, cfg.horizon, cfg.time_steps)
    }

    pub fn dim(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn n_points(&self) -> usize {
        self.points.iter().product()
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.time_steps as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt()
    }

    pub fn coords(&self, p: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|a| self.lo[a] + ((p / self.strides[a]) % self.points[a]) as f64 * self.spacing[a])
            .collect()
    }

    /// Union bound on the law mass outside the box.
    pub fn escape_mass(&self, law: &GaussianLaw) -> f64 {
        (0..self.dim())
            .map(|a| {
                let m = law.mean[a];
                let sd = law.cov[a * law.dim + a].max(0.0).sqrt();
                if sd == 0.0 {
                    return if m < self.lo[a] || m > self.hi[a] { 1.0 } else { 0.0 };
                }
                let below = 0.5 * erfc((m - self.lo[a]) / (sd * std::f64::consts::SQRT_2));
                let above = 0.5 * erfc((self.hi[a] - m) / (sd * std::f64::consts::SQRT_2));
                below + above
            })
            .sum::<f64>()
            .min(1.0)
    }

    /// Largest escape mass of the laws started at the origin over the
    /// time grid; errors above [`ESCAPE_TOL`].
    pub fn check_bulk(&self, ops: &OperatorSet) -> Result<f64> {
        self.check_ops(ops)?;
        let origin = vec![0.0; self.dim()];
        let mut worst = 0.0f64;
        for k in 1..=self.time_steps {
            let law = ou_transition_law(ops, 0.0, self.time(k), &origin)?;
            worst = worst.max(self.escape_mass(&law));
        }
        if worst > ESCAPE_TOL {
            return Err(Error::MassEscape { mass: worst });
        }
        Ok(worst)
    }

    fn check_ops(&self, ops: &OperatorSet) -> Result<()> {
        if ops.n1() != self.n1 || ops.n2() != self.n2 {
            return Err(Error::DimensionMismatch {
                what: "grid dimension",
                expected: ops.dim(),
                got: self.dim(),
            });
        }
        Ok(())
    }

    /// Catmull-Rom weights along one axis; quadratic ghost nodes at the
    /// ends, constant extrapolation outside.
    fn axis_stencil(&self, a: usize, x: f64) -> (usize, [f64; 4]) {
        let n = self.points[a];
        let p = ((x - self.lo[a]) / self.spacing[a]).clamp(0.0, (n - 1) as f64);
        let i = (p.floor() as usize).min(n - 2);
        let t = p - i as f64;
        let (t2, t3) = (t * t, t * t * t);
        let wm = 0.5 * (-t3 + 2.0 * t2 - t);
        let w0 = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0);
        let w1 = 0.5 * (-3.0 * t3 + 4.0 * t2 + t);
        let w2 = 0.5 * (t3 - t2);
        if i == 0 {
            (0, [w0 + 3.0 * wm, w1 - 3.0 * wm, w2 + wm, 0.0])
        } else if i == n - 2 {
            (n - 4, [0.0, wm + w2, w0 - 3.0 * w2, w1 + 3.0 * w2])
        } else {
            (i - 1, [wm, w0, w1, w2])
        }
    }

    /// Tensor interpolation weights at `z` as `(point, weight)` pairs.
    fn stencil(&self, z: &[f64], out: &mut Vec<(u32, f64)>) {
        let d = self.dim();
        let axes: Vec<(usize, [f64; 4])> = (0..d).map(|a| self.axis_stencil(a, z[a])).collect();
        for combo in 0..4usize.pow(d as u32) {
            let mut idx = 0;
            let mut w = 1.0;
            let mut c = combo;
            for (a, (start, ws)) in axes.iter().enumerate() {
                let o = c % 4;
                c /= 4;
                w *= ws[o];
                idx += (start + o) * self.strides[a];
            }
            if w != 0.0 {
                out.push((idx as u32, w));
            }
        }
    }
}

/// Values of a vector field on the grid, point-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridField {
    pub comps: usize,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn sample(grid: &StateGrid, comps: usize, f: impl Fn(&[f64]) -> Vec<f64> + Sync) -> Result<Self> {
        let rows: Vec<Vec<f64>> = (0..grid.n_points())
            .into_par_iter()
            .map(|p| f(&grid.coords(p)))
            .collect();
        if let Some(r) = rows.iter().find(|r| r.len() != comps) {
            return Err(Error::DimensionMismatch {
                what: "grid field components",
                expected: comps,
                got: r.len(),
            });
        }
        Ok(GridField {
            comps,
            values: rows.concat(),
        })
    }

    pub fn at(&self, p: usize) -> &[f64] {
        &self.values[p * self.comps..(p + 1) * self.comps]
    }

    pub fn interpolate(&self, grid: &StateGrid, z: &[f64]) -> Vec<f64> {
        let mut st = Vec::new();
        grid.stencil(z, &mut st);
        let mut out = vec![0.0; self.comps];
        apply_row(&st, &self.values, self.comps, &mut out);
        out
    }
}

fn apply_row(row: &[(u32, f64)], values: &[f64], comps: usize, out: &mut [f64]) {
    out.fill(0.0);
    for &(col, w) in row {
        let v = &values[col as usize * comps..(col as usize + 1) * comps];
        for (o, x) in out.iter_mut().zip(v) {
            *o += w * x;
        }
    }
}

/// Tensor Gauss–Hermite nodes in `ℝ^d` for the standard normal.
fn hermite_nodes(d: usize, order: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if order == 0 {
        return Err(Error::Config("Gauss–Hermite order must be positive".into()));
    }
    let (x, w) = gauss_hermite(order);
    let n = order.pow(d as u32);
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for combo in 0..n {
        let mut c = combo;
        let mut node = vec![0.0; d];
        let mut wt = 1.0;
        for v in node.iter_mut() {
            *v = x[c % order];
            wt *= w[c % order];
            c /= order;
        }
        nodes.push(node);
        weights.push(wt);
    }
    Ok((nodes, weights))
}

/// Merged quadrature-and-interpolation weights of `E g(mean + L ξ)`.
fn law_stencil(grid: &StateGrid, mean: &[f64], l: &Mat, nodes: &(Vec<Vec<f64>>, Vec<f64>)) -> Vec<(u32, f64)> {
    let d = grid.dim();
    let mut raw = Vec::new();
    let mut st = Vec::new();
    let mut z = vec![0.0; d];
    for (xi, w) in nodes.0.iter().zip(&nodes.1) {
        for i in 0..d {
            z[i] = mean[i] + (0..d).map(|k| l[(i, k)] * xi[k]).sum::<f64>();
        }
        st.clear();
        grid.stencil(&z, &mut st);
        raw.extend(st.iter().map(|&(c, v)| (c, v * w)));
    }
    raw.sort_by_key(|e| e.0);
    let mut merged: Vec<(u32, f64)> = Vec::with_capacity(raw.len());
    for (c, v) in raw {
        match merged.last_mut() {
            Some(last) if last.0 == c => last.1 += v,
            _ => merged.push((c, v)),
        }
    }
    merged
}

/// `P⁰_{s,t} g (z)` by Gauss–Hermite quadrature of the given order.
pub fn p0_apply(
    ops: &OperatorSet,
    grid: &StateGrid,
    s: f64,
    t: f64,
    g: &GridField,
    z: &[f64],
    order: usize,
) -> Result<Vec<f64>> {
    grid.check_ops(ops)?;
    let law = ou_transition_law(ops, s, t, z)?;
    let mass = grid.escape_mass(&law);
    if mass > ESCAPE_TOL {
        return Err(Error::MassEscape { mass });
    }
    let l = linalg::psd_factor(&law.cov_matrix());
    let row = law_stencil(grid, &law.mean, &l, &hermite_nodes(grid.dim(), order)?);
    let mut out = vec![0.0; g.comps];
    apply_row(&row, &g.values, g.comps, &mut out);
    Ok(out)
}

/// `P⁰` over every lag of the time grid as sparse matrices on the grid.
#[derive(Debug, Clone)]
pub struct Transition {
    pub grid: StateGrid,
    pub escape_mass: f64,
    lags: Vec<Vec<Vec<(u32, f64)>>>,
}

impl Transition {
    pub fn new(ops: &OperatorSet, grid: &StateGrid, order: usize) -> Result<Self> {
        let escape_mass = grid.check_bulk(ops)?;
        let d = grid.dim();
        let nodes = hermite_nodes(d, order)?;
        let m = ops.augmented_drift();
        let mut lags = Vec::with_capacity(grid.time_steps + 1);
        for k in 0..=grid.time_steps {
            let tau = grid.time(k);
            let e = linalg::expm(&m, tau);
            let l = linalg::psd_factor(&crate::sde::transition_covariance(ops, tau));
            let rows: Vec<Vec<(u32, f64)>> = (0..grid.n_points())
                .into_par_iter()
                .map(|p| {
                    let mean = &e * Vector::from_vec(grid.coords(p));
                    law_stencil(grid, mean.as_slice(), &l, &nodes)
                })
                .collect();
            lags.push(rows);
        }
        Ok(Transition {
            grid: grid.clone(),
            escape_mass,
            lags,
        })
    }

    pub fn nnz(&self) -> usize {
        self.lags.iter().flatten().map(Vec::len).sum()
    }

    /// `P⁰` over `k` time steps applied to `g`.
    pub fn apply(&self, k: usize, g: &GridField) -> GridField {
        let comps = g.comps;
        let values = self.lags[k]
            .par_iter()
            .flat_map_iter(|row| {
                let mut out = vec![0.0; comps];
                apply_row(row, &g.values, comps, &mut out);
                out
            })
            .collect();
        GridField { comps, values }
    }
}

/// Central-difference gradient, one-sided at the faces; layout
/// `[point][comp][axis]`.
pub fn gradient(grid: &StateGrid, f: &GridField) -> GridField {
    let d = grid.dim();
    let comps = f.comps;
    let values = (0..grid.n_points())
        .into_par_iter()
        .flat_map_iter(|p| {
            let mut out = vec![0.0; comps * d];
            for a in 0..d {
                let i = (p / grid.strides[a]) % grid.points[a];
                let (lo, hi) = (
                    if i == 0 { p } else { p - grid.strides[a] },
                    if i + 1 == grid.points[a] {
                        p
                    } else {
                        p + grid.strides[a]
                    },
                );
                let span = (hi - lo) / grid.strides[a];
                let h = span as f64 * grid.spacing[a];
                for c in 0..comps {
                    out[c * d + a] = (f.at(hi)[c] - f.at(lo)[c]) / h;
                }
            }
            out
        })
        .collect();
    GridField {
        comps: comps * d,
        values,
    }
}

/// The `y`-block of [`gradient`]; layout `[point][comp][y axis]`.
fn y_gradient(grid: &StateGrid, f: &GridField) -> GridField {
    let d = grid.dim();
    let full = gradient(grid, f);
    let comps = f.comps;
    let mut values = Vec::with_capacity(grid.n_points() * comps * grid.n2);
    for p in 0..grid.n_points() {
        let row = full.at(p);
        for c in 0..comps {
            values.extend_from_slice(&row[c * d + grid.n1..(c + 1) * d]);
        }
    }
    GridField {
        comps: comps * grid.n2,
        values,
    }
}

fn sup_norm(f: &GridField) -> f64 {
    f.values
        .chunks(f.comps.max(1))
        .map(|c| linalg::norm_sq(c).sqrt())
        .fold(0.0, f64::max)
}

/// Solution of the fixed-point equation on the grid.
#[derive(Debug, Clone, Serialize)]
pub struct ULambdaField {
    pub lambda: f64,
    /// `u(s_j, ·)` for `j = 0..=time_steps`.
    #[serde(skip)]
    pub values: Vec<GridField>,
    /// `‖u‖_{T,∞}`.
    pub sup_norm: f64,
    /// `‖∇u‖_{T,∞}`.
    pub grad_norm: f64,
    /// `‖∇∇^{(2)}u‖_{T,∞}`.
    pub mixed_norm: f64,
    pub iterations: usize,
    /// Sup-norm change of each sweep.
    pub changes: Vec<f64>,
    /// Ratio of the last two changes; `< 1` once the sweep contracts.
    pub rate: f64,
}

impl ULambdaField {
    /// `(z, u(s_j, z))` rows over the grid.
    pub fn rows(&self, grid: &StateGrid, j: usize) -> Vec<Vec<f64>> {
        (0..grid.n_points())
            .map(|p| {
                let mut row = grid.coords(p);
                row.extend_from_slice(self.values[j].at(p));
                row
            })
            .collect()
    }
}

/// `β(1 − e^{−λ(T−s)})/λ`, the solution for a constant drift `β`.
pub fn constant_drift_solution(beta: f64, lambda: f64, horizon: f64, s: f64) -> f64 {
    beta * (1.0 - (-lambda * (horizon - s)).exp()) / lambda
}

/// Exponential trapezoid weights `(w0, w1)` of `∫_0^Δ e^{−λx} f(x) dx`
/// for `f` linear between its end values.
fn exp_trapezoid(lambda: f64, dt: f64) -> (f64, f64) {
    let x = lambda * dt;
    let w1 = if x < 1e-6 {
        dt * (0.5 - x / 3.0)
    } else {
        (1.0 - (-x).exp() * (1.0 + x)) / (lambda * lambda * dt)
    };
    let total = if x < 1e-8 {
        dt * (1.0 - 0.5 * x)
    } else {
        -(-x).exp_m1() / lambda
    };
    (total - w1, w1)
}

fn sample_drift(grid: &StateGrid, b: &HolderDiniDrift) -> Result<GridField> {
    if b.n1 != grid.n1 || b.n2 != grid.n2 {
        return Err(Error::DimensionMismatch {
            what: "drift dimension",
            expected: grid.dim(),
            got: b.n1 + b.n2,
        });
    }
    GridField::sample(grid, grid.n2, |z| b.eval(z))
}

fn sweep(trans: &Transition, b: &GridField, lambda: f64, u: &[GridField]) -> Vec<GridField> {
    let grid = &trans.grid;
    let n = grid.time_steps;
    let n2 = grid.n2;
    let comps = b.comps;
    let dt = grid.dt();
    let (w0, w1) = exp_trapezoid(lambda, dt);
    let g: Vec<GridField> = u
        .iter()
        .map(|um| {
            let dy = y_gradient(grid, um);
            let mut vals = b.values.clone();
            for p in 0..grid.n_points() {
                let bp = b.at(p);
                let row = dy.at(p);
                for c in 0..comps {
                    vals[p * comps + c] += (0..n2).map(|k| row[c * n2 + k] * bp[k]).sum::<f64>();
                }
            }
            GridField { comps, values: vals }
        })
        .collect();
    let mut next: Vec<GridField> = (0..=n)
        .map(|_| GridField {
            comps,
            values: vec![0.0; grid.n_points() * comps],
        })
        .collect();
    for k in 0..=n {
        let decay = (-lambda * k as f64 * dt).exp();
        let decay_prev = if k > 0 {
            (-lambda * (k - 1) as f64 * dt).exp()
        } else {
            0.0
        };
        for j in 0..n {
            let m = j + k;
            if m > n {
                break;
            }
            let mut coef = 0.0;
            if m < n {
                coef += decay * w0;
            }
            if k >= 1 {
                coef += decay_prev * w1;
            }
            if coef == 0.0 {
                continue;
            }
            let pg = trans.apply(k, &g[m]);
            for (o, v) in next[j].values.iter_mut().zip(&pg.values) {
                *o += coef * v;
            }
        }
    }
    next
}

/// Picard iteration from `u ≡ 0` until the sup-norm change drops below `tol`.
pub fn picard_solve_u(
    trans: &Transition,
    b: &HolderDiniDrift,
    lambda: f64,
    max_iters: usize,
    tol: f64,
) -> Result<ULambdaField> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!(
            "regularization rate must be positive, got {lambda}"
        )));
    }
    let grid = &trans.grid;
    let bf = sample_drift(grid, b)?;
    let mut u: Vec<GridField> = (0..=grid.time_steps)
        .map(|_| GridField {
            comps: grid.n2,
            values: vec![0.0; grid.n_points() * grid.n2],
        })
        .collect();
    let mut changes = Vec::new();
    let rate_of = |c: &[f64]| match c {
        [.., a, b] if *a > 0.0 => b / a,
        _ => 0.0,
    };
    for iter in 1..=max_iters {
        let next = sweep(trans, &bf, lambda, &u);
        let change = next
            .iter()
            .zip(&u)
            .flat_map(|(a, b)| a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        u = next;
        changes.push(change);
        if !change.is_finite() {
            break;
        }
        if change < tol {
            return Ok(finish(grid, lambda, u, iter, changes));
        }
    }
    Err(Error::NoConvergence {
        iterations: changes.len(),
        rate: rate_of(&changes),
        last_change: changes.last().copied().unwrap_or(f64::NAN),
    })
}

fn finish(grid: &StateGrid, lambda: f64, values: Vec<GridField>, iterations: usize, changes: Vec<f64>) -> ULambdaField {
    let mut sup = 0.0f64;
    let mut grad = 0.0f64;
    let mut mixed = 0.0f64;
    for u in &values {
        sup = sup.max(sup_norm(u));
        grad = grad.max(sup_norm(&gradient(grid, u)));
        mixed = mixed.max(sup_norm(&gradient(grid, &y_gradient(grid, u))));
    }
    let rate = match changes.as_slice() {
        [.., a, b] if *a > 0.0 => b / a,
        _ => 0.0,
    };
    ULambdaField {
        lambda,
        values,
        sup_norm: sup,
        grad_norm: grad,
        mixed_norm: mixed,
        iterations,
        changes,
        rate,
    }
}

/// Sup-norm distance to the constant-drift closed form.
pub fn constant_drift_error(grid: &StateGrid, field: &ULambdaField, beta: &[f64]) -> f64 {
    let mut err = 0.0f64;
    for (j, u) in field.values.iter().enumerate() {
        let s = grid.time(j);
        for p in 0..grid.n_points() {
            for (c, bc) in beta.iter().enumerate() {
                let exact = constant_drift_solution(*bc, field.lambda, grid.horizon, s);
                err = err.max((u.at(p)[c] - exact).abs());
            }
        }
    }
    err
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayRow {
    pub lambda: f64,
    pub sup_norm: f64,
    pub grad_norm: f64,
    pub mixed_norm: f64,
    pub iterations: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayTable {
    pub rows: Vec<DecayRow>,
    pub threshold: f64,
    pub monotone: bool,
    pub below_threshold: bool,
    /// Smallest listed `λ` whose Picard sweeps contracted.
    pub first_contraction: Option<f64>,
    pub pass: bool,
}

pub fn verify_ulambda_decay(
    trans: &Transition,
    b: &HolderDiniDrift,
    lambdas: &[f64],
    max_iters: usize,
    tol: f64,
    threshold: f64,
) -> Result<DecayTable> {
    Ok(decay_table(&solve_decay(trans, b, lambdas, max_iters, tol)?, threshold))
}

/// One solved field per rate; `lambdas` must be increasing.
pub fn solve_decay(
    trans: &Transition,
    b: &HolderDiniDrift,
    lambdas: &[f64],
    max_iters: usize,
    tol: f64,
) -> Result<Vec<ULambdaField>> {
    if lambdas.is_empty() || lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("decay lambdas must be non-empty and increasing".into()));
    }
    lambdas
        .iter()
        .map(|&lambda| picard_solve_u(trans, b, lambda, max_iters, tol))
        .collect()
}

pub fn decay_table(fields: &[ULambdaField], threshold: f64) -> DecayTable {
    let rows: Vec<DecayRow> = fields
        .iter()
        .map(|f| DecayRow {
            lambda: f.lambda,
            sup_norm: f.sup_norm,
            grad_norm: f.grad_norm,
            mixed_norm: f.mixed_norm,
            iterations: f.iterations,
            rate: f.rate,
        })
        .collect();
    let cols = |r: &DecayRow| [r.sup_norm, r.grad_norm, r.mixed_norm];
    let monotone = rows.windows(2).all(|w| {
        cols(&w[1])
            .iter()
            .zip(cols(&w[0]))
            .all(|(b, a)| *b <= a + MONOTONE_FLOOR)
    });
    let below_threshold = rows.last().is_some_and(|r| cols(r).iter().all(|v| *v <= threshold));
    let first_contraction = rows.iter().find(|r| r.rate < 1.0).map(|r| r.lambda);
    DecayTable {
        pass: monotone && below_threshold,
        rows,
        threshold,
        monotone,
        below_threshold,
        first_contraction,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstantCheck {
    pub beta: Vec<f64>,
    pub lambda: f64,
    pub error: f64,
    pub tol: f64,
    pub iterations: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ZvonkinOutcome {
    pub grid: StateGrid,
    pub escape_mass: f64,
    pub nnz: usize,
    pub constant: ConstantCheck,
    pub decay: DecayTable,
    #[serde(skip)]
    pub fields: Vec<ULambdaField>,
    pub pass: bool,
}

pub const CONSTANT_TOL: f64 = 1e-3;

/// Closed-form constant-drift check plus the decay table for the
/// configured drift.
pub fn run_zvonkin(cfg: &ScenarioConfig) -> Result<ZvonkinOutcome> {
    let zc = &cfg.experiment.zvonkin;
    let ops = build_model(cfg)?;
    let grid = StateGrid::from_config(zc, ops.n1(), ops.n2())?;
    let trans = Transition::new(&ops, &grid, zc.hermite_order)?;
    let beta = vec![zc.constant_level; grid.n2];
    let flat = HolderDiniDrift::from_config(&DriftConfig::Constant { value: beta.clone() }, grid.n1, grid.n2)?;
    let cf = picard_solve_u(&trans, &flat, zc.constant_lambda, zc.max_iters, zc.tol)?;
    let error = constant_drift_error(&grid, &cf, &beta);
    let constant = ConstantCheck {
        beta,
        lambda: zc.constant_lambda,
        error,
        tol: CONSTANT_TOL,
        iterations: cf.iterations,
        pass: error <= CONSTANT_TOL,
    };
    let b = HolderDiniDrift::from_config(&cfg.coefficients.drift, grid.n1, grid.n2)?;
    let fields = solve_decay(&trans, &b, &zc.lambdas, zc.max_iters, zc.tol)?;
    let decay = decay_table(&fields, zc.threshold);
    Ok(ZvonkinOutcome {
        pass: constant.pass && decay.pass,
        escape_mass: trans.escape_mass,
        nnz: trans.nnz(),
        grid,
        constant,
        decay,
        fields,
    })
}
