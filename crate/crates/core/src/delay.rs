//! The delay measure ν on `[−r, 0]`, segment paths and the segment norm.
//!
//! Everything is indexed by integer lag `ℓ`, meaning `θ = −ℓ·dt`.

use serde::Serialize;

use crate::config::{DelayConfig, DelayFamily};
use crate::error::{Error, Result};

/// Snaps `x / dt` to an integer, failing when it is not one.
pub fn steps_of(x: f64, dt: f64, what: &str) -> Result<usize> {
    let k = x / dt;
    let r = k.round();
    if r < 0.0 || (k - r).abs() > 1e-9 * r.max(1.0) {
        return Err(Error::GridMismatch(format!(
            "{what} = {x} is not a multiple of dt = {dt}"
        )));
    }
    Ok(r as usize)
}

/// The domination function κ in `ν(· − t) ≤ κ(t) ν(·)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Kappa {
    Constant {
        value: f64,
    },
    /// `max(1, e^{−rate·t})`.
    Exponential {
        rate: f64,
    },
}

impl Kappa {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Kappa::Constant { value } => value,
            Kappa::Exponential { rate } => (-rate * t).exp().max(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayMeasure {
    pub r: f64,
    pub dt: f64,
    pub max_lag: usize,
    /// Quadrature nodes as lags, with their masses.
    pub lags: Vec<usize>,
    pub weights: Vec<f64>,
    pub kappa: Kappa,
    /// Exact `ν([−r, 0))`.
    pub total_mass: f64,
    /// Mass of each grid cell `[−(ℓ+1)dt, −ℓ dt)` (atoms sit at lag ℓ).
    lattice: Vec<f64>,
}

impl DelayMeasure {
    pub fn from_config(cfg: &DelayConfig, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::GridMismatch(format!("dt = {dt} must be positive")));
        }
        if !(cfg.r >= 0.0) {
            return Err(Error::Config(format!(
                "delay horizon r = {} must be non-negative",
                cfg.r
            )));
        }
        let max_lag = steps_of(cfg.r, dt, "r")?;
        let density = |rate: f64| {
            move |a: f64, b: f64| {
                if rate == 0.0 {
                    b - a
                } else {
                    ((rate * b).exp() - (rate * a).exp()) / rate
                }
            }
        };
        match &cfg.family {
            DelayFamily::None => {
                if max_lag != 0 {
                    return Err(Error::Config("delay family `none` requires r = 0".into()));
                }
                Ok(Self::degenerate(dt))
            }
            DelayFamily::Lebesgue | DelayFamily::Exponential { .. } => {
                if max_lag == 0 {
                    return Err(Error::Config("an absolutely continuous ν needs r > 0".into()));
                }
                let rate = match cfg.family {
                    DelayFamily::Exponential { rate } => rate,
                    _ => 0.0,
                };
                let mass = density(rate);
                if cfg.cells == 0 || max_lag % cfg.cells != 0 || (max_lag / cfg.cells) % 2 != 0 {
                    return Err(Error::GridMismatch(format!(
                        "{} cells on r/dt = {max_lag} steps do not put midpoints on the grid",
                        cfg.cells
                    )));
                }
                let width = max_lag / cfg.cells;
                let mut lags = Vec::with_capacity(cfg.cells);
                let mut weights = Vec::with_capacity(cfg.cells);
                for j in 0..cfg.cells {
                    let lo = -(((j + 1) * width) as f64) * dt;
                    let hi = -((j * width) as f64) * dt;
                    lags.push(j * width + width / 2);
                    weights.push(mass(lo, hi));
                }
                let mut lattice: Vec<f64> = (0..max_lag)
                    .map(|l| {
                        if rate == 0.0 {
                            dt
                        } else {
                            mass(-((l + 1) as f64) * dt, -(l as f64) * dt)
                        }
                    })
                    .collect();
                lattice.push(0.0);
                let kappa = if rate == 0.0 {
                    Kappa::Constant { value: 1.0 }
                } else {
                    Kappa::Exponential { rate }
                };
                Ok(DelayMeasure {
                    r: cfg.r,
                    dt,
                    max_lag,
                    lags,
                    weights,
                    kappa,
                    total_mass: mass(-cfg.r, 0.0),
                    lattice,
                })
            }
            DelayFamily::Atoms {
                positions,
                masses,
                kappa,
            } => {
                if positions.len() != masses.len() || positions.is_empty() {
                    return Err(Error::Config(
                        "atoms need matching, non-empty positions and masses".into(),
                    ));
                }
                let mut lattice = vec![0.0; max_lag + 1];
                let mut lags = Vec::new();
                for (&p, &m) in positions.iter().zip(masses) {
                    if !(p < 0.0 && p >= -cfg.r - 1e-12) || m < 0.0 {
                        return Err(Error::Config(format!(
                            "atom ({p}, {m}) must sit in [-r, 0) with mass >= 0"
                        )));
                    }
                    let l = steps_of(-p, dt, "atom position")?;
                    lags.push(l);
                    lattice[l] += m;
                }
                Ok(DelayMeasure {
                    r: cfg.r,
                    dt,
                    max_lag,
                    lags,
                    weights: masses.clone(),
                    kappa: Kappa::Constant { value: *kappa },
                    total_mass: masses.iter().sum(),
                    lattice,
                })
            }
        }
    }

    /// `supp ν = {0}`: one node at lag 0 with zero weight.
    pub fn degenerate(dt: f64) -> Self {
        DelayMeasure {
            r: 0.0,
            dt,
            max_lag: 0,
            lags: vec![0],
            weights: vec![0.0],
            kappa: Kappa::Constant { value: 1.0 },
            total_mass: 0.0,
            lattice: vec![0.0],
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.max_lag == 0
    }

    /// Node positions `θ_j`.
    pub fn nodes(&self) -> Vec<f64> {
        self.lags.iter().map(|&l| -(l as f64) * self.dt).collect()
    }

    pub fn quadrature_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Grid-cell masses of the discretized measure.
    pub fn lattice(&self) -> &[f64] {
        &self.lattice
    }
}

/// Read access to a segment by lag.
pub trait SegmentView {
    fn dim(&self) -> usize;
    fn dt(&self) -> f64;
    fn max_lag(&self) -> usize;
    /// State at `θ = −lag · dt`.
    fn lag(&self, lag: usize) -> &[f64];
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentPath {
    pub dt: f64,
    pub max_lag: usize,
    pub dim: usize,
    /// Row `ℓ` holds `z(−ℓ·dt)`.
    pub values: Vec<f64>,
    pub interpolation: &'static str,
}

impl SegmentPath {
    pub fn from_fn(dt: f64, max_lag: usize, dim: usize, mut f: impl FnMut(f64) -> Vec<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity((max_lag + 1) * dim);
        for l in 0..=max_lag {
            let z = f(-(l as f64) * dt);
            if z.len() != dim {
                return Err(Error::DimensionMismatch {
                    what: "segment value",
                    expected: dim,
                    got: z.len(),
                });
            }
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain("segment values must be finite".into()));
            }
            values.extend_from_slice(&z);
        }
        Ok(SegmentPath {
            dt,
            max_lag,
            dim,
            values,
            interpolation: "grid",
        })
    }

    pub fn constant(dt: f64, max_lag: usize, z: &[f64]) -> Self {
        let mut values = Vec::with_capacity((max_lag + 1) * z.len());
        for _ in 0..=max_lag {
            values.extend_from_slice(z);
        }
        SegmentPath {
            dt,
            max_lag,
            dim: z.len(),
            values,
            interpolation: "grid",
        }
    }

    pub fn from_view(v: &impl SegmentView) -> Self {
        let mut values = Vec::with_capacity((v.max_lag() + 1) * v.dim());
        for l in 0..=v.max_lag() {
            values.extend_from_slice(v.lag(l));
        }
        SegmentPath {
            dt: v.dt(),
            max_lag: v.max_lag(),
            dim: v.dim(),
            values,
            interpolation: "grid",
        }
    }

    /// Grid times `θ`, from `0` down to `−r`.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.max_lag).map(|l| -(l as f64) * self.dt).collect()
    }

    pub fn add(&self, other: &SegmentPath) -> Result<SegmentPath> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &SegmentPath) -> Result<SegmentPath> {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &SegmentPath, sign: f64) -> Result<SegmentPath> {
        if self.max_lag != other.max_lag || self.dim != other.dim || self.dt != other.dt {
            return Err(Error::GridMismatch("segments live on different grids".into()));
        }
        Ok(SegmentPath {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + sign * b)
                .collect(),
            ..self.clone()
        })
    }
}

impl SegmentView for SegmentPath {
    fn dim(&self) -> usize {
        self.dim
    }
    fn dt(&self) -> f64 {
        self.dt
    }
    fn max_lag(&self) -> usize {
        self.max_lag
    }
    fn lag(&self, lag: usize) -> &[f64] {
        &self.values[lag * self.dim..(lag + 1) * self.dim]
    }
}

fn check_grid(xi: &impl SegmentView, nu: &DelayMeasure) -> Result<()> {
    if (xi.dt() - nu.dt).abs() > 1e-15 * nu.dt {
        return Err(Error::GridMismatch(format!(
            "segment dt {} vs measure dt {}",
            xi.dt(),
            nu.dt
        )));
    }
    let need = nu.lags.iter().copied().max().unwrap_or(0);
    if xi.max_lag() < need {
        return Err(Error::GridMismatch(format!(
            "segment covers {} lags, measure needs {need}",
            xi.max_lag()
        )));
    }
    Ok(())
}

/// `Σ_j w_j |ξ(θ_j)|² + |ξ(0)|²` without the grid check.
pub(crate) fn segment_norm_sq_unchecked(xi: &impl SegmentView, nu: &DelayMeasure) -> f64 {
    let sq = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
    let mut acc = sq(xi.lag(0));
    for (&l, &w) in nu.lags.iter().zip(&nu.weights) {
        acc += w * sq(xi.lag(l));
    }
    acc
}

/// `‖ξ‖_ν = √(Σ_j w_j |ξ(θ_j)|² + |ξ(0)|²)`.
pub fn segment_norm(xi: &impl SegmentView, nu: &DelayMeasure) -> Result<f64> {
    check_grid(xi, nu)?;
    Ok(segment_norm_sq_unchecked(xi, nu).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominationRow {
    pub t: f64,
    pub kappa: f64,
    /// Largest `ν(A − t) / ν(A)` over grid cells `A`; infinite when a
    /// shifted cell carries mass where ν has none.
    pub worst_ratio: f64,
    /// Lag of the target cell attaining the worst ratio.
    pub worst_lag: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominationReport {
    pub rows: Vec<DominationRow>,
    pub pass: bool,
}

/// Checks `ν(· − t) ≤ κ(t) ν(·)` cell by cell on the grid lattice.
pub fn check_measure_domination(nu: &DelayMeasure, t_grid: &[f64]) -> DominationReport {
    let lat = nu.lattice();
    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let kappa = nu.kappa.eval(t);
        let s = match steps_of(t, nu.dt, "t") {
            Ok(s) if s > 0 => s,
            _ => {
                rows.push(DominationRow {
                    t,
                    kappa,
                    worst_ratio: f64::NAN,
                    worst_lag: 0,
                    pass: false,
                });
                continue;
            }
        };
        let mut worst = 0.0f64;
        let mut worst_lag = 0;
        for (l, &target) in lat.iter().enumerate() {
            let source = lat.get(l + s).copied().unwrap_or(0.0);
            let ratio = if source == 0.0 {
                0.0
            } else if target == 0.0 {
                f64::INFINITY
            } else {
                source / target
            };
            if ratio > worst {
                worst = ratio;
                worst_lag = l;
            }
        }
        rows.push(DominationRow {
            t,
            kappa,
            worst_ratio: worst,
            worst_lag,
            pass: worst <= kappa * (1.0 + 1e-9),
        });
    }
    let pass = rows.iter().all(|r| r.pass);
    DominationReport { rows, pass }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lebesgue(r: f64, dt: f64, cells: usize) -> DelayMeasure {
        DelayMeasure::from_config(
            &DelayConfig {
                r,
                family: DelayFamily::Lebesgue,
                cells,
            },
            dt,
        )
        .unwrap()
    }

    #[test]
    fn constant_segment_norm() {
        let nu = lebesgue(1.0, 1e-3, 25);
        let xi = SegmentPath::constant(1e-3, 1000, &[1.0, 0.0]);
        assert!((segment_norm(&xi, &nu).unwrap() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_measure_reduces_to_point_norm() {
        let nu = DelayMeasure::degenerate(1e-3);
        let xi = SegmentPath::constant(1e-3, 0, &[3.0, 4.0]);
        assert_eq!(segment_norm(&xi, &nu).unwrap(), 5.0);
    }

    #[test]
    fn misaligned_cells_are_rejected() {
        let cfg = DelayConfig {
            r: 0.5,
            family: DelayFamily::Lebesgue,
            cells: 20,
        };
        assert!(matches!(
            DelayMeasure::from_config(&cfg, 1e-3),
            Err(Error::GridMismatch(_))
        ));
    }
}
