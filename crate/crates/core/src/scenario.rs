//! A fully built configuration: operators, delay measure, coefficients,
//! grid, initial segment and step kernel.

use crate::config::{InitialConfig, ScenarioConfig};
use crate::delay::{DelayMeasure, SegmentPath};
use crate::drift::{coefficients_from_config, HolderDiniDrift, SegmentFunctional};
use crate::error::{Error, Result};
use crate::model::{build_model, OperatorSet};
use crate::sde::{Engine, SimGrid};

#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub ops: OperatorSet,
    pub nu: DelayMeasure,
    pub drift: HolderDiniDrift,
    pub functional: SegmentFunctional,
    pub grid: SimGrid,
    pub xi0: SegmentPath,
    pub engine: Engine,
}

impl Scenario {
    pub fn build(config: &ScenarioConfig) -> Result<Self> {
        let ops = build_model(config)?;
        let sim = &config.simulation;
        let nu = DelayMeasure::from_config(&config.delay, sim.dt)?;
        let (drift, functional) = coefficients_from_config(&config.coefficients, ops.n1(), ops.n2(), &nu)?;
        let grid = SimGrid::new(sim.dt, sim.horizon, config.delay.r, sim.seed, sim.n_paths)?;
        let xi0 = initial_segment(&sim.initial, ops.n1(), ops.n2(), sim.dt, grid.max_lag)?;
        let engine = Engine::new(&ops, sim.dt)?;
        Ok(Scenario {
            config: config.clone(),
            ops,
            nu,
            drift,
            functional,
            grid,
            xi0,
            engine,
        })
    }

    pub fn dim(&self) -> usize {
        self.ops.dim()
    }

    /// Constant segment `θ ↦ v` on this scenario's grid.
    pub fn constant_segment(&self, v: &[f64]) -> SegmentPath {
        SegmentPath::constant(self.grid.dt, self.grid.max_lag, v)
    }
}

/// The constant segment described by `cfg`.
pub fn initial_segment(cfg: &InitialConfig, n1: usize, n2: usize, dt: f64, max_lag: usize) -> Result<SegmentPath> {
    let part = |v: &Vec<f64>, n: usize, what: &'static str| -> Result<Vec<f64>> {
        if v.is_empty() {
            Ok(vec![cfg.level; n])
        } else if v.len() == n {
            Ok(v.clone())
        } else {
            Err(Error::DimensionMismatch {
                what,
                expected: n,
                got: v.len(),
            })
        }
    };
    let mut z = part(&cfg.x, n1, "initial x")?;
    z.extend(part(&cfg.y, n2, "initial y")?);
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("initial values must be finite".into()));
    }
    Ok(SegmentPath::constant(dt, max_lag, &z))
}
