use serde::Serialize;

use crate::delay::steps_of;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimGrid {
    pub dt: f64,
    pub horizon: f64,
    pub n_steps: usize,
    /// `r / dt`.
    pub max_lag: usize,
    pub seed: u64,
    pub n_paths: usize,
}

impl SimGrid {
    pub fn new(dt: f64, horizon: f64, r: f64, seed: u64, n_paths: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::GridMismatch(format!("dt = {dt} must be positive")));
        }
        if !(horizon > 0.0) {
            return Err(Error::Horizon(format!("T = {horizon} must be positive")));
        }
        Ok(SimGrid {
            dt,
            horizon,
            n_steps: steps_of(horizon, dt, "T")?,
            max_lag: steps_of(r, dt, "r")?,
            seed,
            n_paths,
        })
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Step index of a grid time.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let k = (t / self.dt).round();
        if (t / self.dt - k).abs() > 1e-9 * k.max(1.0) || k < 0.0 || k as usize > self.n_steps {
            return Err(Error::OffGrid { t });
        }
        Ok(k as usize)
    }
}
