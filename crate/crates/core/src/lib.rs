//! Simulation and verification toolkit for degenerate stochastic delay
//! systems on truncated spectral spaces.

pub mod config;
pub mod coupling;
pub mod delay;
pub mod drift;
pub mod error;
pub mod experiments;
pub mod harnack;
pub mod linalg;
pub mod model;
pub mod nonexplosion;
pub mod quadrature;
pub mod rng;
pub mod scenario;
pub mod sde;
pub mod stats;
pub mod zvonkin;

pub use config::ScenarioConfig;
pub use delay::{segment_norm, DelayMeasure, SegmentPath, SegmentView};
pub use drift::{DiniModulus, HolderDiniDrift, SegmentFunctional};
pub use error::{Condition, Error, Result};
pub use model::{build_model, OperatorSet, TruncatedSpace};
pub use scenario::Scenario;
pub use sde::{integrate_mild, sample_linear_flow, Engine, SimGrid};
pub use stats::MCEstimate;
