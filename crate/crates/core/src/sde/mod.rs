//! Exact linear flow and the exponential-Euler mild scheme.

mod engine;
mod grid;
mod law;

pub use engine::{extract_segment, integrate_mild, sample_linear_flow, Engine, History, StepNoise, Trajectory};
pub use grid::SimGrid;
pub(crate) use law::transition_covariance;
pub use law::{ou_transition_law, van_loan_covariance, GaussianLaw};
