use serde::Serialize;
use thiserror::Error;

/// Structural conditions checked by [`crate::model::build_model`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    Dimensions,
    TraceClass,
    NoiseInvertible,
    ControlInvertible,
    Intertwining,
    BlockCommutation,
    Dissipativity,
    GramianInvertible,
}

impl Condition {
    /// Assumption label as it appears in reports, e.g. `(A2)(i)`.
    pub fn label(self) -> &'static str {
        match self {
            Condition::Dimensions => "dims",
            Condition::TraceClass => "(a1)",
            Condition::NoiseInvertible => "(A2)(i)",
            Condition::ControlInvertible | Condition::Intertwining => "(A2)(ii)",
            Condition::BlockCommutation => "(A2)(iii)",
            Condition::Dissipativity | Condition::GramianInvertible => "(A5)",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Condition::Dimensions => "dimensions",
            Condition::TraceClass => "trace-class",
            Condition::NoiseInvertible => "QQ*-singular",
            Condition::ControlInvertible => "BB*-singular",
            Condition::Intertwining => "intertwining",
            Condition::BlockCommutation => "block-commutation",
            Condition::Dissipativity => "dissipativity",
            Condition::GramianInvertible => "gramian-invertible",
        }
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}", self.label(), self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("assumption {condition} violated: {detail} (residual {residual:.3e})")]
    AssumptionViolation {
        condition: Condition,
        residual: f64,
        detail: String,
    },
    #[error("gramian is numerically singular (condition number {condition_number:.3e})")]
    SingularGramian { condition_number: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("state left the float range at step {step}")]
    NonFinite { step: usize },
    #[error("time {t} is not on the simulation grid")]
    OffGrid { t: f64 },
    #[error("invalid horizon: {0}")]
    Horizon(String),
    #[error("plan does not match the simulation: {0}")]
    PlanMismatch(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("law mass {mass:.3e} escapes the state grid")]
    MassEscape { mass: f64 },
    #[error(
        "picard iteration did not converge after {iterations} sweeps (last change {last_change:.3e}, rate {rate:.3})"
    )]
    NoConvergence {
        iterations: usize,
        rate: f64,
        last_change: f64,
    },
    #[error("growth condition not satisfied: {0}")]
    ConditionUnsatisfied(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn violation(condition: Condition, residual: f64, detail: impl Into<String>) -> Self {
        Error::AssumptionViolation {
            condition,
            residual,
            detail: detail.into(),
        }
    }
}
