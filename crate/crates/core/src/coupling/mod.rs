//! Closed-form couplings by change of measure and their simulation.

mod bound;
mod ledger;
mod plan;
mod sim;

pub use bound::{
    beta_bound, beta_terms, calibrate_constant, explicit_bound, sigma_bound, sigma_terms, BoundArgument,
    BoundConstants, BoundKind, BoundTerms, Calibration,
};
pub use ledger::{girsanov_log_weight, GirsanovLedger};
pub use plan::{build_harnack_plan, build_shift_plan, CouplingPlan, HarnackPlan, PlanTable, ShiftPlan};
pub use sim::{run_coupled, simulate_coupled, CoupledRun};
