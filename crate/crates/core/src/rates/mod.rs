//! Reference solutions, bound constants and rate certification.

mod oracle;
mod verify;

pub use oracle::{default_c, kkt_residual, reference_solve, ReferenceSolution, DISAGREEMENT_TOL, KKT_TOL};
pub use verify::{
    bound_constant, check_bounds, fit_slope, verify_rates, verify_trajectory, ConditionP, RateReport,
    BOUND_SLACK, SLOPE_FLOOR,
};
