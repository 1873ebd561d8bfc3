//! Constrained time-optimal and robustness-optimised transport protocols.

mod bang_bang;
mod family;
mod robust;
mod smooth;

pub use bang_bang::{min_time_bang_bang, BangBang, ControlConstraint, BANG_BANG_SAMPLES};
pub use family::MAX_FAMILY_DIM;
pub use robust::{
    optimize_robust_cost, write_trace_csv, CostBreakdown, Perturbation, RobustCost, RobustOptions, RobustResult,
    TracePoint,
};
pub use smooth::{
    certify, constrained_smooth, smooth_feasible, ConstraintPeaks, InfeasibleReport, SmoothOutcome, SmoothPath,
    SMOOTH_FAMILY_DIM, VERIFY_POINTS,
};
