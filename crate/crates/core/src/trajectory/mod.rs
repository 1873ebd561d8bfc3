//! Transport tasks, analytic paths and invariant-based inverse engineering.
//!
//! A reference path `x_c(t)` is the classical centre of the transported
//! state. It is tied to the trap path `x_0(t)` by the forced-oscillator
//! relation `ẍ_c + ω² x_c = ω² x_0`. Any `x_c` that starts and ends at rest
//! gives an excitation-free `x_0`, whatever the initial state.

mod inverse;
mod motion;
mod poly;
mod sampled;
mod task;

pub(crate) use inverse::{boundary_rows, check_continuity_order, solve_rows, MIN_STEPS};
pub use inverse::{
    default_steps, reference_from_trap, shifted_trajectory, solve_boundary_polynomial, trap_from_reference,
    CONTINUITY_ORDERS, DEFAULT_CONTINUITY_ORDER,
};
pub use motion::{Kinematics, Side, TrapMotion, TrapPath};
pub(crate) use poly::{derivative_coefficients, horner};
pub use poly::{PathRole, PolyPath, MAX_DEGREE};
pub use sampled::{Jump, SampledPath};
pub use task::{adiabatic_timescale, peak_acceleration_bound, TransportTask, UnitSystem, HBAR_SI};
