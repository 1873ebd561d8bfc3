//! Design and verification of fast, excitation-free transport protocols for
//! a particle held in a moving trap.
//!
//! The crate is organised around the transport problem: move a trap from
//! `0` to `d` in time `t_f` so that the particle arrives unexcited.
//!
//! * [`trajectory`] holds the task description, analytic polynomial paths and
//!   the inverse-engineering relations between reference and trap paths.
//! * [`fourier`] evaluates final excitation from the Fourier transform of the
//!   trap acceleration and designs paths with spectral nulls.
//! * [`dynamics`] contains the classical and split-step quantum simulators.
//! * [`noise`] generates stochastic parameter fluctuations and runs Monte
//!   Carlo sensitivity studies.
//! * [`oct`] handles constrained time-optimal and robustness-optimal design.

pub mod dynamics;
pub mod error;
pub mod fourier;
pub mod io;
pub mod noise;
pub mod oct;
pub mod trajectory;

mod numeric;

pub use error::{Error, ErrorCategory, Result};
