//! Excitation from the Fourier transform of the trap acceleration.
//!
//! For a harmonic trap of frequency `ω` and a particle starting at rest, the
//! final energy above the ground level is `(m/2) |ã(ω)|²` with
//! `ã(ω) = ∫ ẍ_0(t) e^{iωt} dt`. Paths whose transform vanishes at chosen
//! frequencies are excitation-free there.

mod design;
mod moments;
mod transform;
mod window;

pub use design::{design_multinull, design_with_nulls, FrequencyNull, MAX_NULLS};
pub(crate) use transform::poly_transform;
pub use transform::{acceleration_transform, excitation, excitation_from_transform, Discontinuities};
pub use window::{
    excitation_spectrum, robustness_window, ExcitationSpectrum, RobustnessWindow, WINDOW_POINTS_PER_UNIT,
};
