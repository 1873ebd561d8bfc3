//! Stochastic lattice-parameter noise: generators, spectra, Monte Carlo
//! sensitivity of transport protocols and heating-rate checks.

mod heating;
mod model;
mod monte_carlo;
mod psd;

pub use heating::{
    heating_rate, heating_rate_check, probe_frequency, HeatingComparison, HeatingOptions, HeatingRate,
    HEATING_TOLERANCE,
};
pub use model::{generate_ou, generate_white, NoiseKind, NoiseModel, NoiseTarget};
pub use monte_carlo::{
    monte_carlo_sensitivity, scan_durations, write_scan_csv, MonteCarloOptions, ScanRow, SensitivityReport,
    MAX_ESCAPE_FRACTION, PERTURBATIVE_RMS,
};
pub use psd::{psd_estimate, PowerSpectrum, DEFAULT_MAX_SEGMENT, MIN_SEGMENTS};
