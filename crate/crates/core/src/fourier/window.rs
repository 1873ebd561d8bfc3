use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::transform::{excitation, Discontinuities};
use crate::error::{Error, Result};
use crate::trajectory::TrapPath;

/// Final excitation as a function of trap frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationSpectrum {
    pub frequencies: Vec<f64>,
    pub excitation: Vec<f64>,
}

impl ExcitationSpectrum {
    pub fn new(frequencies: Vec<f64>, excitation: Vec<f64>) -> Result<Self> {
        if frequencies.len() != excitation.len() {
            return Err(Error::invalid("spectrum arrays must share the same length"));
        }
        if frequencies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("spectrum frequencies must be strictly increasing"));
        }
        if excitation.iter().any(|e| !(*e >= 0.0)) {
            return Err(Error::invalid("spectrum excitation must be non-negative"));
        }
        Ok(ExcitationSpectrum {
            frequencies,
            excitation,
        })
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.excitation.iter().copied().fold(0.0, f64::max)
    }

    /// CSV with header `omega,excitation`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["omega", "excitation"])?;
        for (f, e) in self.frequencies.iter().zip(&self.excitation) {
            w.write_record([f.to_string(), e.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Dense `E(ω)` scan over `n_points` uniformly spaced frequencies.
///
/// Points are evaluated in parallel; output order follows the grid.
pub fn excitation_spectrum(
    path: &TrapPath,
    mass: f64,
    discontinuities: Discontinuities,
    omega_min: f64,
    omega_max: f64,
    n_points: usize,
) -> Result<ExcitationSpectrum> {
    if n_points < 2 || !(omega_max > omega_min) || omega_min < 0.0 {
        return Err(Error::invalid(
            "spectrum needs n_points >= 2 and 0 <= omega_min < omega_max",
        ));
    }
    let step = (omega_max - omega_min) / (n_points - 1) as f64;
    let frequencies: Vec<f64> = (0..n_points).map(|i| omega_min + i as f64 * step).collect();
    let excitation = frequencies
        .par_iter()
        .map(|&w| excitation(path, mass, w, discontinuities))
        .collect::<Result<Vec<f64>>>()?;
    ExcitationSpectrum::new(frequencies, excitation)
}

/// Symmetric frequency window around `omega0` where `E(ω) ≤ ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessWindow {
    pub half_width: f64,
    /// No crossing was found inside the scanned range; `half_width` is the
    /// scan half-range.
    pub saturated: bool,
    pub diagnostic: Option<String>,
}

/// Minimum scan density in points per unit of angular frequency.
pub const WINDOW_POINTS_PER_UNIT: f64 = 400.0;

/// Largest `Δ` with `E(ω) ≤ ε` on `[ω₀ - Δ, ω₀ + Δ]`.
///
/// The scan walks outwards from `ω₀` on a grid of at least 400 points per
/// unit frequency (and per `ω₀`), then bisects the first crossing on each
/// side. `half_range` defaults to `ω₀ / 2`; the lower side never goes below
/// zero frequency.
pub fn robustness_window(
    path: &TrapPath,
    mass: f64,
    discontinuities: Discontinuities,
    omega0: f64,
    epsilon: f64,
    half_range: Option<f64>,
) -> Result<RobustnessWindow> {
    if !(omega0 > 0.0 && epsilon >= 0.0) {
        return Err(Error::invalid("robustness window needs omega0 > 0 and epsilon >= 0"));
    }
    let e = |w: f64| excitation(path, mass, w, discontinuities);
    let e0 = e(omega0)?;
    if e0 > epsilon {
        return Ok(RobustnessWindow {
            half_width: 0.0,
            saturated: false,
            diagnostic: Some(format!(
                "excitation {e0:.3e} at omega0 already exceeds epsilon {epsilon:.3e}"
            )),
        });
    }
    let half_range = half_range.unwrap_or(0.5 * omega0);
    if !(half_range > 0.0) {
        return Err(Error::invalid("window half-range must be positive"));
    }
    let step = (1.0f64).min(omega0) / WINDOW_POINTS_PER_UNIT;

    let mut widths = Vec::with_capacity(2);
    for dir in [-1.0, 1.0] {
        let reach = if dir < 0.0 { half_range.min(omega0) } else { half_range };
        let n = (reach / step).ceil() as usize;
        let mut good = 0.0;
        let mut crossing = None;
        for k in 1..=n {
            let off = (k as f64 * step).min(reach);
            if e(omega0 + dir * off)? > epsilon {
                crossing = Some((good, off));
                break;
            }
            good = off;
        }
        widths.push(match crossing {
            None => None,
            Some((mut lo, mut hi)) => {
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if e(omega0 + dir * mid)? > epsilon {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                Some(lo)
            }
        });
    }
    let found: Vec<f64> = widths.iter().flatten().copied().collect();
    Ok(match found.iter().copied().reduce(f64::min) {
        Some(w) => RobustnessWindow {
            half_width: w,
            saturated: false,
            diagnostic: None,
        },
        None => RobustnessWindow {
            half_width: half_range,
            saturated: true,
            diagnostic: Some("epsilon exceeds the excitation over the whole scan range".into()),
        },
    })
}
