use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{NoiseModel, NoiseTarget};
use super::monte_carlo::ensemble_mean;
use crate::dynamics::{rest_frame_energy, ClassicalState, PotentialModel};
use crate::error::{Error, Result};
use crate::numeric::{linear_fit, mean_and_stderr, rk4_over};
use crate::trajectory::{PathRole, PolyPath};

/// Allowed relative mismatch between rate ratio and spectral ratio.
pub const HEATING_TOLERANCE: f64 = 0.15;

/// Settings for static-trap heating runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatingOptions {
    pub duration: f64,
    pub realizations: usize,
    /// Number of equally spaced fit points after `t = 0`.
    pub samples: usize,
    /// Initial displacement from the well bottom for parametric noise, in
    /// units of `1/K`. Parametric noise cannot heat a particle at rest.
    pub initial_offset: f64,
    /// Batches used for the rate's standard error.
    pub batches: usize,
}

impl Default for HeatingOptions {
    fn default() -> Self {
        HeatingOptions {
            duration: 200.0,
            realizations: 1000,
            samples: 40,
            initial_offset: 0.05,
            batches: 10,
        }
    }
}

/// Fitted growth of the ensemble energy.
///
/// For position noise the mean energy grows linearly from rest and `rate` is
/// the slope (energy per time). For amplitude and wavenumber noise the growth
/// is exponential and `rate` is the logarithmic slope (per time).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatingRate {
    pub rate: f64,
    pub stderr: f64,
    pub probe_frequency: f64,
    pub spectral_density: f64,
}

/// Two heating rates compared with the noise spectra at the probe frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatingComparison {
    pub target: NoiseTarget,
    pub first: HeatingRate,
    pub second: HeatingRate,
    pub rate_ratio: f64,
    pub spectral_ratio: f64,
    /// `rate_ratio / spectral_ratio - 1`
    pub relative_deviation: f64,
    pub consistent: bool,
}

/// Frequency at which a noise target feeds energy into the well: `ω₀` for
/// position noise, `2ω₀` for parametric (amplitude, wavenumber) noise.
pub fn probe_frequency(target: NoiseTarget, omega0: f64) -> f64 {
    match target {
        NoiseTarget::Position => omega0,
        NoiseTarget::Amplitude | NoiseTarget::Wavenumber => 2.0 * omega0,
    }
}

/// Static-trap Monte Carlo heating rate of one noise model.
pub fn heating_rate(
    lattice: &PotentialModel,
    mass: f64,
    noise: &NoiseModel,
    options: &HeatingOptions,
) -> Result<HeatingRate> {
    let PotentialModel::Lattice { wavenumber, .. } = *lattice else {
        return Err(Error::invalid("heating checks need a lattice potential"));
    };
    lattice.validate()?;
    noise.validate()?;
    if !(options.duration.is_finite() && options.duration > 0.0) {
        return Err(Error::invalid("heating duration must be positive"));
    }
    if options.samples < 3 || options.batches < 2 || options.realizations < 2 * options.batches {
        return Err(Error::invalid(
            "need >= 3 fit samples, >= 2 batches and >= 2 realizations per batch",
        ));
    }
    let omega0 = lattice.frequency(mass);
    let parametric = noise.target != NoiseTarget::Position;

    let mut dt = TAU / (200.0 * omega0);
    if let Some(m) = noise.kind.max_step() {
        dt = dt.min(m);
    }
    let per_sample = ((options.duration / options.samples as f64) / dt).ceil() as usize;
    let steps = per_sample * options.samples;
    let dt = options.duration / steps as f64;
    let trap = PolyPath::new(PathRole::Trap, options.duration, vec![0.0])?;
    let start = ClassicalState::at_rest(&trap, lattice).displaced(
        if parametric {
            options.initial_offset / wavenumber
        } else {
            0.0
        },
        0.0,
    );

    let histories: Vec<Result<Vec<f64>>> = (0..options.realizations)
        .into_par_iter()
        .map(|i| {
            let xi = noise.kind.sample(dt, steps, noise.realization_seed(i))?;
            let mut energies = Vec::with_capacity(options.samples);
            rk4_over(
                &trap,
                steps,
                [start.q, start.p],
                |s, _, _, y| [y[1] / mass, noise.perturb(lattice, xi[s]).force(mass, y[0])],
                |s, _, y| {
                    if s > 0 && s % per_sample == 0 {
                        energies.push(rest_frame_energy(
                            lattice,
                            mass,
                            0.0,
                            ClassicalState { q: y[0], p: y[1] },
                        ));
                    }
                    Ok(())
                },
            )?;
            Ok(energies)
        })
        .collect();
    let histories: Vec<Vec<f64>> = histories.into_iter().collect::<Result<_>>()?;
    let times: Vec<f64> = (1..=options.samples).map(|k| (k * per_sample) as f64 * dt).collect();

    let fit = |members: &[Vec<f64>]| -> f64 {
        let mean: Vec<f64> = (0..options.samples)
            .map(|k| ensemble_mean(&members.iter().map(|h| h[k]).collect::<Vec<_>>()))
            .collect();
        if parametric {
            let logs: Vec<f64> = mean.iter().map(|e| e.max(f64::MIN_POSITIVE).ln()).collect();
            linear_fit(&times, &logs).0
        } else {
            linear_fit(&times, &mean).0
        }
    };
    let rate = fit(&histories);
    let per_batch = histories.len() / options.batches;
    let batch_rates: Vec<f64> = histories
        .chunks_exact(per_batch)
        .take(options.batches)
        .map(fit)
        .collect();
    let (_, stderr) = mean_and_stderr(&batch_rates);
    let probe = probe_frequency(noise.target, omega0);
    Ok(HeatingRate {
        rate,
        stderr,
        probe_frequency: probe,
        spectral_density: noise.kind.spectral_density(probe),
    })
}

/// Compare the heating rates of two noise settings on the same target.
///
/// The rate ratio is expected to follow the ratio of the noise spectra at
/// the probe frequency within [`HEATING_TOLERANCE`].
pub fn heating_rate_check(
    lattice: &PotentialModel,
    mass: f64,
    first: &NoiseModel,
    second: &NoiseModel,
    options: &HeatingOptions,
) -> Result<HeatingComparison> {
    if first.target != second.target {
        return Err(Error::invalid(
            "heating comparison needs both models on the same target",
        ));
    }
    let a = heating_rate(lattice, mass, first, options)?;
    let b = heating_rate(lattice, mass, second, options)?;
    let scale = |r: &HeatingRate, m: &NoiseModel| r.rate / (m.lambda * m.lambda);
    let rate_ratio = scale(&b, second) / scale(&a, first);
    let spectral_ratio = b.spectral_density / a.spectral_density;
    let relative_deviation = rate_ratio / spectral_ratio - 1.0;
    Ok(HeatingComparison {
        target: first.target,
        first: a,
        second: b,
        rate_ratio,
        spectral_ratio,
        relative_deviation,
        consistent: relative_deviation.abs() <= HEATING_TOLERANCE,
    })
}
