use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::NoiseModel;
use crate::dynamics::{
    default_time_step, energy_expectation, ground_state, run_classical, run_quantum, ClassicalState, DrivingMode, Grid,
    Particle, PotentialModel,
};
use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, mean_and_stderr};
use crate::trajectory::{default_steps, solve_boundary_polynomial, trap_from_reference, TransportTask, TrapMotion};

/// Abort threshold on the fraction of escaped realizations.
pub const MAX_ESCAPE_FRACTION: f64 = 0.01;

/// Above this `perturbation_rms` the quadratic-response regime is left.
pub const PERTURBATIVE_RMS: f64 = 0.1;

/// Propagation settings for a Monte Carlo study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloOptions {
    /// Use grid quantum propagation instead of classical RK4.
    pub quantum: bool,
    /// Upper bound on the step; the noise is held constant over each step.
    pub max_dt: Option<f64>,
    pub grid_points: usize,
    pub grid_padding: f64,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        MonteCarloOptions {
            quantum: false,
            max_dt: None,
            grid_points: Grid::DEFAULT_POINTS,
            grid_padding: Grid::DEFAULT_PADDING,
        }
    }
}

/// Mean final excess energy over noise realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub mean_excess_energy: f64,
    pub standard_error: f64,
    pub n_realizations: usize,
    pub noiseless_excess: f64,
    /// `mean_excess_energy - noiseless_excess`
    pub noise_induced_excess: f64,
    pub escaped: usize,
    pub steps: usize,
    /// RMS of the per-step parameter shift `λ ξ` (phase in radians for
    /// position noise, relative change otherwise). Second-order sensitivity
    /// results need this well below one.
    pub perturbation_rms: f64,
    pub seed: u64,
}

fn step_count<M: TrapMotion + ?Sized>(
    path: &M,
    omega: f64,
    noise: &NoiseModel,
    options: &MonteCarloOptions,
) -> Result<usize> {
    let t_f = path.duration();
    let mut dt = if options.quantum {
        default_time_step(omega, t_f)
    } else {
        t_f / default_steps(omega, t_f) as f64
    };
    if let Some(m) = noise.kind.max_step() {
        dt = dt.min(m);
    }
    if let Some(m) = options.max_dt {
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::invalid("max_dt must be positive"));
        }
        dt = dt.min(m);
    }
    Ok((t_f / dt - 1e-9).ceil().max(1.0) as usize)
}

/// Final excess energy for each noise realization of a lattice transport.
///
/// Realization `i` draws its noise from seed `seed ^ i`; the noise is
/// piecewise constant over integrator steps. Results are reduced in index
/// order with compensated summation, so the report does not depend on
/// thread scheduling. If 1% or more of the realizations escape the central
/// well the study is aborted.
pub fn monte_carlo_sensitivity<M: TrapMotion + ?Sized>(
    path: &M,
    lattice: &PotentialModel,
    particle: Particle,
    noise: &NoiseModel,
    n_realizations: usize,
    options: &MonteCarloOptions,
) -> Result<SensitivityReport> {
    if !matches!(lattice, PotentialModel::Lattice { .. }) {
        return Err(Error::invalid("noise studies need a lattice potential"));
    }
    lattice.validate()?;
    noise.validate()?;
    if n_realizations < 2 {
        return Err(Error::invalid("need at least two realizations"));
    }
    let omega = lattice.frequency(particle.mass);
    let steps = step_count(path, omega, noise, options)?;
    let dt = path.duration() / steps as f64;
    let runner = Runner::new(path, lattice, particle, steps, options)?;

    let noiseless = runner.run(&|_| *lattice)?;
    let outcomes: Vec<Result<Option<f64>>> = (0..n_realizations)
        .into_par_iter()
        .map(|i| {
            let xi = noise.kind.sample(dt, steps, noise.realization_seed(i))?;
            match runner.run(&|s| noise.perturb(lattice, xi[s])) {
                Ok(e) => Ok(Some(e)),
                Err(Error::Escape { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut deltas = Vec::with_capacity(n_realizations);
    let mut escaped = 0;
    for o in outcomes {
        match o? {
            Some(e) => deltas.push(e - noiseless),
            None => escaped += 1,
        }
    }
    let rate = escaped as f64 / n_realizations as f64;
    if rate >= MAX_ESCAPE_FRACTION {
        return Err(Error::EscapeRate {
            rate,
            advice: format!("reduce lambda below {} or lengthen t_f", noise.lambda),
        });
    }
    let (mean_delta, standard_error) = mean_and_stderr(&deltas);
    Ok(SensitivityReport {
        mean_excess_energy: noiseless + mean_delta,
        standard_error,
        n_realizations: deltas.len(),
        noiseless_excess: noiseless,
        noise_induced_excess: mean_delta,
        escaped,
        steps,
        perturbation_rms: noise.lambda * noise.kind.sample_variance(dt).sqrt(),
        seed: noise.seed,
    })
}

/// Classical or quantum evaluation of one realization.
struct Runner<'a, M: TrapMotion + ?Sized> {
    path: &'a M,
    lattice: &'a PotentialModel,
    particle: Particle,
    steps: usize,
    quantum: Option<(crate::dynamics::QuantumState, f64)>,
}

impl<'a, M: TrapMotion + ?Sized> Runner<'a, M> {
    fn new(
        path: &'a M,
        lattice: &'a PotentialModel,
        particle: Particle,
        steps: usize,
        options: &MonteCarloOptions,
    ) -> Result<Self> {
        let quantum = if options.quantum {
            let grid = Grid::for_transport(path, lattice, particle, options.grid_points, options.grid_padding)?;
            let start = ground_state(lattice, particle, grid, path.initial_position())?;
            let target = ground_state(lattice, particle, grid, path.final_position())?;
            Some((start.state, target.energy))
        } else {
            None
        };
        Ok(Runner {
            path,
            lattice,
            particle,
            steps,
            quantum,
        })
    }

    fn run(&self, potential_at: &(dyn Fn(usize) -> PotentialModel + Sync)) -> Result<f64> {
        match &self.quantum {
            None => {
                let start = ClassicalState::at_rest(self.path, self.lattice);
                let (report, _) = run_classical(
                    self.path,
                    self.lattice,
                    self.particle.mass,
                    DrivingMode::Plain,
                    start,
                    self.steps,
                    potential_at,
                    false,
                )?;
                Ok(report.final_excess_energy)
            }
            Some((psi0, e0)) => {
                let dt = self.path.duration() / self.steps as f64;
                let run = run_quantum(
                    self.path,
                    self.lattice,
                    self.particle,
                    DrivingMode::Plain,
                    psi0,
                    dt,
                    &[],
                    potential_at,
                )?;
                Ok(energy_expectation(
                    &run.final_state,
                    self.lattice,
                    self.particle,
                    self.path.final_position(),
                ) - e0)
            }
        }
    }
}

/// One row of a duration scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub t_f: f64,
    /// Noise-induced mean excess (noiseless baseline subtracted).
    pub mean_excess: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Noise sensitivity of the inverse-engineered protocol for each duration.
///
/// Every duration reuses the same seeds, so neighbouring points share most
/// of their noise history and the scan shape is resolved more sharply than
/// the individual standard errors suggest.
#[allow(clippy::too_many_arguments)]
pub fn scan_durations(
    task: &TransportTask,
    lattice: &PotentialModel,
    particle: Particle,
    noise: &NoiseModel,
    durations: &[f64],
    n_realizations: usize,
    continuity_order: usize,
    options: &MonteCarloOptions,
) -> Result<Vec<ScanRow>> {
    if durations.is_empty() {
        return Err(Error::invalid("duration grid is empty"));
    }
    durations
        .iter()
        .map(|&t_f| {
            let t = task.with_duration(t_f)?;
            let reference = solve_boundary_polynomial(&t, continuity_order)?;
            let trap = trap_from_reference(&reference, &t)?;
            let r = monte_carlo_sensitivity(&trap, lattice, particle, noise, n_realizations, options)?;
            Ok(ScanRow {
                t_f,
                mean_excess: r.noise_induced_excess,
                stderr: r.standard_error,
                n: r.n_realizations,
            })
        })
        .collect()
}

/// CSV with header `t_f,mean_excess,stderr,n`.
pub fn write_scan_csv<W: Write>(rows: &[ScanRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t_f", "mean_excess", "stderr", "n"])?;
    for r in rows {
        w.write_record(&[
            r.t_f.to_string(),
            r.mean_excess.to_string(),
            r.stderr.to_string(),
            r.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Order-independent mean of per-realization values.
pub(crate) fn ensemble_mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}
