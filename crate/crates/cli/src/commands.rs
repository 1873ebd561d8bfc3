//! Command runners. Each builds its outputs in memory so that nothing is
//! written when a run fails.

use std::path::Path;

use serde::Serialize;
use sta_shuttle::dynamics::{
    integrate_classical, simulate_quantum, ClassicalState, ExcitationReport, Grid, Particle, Snapshot,
};
use sta_shuttle::fourier::{design_with_nulls, excitation_spectrum, robustness_window, RobustnessWindow};
use sta_shuttle::noise::{heating_rate_check, monte_carlo_sensitivity, psd_estimate, PERTURBATIVE_RMS};
use sta_shuttle::oct::{
    constrained_smooth, min_time_bang_bang, optimize_robust_cost, write_trace_csv, ConstraintPeaks, CostBreakdown,
    InfeasibleReport, SmoothOutcome,
};
use sta_shuttle::trajectory::{
    adiabatic_timescale, default_steps, peak_acceleration_bound, solve_boundary_polynomial, trap_from_reference, Jump,
    PolyPath, SampledPath, TransportTask, TrapMotion,
};
use sta_shuttle::{io, Result};

use crate::config::{DesignJob, NoiseAnalysis, NoiseJob, OctJob, SimulateJob, SpectrumJob};

/// Grid used to locate peak accelerations in feasibility reports.
const PEAK_POINTS: usize = 10_001;

/// Named output files plus warnings for the user.
#[derive(Debug, Default)]
pub struct Outputs {
    pub files: Vec<(String, Vec<u8>)>,
    pub warnings: Vec<String>,
}

impl Outputs {
    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        self.files.push((name.to_string(), io::json_bytes(value)?));
        Ok(())
    }

    pub fn csv<F: FnOnce(&mut Vec<u8>) -> Result<()>>(&mut self, name: &str, fill: F) -> Result<()> {
        self.files.push((name.to_string(), io::csv_bytes(fill)?));
        Ok(())
    }

    pub fn write_all(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct Feasibility {
    peak_trap_acceleration: f64,
    /// `2d/t_f²`, the least peak acceleration of any rest-to-rest transport.
    acceleration_bound: f64,
    bound_ratio: Option<f64>,
    adiabatic_timescale: f64,
    /// `t_f` over the adiabatic timescale; below one the protocol is fast.
    adiabatic_ratio: Option<f64>,
    max_relative_displacement: Option<f64>,
    reference: Option<PolyPath>,
    warnings: Vec<String>,
}

pub fn design(task: &TransportTask, job: &DesignJob) -> Result<Outputs> {
    let (reference, trap) = if job.nulls.is_empty() {
        let r = solve_boundary_polynomial(task, job.continuity_order)?;
        let t = trap_from_reference(&r, task)?;
        (Some(r), t)
    } else {
        (None, design_with_nulls(task, &job.nulls, job.continuity_order)?)
    };
    let mut warnings = Vec::new();
    if task.distance() == 0.0 {
        warnings.push("distance is zero; the emitted path stays at the origin".to_string());
    }
    let peak = trap.max_abs_derivative(2, PEAK_POINTS);
    let bound = peak_acceleration_bound(task);
    let t_ad = adiabatic_timescale(task);
    let relative = reference.as_ref().map(|r| {
        (0..PEAK_POINTS)
            .map(|i| {
                let t = task.duration() * i as f64 / (PEAK_POINTS - 1) as f64;
                (trap.position(t) - r.position(t)).abs()
            })
            .fold(0.0, f64::max)
    });
    let report = Feasibility {
        peak_trap_acceleration: peak,
        acceleration_bound: bound,
        bound_ratio: (bound > 0.0).then(|| peak / bound),
        adiabatic_timescale: t_ad,
        adiabatic_ratio: (t_ad > 0.0).then(|| task.duration() / t_ad),
        max_relative_displacement: relative,
        reference,
        warnings: warnings.clone(),
    };
    let sampled = trap.sample(job.samples)?;
    let mut out = Outputs {
        warnings,
        ..Outputs::default()
    };
    out.json("trap.json", &trap)?;
    out.csv("trap.csv", |w| sampled.write_csv(w))?;
    out.json("feasibility.json", &report)?;
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationReports {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classical: Option<ExcitationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantum: Option<ExcitationReport>,
}

#[derive(Serialize)]
struct SnapshotIndex {
    file: String,
    requested: f64,
    time: f64,
}

pub fn run_simulation(task: &TransportTask, job: &SimulateJob) -> Result<(SimulationReports, Outputs)> {
    let trap = job.trap(task)?;
    let potential = job.potential(task);
    potential.validate()?;
    let particle = Particle::from(task);
    let mut out = Outputs::default();
    let mut reports = SimulationReports {
        classical: None,
        quantum: None,
    };
    if job.engine.classical() {
        let omega = potential.frequency(particle.mass);
        let steps = job.steps.unwrap_or_else(|| default_steps(omega, trap.duration()));
        let start = ClassicalState::at_rest(&trap, &potential).displaced(job.offset.q, job.offset.p);
        let run = integrate_classical(&trap, &potential, particle.mass, job.mode, start, steps)?;
        out.csv("trajectory.csv", |w| run.trajectory.write_csv(w))?;
        reports.classical = Some(run.report);
    }
    if job.engine.quantum() {
        let grid = Grid::for_transport(&trap, &potential, particle, job.grid.points, job.grid.padding)?;
        let sim = simulate_quantum(&trap, &potential, particle, job.mode, grid, job.dt, &job.snapshots)?;
        let mut index = Vec::new();
        for (i, Snapshot { requested, time, state }) in sim.run.snapshots.iter().enumerate() {
            let file = format!("snapshot_{i:03}.csv");
            out.csv(&file, |w| state.write_csv(w))?;
            index.push(SnapshotIndex {
                file,
                requested: *requested,
                time: *time,
            });
        }
        if !index.is_empty() {
            out.json("snapshots.json", &index)?;
        }
        reports.quantum = Some(sim.report);
    }
    out.files
        .insert(0, ("report.json".to_string(), io::json_bytes(&reports)?));
    Ok((reports, out))
}

pub fn simulate(task: &TransportTask, job: &SimulateJob) -> Result<Outputs> {
    Ok(run_simulation(task, job)?.1)
}

#[derive(Serialize)]
struct WindowReport {
    omega0: f64,
    epsilon: f64,
    #[serde(flatten)]
    window: RobustnessWindow,
}

pub fn spectrum(task: &TransportTask, job: &SpectrumJob) -> Result<Outputs> {
    let trap = job.path.trap(task)?;
    let spectrum = excitation_spectrum(
        &trap,
        task.mass(),
        job.discontinuities,
        job.omega_min,
        job.omega_max,
        job.points,
    )?;
    let mut out = Outputs::default();
    out.csv("spectrum.csv", |w| spectrum.write_csv(w))?;
    if let Some(spec) = &job.window {
        let omega0 = spec.omega0.unwrap_or(task.omega());
        let epsilon = spec.epsilon * task.energy_scale();
        let window = robustness_window(
            &trap,
            task.mass(),
            job.discontinuities,
            omega0,
            epsilon,
            spec.half_range,
        )?;
        out.json(
            "window.json",
            &WindowReport {
                omega0,
                epsilon,
                window,
            },
        )?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct PsdSummary {
    samples: usize,
    dt: f64,
    segments: usize,
    trap_frequency: f64,
    estimate_at_trap_frequency: Option<f64>,
    model_at_trap_frequency: f64,
}

pub fn noise(task: &TransportTask, job: &NoiseJob) -> Result<Outputs> {
    let particle = Particle::from(task);
    let mut out = Outputs::default();
    match &job.analysis {
        NoiseAnalysis::Sensitivity {
            path,
            realizations,
            options,
        } => {
            let trap = path.trap(task)?;
            let report = monte_carlo_sensitivity(&trap, &job.lattice, particle, &job.model, *realizations, options)?;
            if report.perturbation_rms > PERTURBATIVE_RMS {
                out.warnings.push(format!(
                    "per-step perturbation rms {:.3} exceeds {PERTURBATIVE_RMS}; results are outside the quadratic regime",
                    report.perturbation_rms
                ));
            }
            out.json("sensitivity.json", &report)?;
        }
        NoiseAnalysis::Psd { samples, dt, segment } => {
            let xi = job.model.kind.sample(*dt, *samples, job.model.seed)?;
            let psd = psd_estimate(&xi, *dt, *segment)?;
            let w0 = job.lattice.frequency(particle.mass);
            out.csv("psd.csv", |w| psd.write_csv(w))?;
            out.json(
                "psd.json",
                &PsdSummary {
                    samples: *samples,
                    dt: *dt,
                    segments: psd.segments,
                    trap_frequency: w0,
                    estimate_at_trap_frequency: psd.at(w0),
                    model_at_trap_frequency: job.model.kind.spectral_density(w0),
                },
            )?;
        }
        NoiseAnalysis::Heating { second, options } => {
            let other = job.model.with_kind(*second);
            let report = heating_rate_check(&job.lattice, particle.mass, &job.model, &other, options)?;
            out.json("heating.json", &report)?;
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct BangBangReport {
    t_f: f64,
    acceleration: f64,
    verified_excess: f64,
    reference_jumps: Vec<Jump>,
    trap_jumps: Vec<Jump>,
}

#[derive(Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
enum SmoothReport {
    Feasible { peaks: ConstraintPeaks, slack: f64 },
    Infeasible(InfeasibleReport),
}

#[derive(Serialize)]
struct RobustReport {
    breakdown: CostBreakdown,
    quintic: CostBreakdown,
    converged: bool,
    warning: Option<String>,
    nominal_excess: f64,
}

fn jumps(p: &Option<SampledPath>) -> Vec<Jump> {
    p.as_ref().map(|p| p.jumps().to_vec()).unwrap_or_default()
}

pub fn oct(task: &TransportTask, job: &OctJob) -> Result<Outputs> {
    let mut out = Outputs::default();
    match job {
        OctJob::BangBang { delta } => {
            let bb = min_time_bang_bang(task, *delta)?;
            if bb.trap.is_none() {
                out.warnings.push("distance is zero; no motion is needed".to_string());
            }
            out.json(
                "bang_bang.json",
                &BangBangReport {
                    t_f: bb.t_f,
                    acceleration: bb.acceleration,
                    verified_excess: bb.verified_excess,
                    reference_jumps: jumps(&bb.reference),
                    trap_jumps: jumps(&bb.trap),
                },
            )?;
            if let (Some(r), Some(t)) = (&bb.reference, &bb.trap) {
                out.csv("reference.csv", |w| r.write_csv(w))?;
                out.csv("trap.csv", |w| t.write_csv(w))?;
            }
        }
        OctJob::Smooth { constraint } => match constrained_smooth(task, constraint)? {
            SmoothOutcome::Feasible(p) => {
                out.json(
                    "smooth.json",
                    &SmoothReport::Feasible {
                        peaks: p.peaks,
                        slack: p.slack,
                    },
                )?;
                out.json("reference.json", &p.reference)?;
                out.json("trap.json", &p.trap)?;
            }
            SmoothOutcome::Infeasible(r) => {
                out.warnings.push(format!(
                    "no feasible smooth protocol at t_f = {}; the smallest feasible duration is {}",
                    r.requested_t_f, r.smallest_feasible_t_f
                ));
                out.json("smooth.json", &SmoothReport::Infeasible(r))?;
            }
        },
        OctJob::Robust {
            cost,
            perturbation,
            options,
        } => {
            let r = optimize_robust_cost(task, cost, perturbation, options)?;
            if let Some(w) = &r.warning {
                out.warnings.push(w.clone());
            }
            out.json(
                "robust.json",
                &RobustReport {
                    breakdown: r.breakdown,
                    quintic: r.quintic,
                    converged: r.converged,
                    warning: r.warning.clone(),
                    nominal_excess: r.nominal_excess,
                },
            )?;
            out.json("reference.json", &r.reference)?;
            out.json("trap.json", &r.trap)?;
            out.csv("trace.csv", |w| write_trace_csv(&r.trace, w))?;
        }
    }
    Ok(out)
}
