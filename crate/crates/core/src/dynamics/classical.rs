use serde::{Deserialize, Serialize};

use super::potential::PotentialModel;
use super::report::{DrivingMode, ExcitationReport};
use crate::error::{Error, Result};
use crate::numeric::rk4_over;
use crate::trajectory::{SampledPath, Side, TrapMotion, MIN_STEPS};

/// Position and canonical momentum of a classical particle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassicalState {
    pub q: f64,
    pub p: f64,
}

impl ClassicalState {
    pub fn new(q: f64, p: f64) -> Result<Self> {
        if !(q.is_finite() && p.is_finite()) {
            return Err(Error::invalid("classical state must be finite"));
        }
        Ok(ClassicalState { q, p })
    }

    /// At rest at the bottom of the initial trap.
    pub fn at_rest<M: TrapMotion + ?Sized>(path: &M, potential: &PotentialModel) -> Self {
        ClassicalState {
            q: path.initial_position() + potential.equilibrium(),
            p: 0.0,
        }
    }

    pub fn displaced(self, dq: f64, dp: f64) -> Self {
        ClassicalState {
            q: self.q + dq,
            p: self.p + dp,
        }
    }
}

/// Particle trajectory plus the excitation summary of one classical run.
#[derive(Debug, Clone)]
pub struct ClassicalRun {
    pub trajectory: SampledPath,
    pub report: ExcitationReport,
}

/// Energy above the well bottom in a trap resting at `center`.
pub fn rest_frame_energy(potential: &PotentialModel, mass: f64, center: f64, state: ClassicalState) -> f64 {
    state.p * state.p / (2.0 * mass) + potential.energy(mass, state.q - center) - potential.minimum_energy()
}

/// Integrate `m q̈ = -∂U(q - x_0(t))/∂q` (plus the mode's extra term) with RK4.
///
/// Excess energies are measured against the bottom of the trap at rest in
/// its initial and final positions. For bounded potentials, leaving the
/// central well is an escape error.
pub fn integrate_classical<M: TrapMotion + ?Sized>(
    path: &M,
    potential: &PotentialModel,
    mass: f64,
    mode: DrivingMode,
    initial: ClassicalState,
    steps: usize,
) -> Result<ClassicalRun> {
    let (report, trajectory) = run_classical(path, potential, mass, mode, initial, steps, |_| *potential, true)?;
    Ok(ClassicalRun {
        trajectory: trajectory.expect("trajectory was recorded"),
        report,
    })
}

/// Shared driver; `potential_at(i)` gives the (possibly perturbed) shape
/// during step `i`, while `nominal` is used for the rest-frame energies.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_classical<M, P>(
    path: &M,
    nominal: &PotentialModel,
    mass: f64,
    mode: DrivingMode,
    initial: ClassicalState,
    steps: usize,
    potential_at: P,
    record: bool,
) -> Result<(ExcitationReport, Option<SampledPath>)>
where
    M: TrapMotion + ?Sized,
    P: Fn(usize) -> PotentialModel,
{
    nominal.validate()?;
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::invalid("mass must be positive"));
    }
    if steps < MIN_STEPS {
        return Err(Error::invalid(format!(
            "need at least {MIN_STEPS} integration steps, got {steps}"
        )));
    }
    ClassicalState::new(initial.q, initial.p)?;

    let t_f = path.duration();
    let inv_m = 1.0 / mass;
    let rhs = |i: usize, t: f64, side: Side, y: [f64; 2]| {
        let k = path.kinematics(t, side);
        let u = potential_at(i);
        let force = u.force(mass, y[0] - k.position);
        match mode {
            DrivingMode::Plain => [y[1] * inv_m, force],
            DrivingMode::Compensating => [y[1] * inv_m, force + mass * k.acceleration],
            DrivingMode::Counterdiabatic => [y[1] * inv_m + k.velocity, force],
        }
    };

    let n = steps + 1;
    let mut positions = Vec::with_capacity(if record { n } else { 0 });
    let mut velocities = Vec::with_capacity(if record { n } else { 0 });
    let mut accelerations = Vec::with_capacity(if record { n } else { 0 });
    let mut max_transient = 0.0f64;
    let mut max_displacement = 0.0f64;
    let u_min = nominal.minimum_energy();

    let observe = |i: usize, t: f64, y: [f64; 2]| -> Result<()> {
        // Nodes are observed after the step, so the left limit applies except at t = 0.
        let side = if i == 0 { Side::Right } else { Side::Left };
        let k = path.kinematics(t, side);
        let rel = y[0] - k.position;
        let u = potential_at(i.min(steps - 1));
        if u.is_bounded() && !u.in_central_well(rel) {
            return Err(Error::Escape {
                time: t,
                detail: format!("relative displacement {rel:.6} left the central well"),
            });
        }
        let qdot = rhs(i.min(steps - 1), t, side, y)[0];
        let v_rel = qdot - k.velocity;
        let transient = 0.5 * mass * v_rel * v_rel + nominal.energy(mass, rel) - u_min;
        max_transient = max_transient.max(transient);
        max_displacement = max_displacement.max((rel - nominal.equilibrium()).abs());
        if record {
            let d = rhs(i.min(steps - 1), t, side, y);
            positions.push(y[0]);
            velocities.push(d[0]);
            accelerations.push(d[1] * inv_m);
        }
        Ok(())
    };

    let y = rk4_over(path, steps, [initial.q, initial.p], rhs, observe)?;
    if !(y[0].is_finite() && y[1].is_finite()) {
        return Err(Error::Numerical(
            "classical integration produced a non-finite state".into(),
        ));
    }
    let final_state = ClassicalState { q: y[0], p: y[1] };
    let report = ExcitationReport {
        mode,
        final_excess_energy: rest_frame_energy(nominal, mass, path.final_position(), final_state),
        initial_excess_energy: rest_frame_energy(nominal, mass, path.initial_position(), initial),
        fidelity: None,
        max_transient_energy: max_transient,
        max_relative_displacement: max_displacement,
        non_physical: mode == DrivingMode::Counterdiabatic,
    };
    let trajectory = if record {
        Some(SampledPath::new(t_f, positions, velocities, accelerations)?)
    } else {
        None
    };
    Ok((report, trajectory))
}
