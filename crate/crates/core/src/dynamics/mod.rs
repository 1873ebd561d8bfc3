//! Classical and quantum simulation of a particle in a rigidly moving trap.

mod classical;
mod potential;
mod quantum;
mod report;

pub(crate) use classical::run_classical;
pub use classical::{integrate_classical, rest_frame_energy, ClassicalRun, ClassicalState};
pub use potential::{Particle, PotentialModel};
pub(crate) use quantum::run_quantum;
pub use quantum::{
    default_time_step, energy_expectation, excess_energy_quantum, fidelity, ground_state, ground_width,
    propagate_quantum, propagate_recorded, simulate_quantum, Grid, GroundState, QuantumRun, QuantumSimulation,
    QuantumState, Snapshot, BOUNDARY_DENSITY_LIMIT, ESCAPE_PROBABILITY, GROUND_STATE_TOLERANCE,
};
pub use report::{DrivingMode, ExcitationReport};
