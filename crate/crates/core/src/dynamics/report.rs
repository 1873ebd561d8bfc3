use serde::{Deserialize, Serialize};

/// How the transport Hamiltonian is driven.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrivingMode {
    /// `p²/2m + U(q - x_0)`
    #[default]
    Plain,
    /// Adds the linear term `-m q ẍ_0` that cancels the inertial force.
    Compensating,
    /// Adds the momentum coupling `p ẋ_0`. Not realisable in most traps;
    /// kept as an exactness reference.
    Counterdiabatic,
}

/// Outcome of one transport simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationReport {
    pub mode: DrivingMode,
    /// Energy above the ground level of the trap at its final position.
    pub final_excess_energy: f64,
    /// Same measure for the initial state in the initial trap.
    pub initial_excess_energy: f64,
    /// Overlap with the final-trap ground state (quantum runs only).
    pub fidelity: Option<f64>,
    /// Largest energy in the co-moving trap frame during transport.
    pub max_transient_energy: f64,
    /// Largest `|q - x_0(t)|` (or `|⟨q⟩ - x_0(t)|` for quantum runs).
    pub max_relative_displacement: f64,
    /// Set for counterdiabatic driving, which is an idealised reference.
    pub non_physical: bool,
}
