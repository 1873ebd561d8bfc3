use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mass and reduced Planck constant of the transported particle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub mass: f64,
    pub hbar: f64,
}

impl Particle {
    pub fn new(mass: f64, hbar: f64) -> Result<Self> {
        if !(mass.is_finite() && mass > 0.0 && hbar.is_finite() && hbar > 0.0) {
            return Err(Error::invalid("particle mass and hbar must be positive and finite"));
        }
        Ok(Particle { mass, hbar })
    }
}

impl From<&crate::trajectory::TransportTask> for Particle {
    fn from(task: &crate::trajectory::TransportTask) -> Self {
        Particle {
            mass: task.mass(),
            hbar: task.hbar(),
        }
    }
}

/// Trap shape, evaluated at the displaced coordinate `y = q - x_0(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialModel {
    /// `m ω² y² / 2`
    Harmonic { omega: f64 },
    /// `A sin²(K y + Φ)`
    Lattice {
        depth: f64,
        wavenumber: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `-U0 exp(-2 y² / w²)`
    Gaussian { depth: f64, waist: f64 },
}

impl PotentialModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            PotentialModel::Harmonic { omega } => omega.is_finite() && omega > 0.0,
            PotentialModel::Lattice {
                depth,
                wavenumber,
                phase,
            } => depth.is_finite() && depth > 0.0 && wavenumber.is_finite() && wavenumber > 0.0 && phase.is_finite(),
            PotentialModel::Gaussian { depth, waist } => {
                depth.is_finite() && depth > 0.0 && waist.is_finite() && waist > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid potential parameters: {self:?}")))
        }
    }

    pub fn energy(&self, mass: f64, y: f64) -> f64 {
        match *self {
            PotentialModel::Harmonic { omega } => 0.5 * mass * omega * omega * y * y,
            PotentialModel::Lattice {
                depth,
                wavenumber,
                phase,
            } => depth * (wavenumber * y + phase).sin().powi(2),
            PotentialModel::Gaussian { depth, waist } => -depth * (-2.0 * y * y / (waist * waist)).exp(),
        }
    }

    /// `-dU/dy`
    pub fn force(&self, mass: f64, y: f64) -> f64 {
        match *self {
            PotentialModel::Harmonic { omega } => -mass * omega * omega * y,
            PotentialModel::Lattice {
                depth,
                wavenumber,
                phase,
            } => -depth * wavenumber * (2.0 * (wavenumber * y + phase)).sin(),
            PotentialModel::Gaussian { depth, waist } => {
                let w2 = waist * waist;
                -4.0 * depth * y / w2 * (-2.0 * y * y / w2).exp()
            }
        }
    }

    /// Bottom of the central well.
    pub fn minimum_energy(&self) -> f64 {
        match *self {
            PotentialModel::Gaussian { depth, .. } => -depth,
            _ => 0.0,
        }
    }

    /// Displacement of the central-well minimum from the trap position.
    pub fn equilibrium(&self) -> f64 {
        match *self {
            PotentialModel::Lattice { wavenumber, phase, .. } => -phase / wavenumber,
            _ => 0.0,
        }
    }

    /// Small-oscillation angular frequency at the bottom of the well.
    pub fn frequency(&self, mass: f64) -> f64 {
        match *self {
            PotentialModel::Harmonic { omega } => omega,
            PotentialModel::Lattice { depth, wavenumber, .. } => wavenumber * (2.0 * depth / mass).sqrt(),
            PotentialModel::Gaussian { depth, waist } => (4.0 * depth / (mass * waist * waist)).sqrt(),
        }
    }

    /// Whether `y` lies inside the central well (always true for harmonic).
    ///
    /// Lattice wells end at the neighbouring maxima; the Gaussian support is
    /// taken as `|y| < 2 w`.
    pub fn in_central_well(&self, y: f64) -> bool {
        match *self {
            PotentialModel::Harmonic { .. } => true,
            PotentialModel::Lattice { wavenumber, phase, .. } => (wavenumber * y + phase).abs() < FRAC_PI_2,
            PotentialModel::Gaussian { waist, .. } => y.abs() < 2.0 * waist,
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, PotentialModel::Harmonic { .. })
    }
}
