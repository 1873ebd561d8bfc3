use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant in J·s.
pub const HBAR_SI: f64 = 1.054_571_817e-34;

/// Unit system used for every quantity in a task.
///
/// `Natural` is the dimensionless default (ħ = 1). `Scaled` ties the code
/// units to SI so that reports can be converted on output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UnitSystem {
    #[default]
    Natural,
    Scaled {
        length_m: f64,
        time_s: f64,
        mass_kg: f64,
    },
}

impl UnitSystem {
    pub fn hbar(&self) -> f64 {
        match *self {
            UnitSystem::Natural => 1.0,
            UnitSystem::Scaled {
                length_m,
                time_s,
                mass_kg,
            } => HBAR_SI * time_s / (mass_kg * length_m * length_m),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let UnitSystem::Scaled {
            length_m,
            time_s,
            mass_kg,
        } = *self
        {
            for (name, v) in [("length_m", length_m), ("time_s", time_s), ("mass_kg", mass_kg)] {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::invalid(format!("unit scale {name} must be positive and finite")));
                }
            }
        }
        Ok(())
    }

    pub fn length_to_si(&self, x: f64) -> f64 {
        match *self {
            UnitSystem::Natural => x,
            UnitSystem::Scaled { length_m, .. } => x * length_m,
        }
    }

    pub fn time_to_si(&self, t: f64) -> f64 {
        match *self {
            UnitSystem::Natural => t,
            UnitSystem::Scaled { time_s, .. } => t * time_s,
        }
    }

    pub fn energy_to_si(&self, e: f64) -> f64 {
        match *self {
            UnitSystem::Natural => e,
            UnitSystem::Scaled {
                length_m,
                time_s,
                mass_kg,
            } => e * mass_kg * length_m * length_m / (time_s * time_s),
        }
    }
}

/// The transport problem: carry a particle of `mass` in a trap of angular
/// frequency `omega` over `distance` in time `duration`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TaskFields", into = "TaskFields")]
pub struct TransportTask {
    mass: f64,
    omega: f64,
    distance: f64,
    duration: f64,
    units: UnitSystem,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskFields {
    #[serde(default = "one")]
    mass: f64,
    #[serde(default = "one")]
    omega: f64,
    distance: f64,
    duration: f64,
    #[serde(default)]
    units: UnitSystem,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<TaskFields> for TransportTask {
    type Error = Error;

    fn try_from(f: TaskFields) -> Result<Self> {
        TransportTask::with_units(f.mass, f.omega, f.distance, f.duration, f.units)
    }
}

impl From<TransportTask> for TaskFields {
    fn from(t: TransportTask) -> Self {
        TaskFields {
            mass: t.mass,
            omega: t.omega,
            distance: t.distance,
            duration: t.duration,
            units: t.units,
        }
    }
}

impl TransportTask {
    pub fn new(mass: f64, omega: f64, distance: f64, duration: f64) -> Result<Self> {
        Self::with_units(mass, omega, distance, duration, UnitSystem::Natural)
    }

    pub fn with_units(mass: f64, omega: f64, distance: f64, duration: f64, units: UnitSystem) -> Result<Self> {
        let all_finite = [mass, omega, distance, duration].iter().all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::invalid("task fields must be finite"));
        }
        if mass <= 0.0 || omega <= 0.0 || duration <= 0.0 {
            return Err(Error::invalid("mass, omega and duration must be strictly positive"));
        }
        if distance < 0.0 {
            return Err(Error::invalid("distance must be non-negative"));
        }
        units.validate()?;
        Ok(TransportTask {
            mass,
            omega,
            distance,
            duration,
            units,
        })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn units(&self) -> UnitSystem {
        self.units
    }

    pub fn hbar(&self) -> f64 {
        self.units.hbar()
    }

    /// Same task with a different duration.
    pub fn with_duration(&self, duration: f64) -> Result<Self> {
        Self::with_units(self.mass, self.omega, self.distance, duration, self.units)
    }

    pub fn with_distance(&self, distance: f64) -> Result<Self> {
        Self::with_units(self.mass, self.omega, distance, self.duration, self.units)
    }

    /// Energy scale `m ω² d² / 2` used to express excitations dimensionlessly.
    pub fn energy_scale(&self) -> f64 {
        0.5 * self.mass * self.omega * self.omega * self.distance * self.distance
    }
}

/// Lower bound `2d/t_f²` on the peak trap acceleration of any rest-to-rest
/// transport (mean value theorem).
pub fn peak_acceleration_bound(task: &TransportTask) -> f64 {
    2.0 * task.distance / (task.duration * task.duration)
}

/// Time scale `sqrt(m d² / (2 ħ ω))`; transports much slower than this are
/// adiabatic.
pub fn adiabatic_timescale(task: &TransportTask) -> f64 {
    (task.mass * task.distance * task.distance / (2.0 * task.hbar() * task.omega)).sqrt()
}
