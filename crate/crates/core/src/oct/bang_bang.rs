use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate_classical, ClassicalState, DrivingMode, PotentialModel};
use crate::error::{Error, Result};
use crate::trajectory::{default_steps, Jump, SampledPath, TransportTask};

/// Samples used for the returned bang-bang paths (odd, so the switch is a node).
pub const BANG_BANG_SAMPLES: usize = 2001;

/// Bound on the trap-to-state distance, with optional bounds on its first
/// and second time derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConstraint {
    pub max_relative_displacement: f64,
    #[serde(default)]
    pub max_displacement_rate: Option<f64>,
    #[serde(default)]
    pub max_displacement_curvature: Option<f64>,
}

impl ControlConstraint {
    pub fn new(max_relative_displacement: f64) -> Result<Self> {
        let c = ControlConstraint {
            max_relative_displacement,
            max_displacement_rate: None,
            max_displacement_curvature: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_derivative_bounds(mut self, rate: Option<f64>, curvature: Option<f64>) -> Result<Self> {
        self.max_displacement_rate = rate;
        self.max_displacement_curvature = curvature;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.max_relative_displacement) {
            return Err(Error::invalid("the displacement bound must be positive and finite"));
        }
        if self.max_displacement_rate.is_some_and(|v| !positive(v))
            || self.max_displacement_curvature.is_some_and(|v| !positive(v))
        {
            return Err(Error::invalid("derivative bounds must be positive and finite"));
        }
        Ok(())
    }
}

/// Minimal-time rest-to-rest protocol under `|x_0 - x_c| ≤ δ`.
#[derive(Debug, Clone)]
pub struct BangBang {
    pub t_f: f64,
    /// Magnitude of the reference acceleration, `ω² δ`.
    pub acceleration: f64,
    /// `None` when the distance is zero.
    pub reference: Option<SampledPath>,
    pub trap: Option<SampledPath>,
    /// Final excess energy of a classical particle moved by `trap`.
    pub verified_excess: f64,
}

/// Since `x_0 - x_c = ẍ_c/ω²`, the bound caps `|ẍ_c|` at `ω²δ`; the fastest
/// rest-to-rest reference accelerates at that cap for the first half and
/// decelerates for the second, giving `t_f = (2/ω) sqrt(d/δ)`. The induced
/// trap path jumps by `δ` at the start and end and by `-2δ` at the switch.
pub fn min_time_bang_bang(task: &TransportTask, delta: f64) -> Result<BangBang> {
    ControlConstraint::new(delta)?;
    let (m, w, d) = (task.mass(), task.omega(), task.distance());
    let a = w * w * delta;
    if d == 0.0 {
        return Ok(BangBang {
            t_f: 0.0,
            acceleration: a,
            reference: None,
            trap: None,
            verified_excess: 0.0,
        });
    }
    let t_f = 2.0 * (d / a).sqrt();
    let n = BANG_BANG_SAMPLES;
    let mid = n / 2;
    let h = t_f / (n - 1) as f64;
    let mut xc = Vec::with_capacity(n);
    let mut vc = Vec::with_capacity(n);
    let mut ac = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * h;
        if i == n - 1 {
            xc.push(d);
            vc.push(0.0);
            ac.push(0.0);
        } else if i < mid {
            xc.push(0.5 * a * t * t);
            vc.push(a * t);
            ac.push(a);
        } else {
            let r = t_f - t;
            xc.push(d - 0.5 * a * r * r);
            vc.push(a * r);
            ac.push(-a);
        }
    }
    let acc_jumps = vec![
        Jump {
            index: 0,
            position: 0.0,
            velocity: 0.0,
            acceleration: a,
        },
        Jump {
            index: mid,
            position: 0.0,
            velocity: 0.0,
            acceleration: -2.0 * a,
        },
        Jump {
            index: n - 1,
            position: 0.0,
            velocity: 0.0,
            acceleration: a,
        },
    ];
    let reference = SampledPath::new(t_f, xc.clone(), vc.clone(), ac.clone())?.with_jumps(acc_jumps.clone())?;

    let shift = |acc: f64| acc / (w * w);
    let x0: Vec<f64> = xc.iter().zip(&ac).map(|(x, acc)| x + shift(*acc)).collect();
    let trap_jumps = acc_jumps
        .iter()
        .map(|j| Jump {
            position: shift(j.acceleration),
            ..*j
        })
        .collect();
    // x_c is piecewise quadratic, so x_0 shares its velocity and acceleration.
    let trap = SampledPath::new(t_f, x0, vc, ac)?.with_jumps(trap_jumps)?;

    let potential = PotentialModel::Harmonic { omega: w };
    let run = integrate_classical(
        &trap,
        &potential,
        m,
        DrivingMode::Plain,
        ClassicalState::default(),
        2 * default_steps(w, t_f),
    )?;
    Ok(BangBang {
        t_f,
        acceleration: a,
        reference: Some(reference),
        trap: Some(trap),
        verified_excess: run.report.final_excess_energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{Side, TrapMotion};

    #[test]
    fn textbook_case() {
        let task = TransportTask::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let bb = min_time_bang_bang(&task, 0.25).unwrap();
        assert!((bb.t_f - 4.0).abs() < 1e-12);
        assert!(
            bb.verified_excess.abs() <= 1e-8 * task.energy_scale(),
            "{}",
            bb.verified_excess
        );
        let trap = bb.trap.unwrap();
        assert!((trap.kinematics(0.0, Side::Right).position - 0.25).abs() < 1e-12);
        assert!(trap.kinematics(0.0, Side::Left).position.abs() < 1e-12);
        assert!((trap.kinematics(2.0, Side::Left).position - 0.75).abs() < 1e-12);
        assert!((trap.kinematics(2.0, Side::Right).position - 0.25).abs() < 1e-12);
        assert!((trap.final_position() - 1.0).abs() < 1e-12);
        let reference = bb.reference.unwrap();
        let max_gap = (0..=400)
            .map(|i| 4.0 * i as f64 / 400.0)
            .map(|t| (trap.kinematics(t, Side::Right).position - reference.kinematics(t, Side::Right).position).abs())
            .fold(0.0, f64::max);
        assert!((max_gap - 0.25).abs() < 1e-12);
    }

    #[test]
    fn limits() {
        let task = TransportTask::new(1.0, 1.0, 0.0, 1.0).unwrap();
        let bb = min_time_bang_bang(&task, 0.1).unwrap();
        assert_eq!(bb.t_f, 0.0);
        assert!(bb.trap.is_none());
        let task = TransportTask::new(1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(min_time_bang_bang(&task, 1e12).unwrap().t_f < 1e-5);
        assert!(min_time_bang_bang(&task, 0.0).is_err());
    }
}
