use serde::{Deserialize, Serialize};

use super::motion::{Kinematics, Side, TrapMotion};
use super::sampled::SampledPath;
use crate::error::{Error, Result};

/// Highest polynomial degree accepted for a path.
pub const MAX_DEGREE: usize = 31;

/// What a path describes: the centre of the transported state or the trap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathRole {
    Reference,
    Trap,
}

/// Polynomial path `x(t) = Σ c_k s^k` in scaled time `s = t / duration`.
///
/// Derivatives are taken analytically from the coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyFields", into = "PolyFields")]
pub struct PolyPath {
    role: PathRole,
    duration: f64,
    coefficients: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolyFields {
    role: PathRole,
    duration: f64,
    coefficients: Vec<f64>,
}

impl TryFrom<PolyFields> for PolyPath {
    type Error = Error;

    fn try_from(f: PolyFields) -> Result<Self> {
        PolyPath::new(f.role, f.duration, f.coefficients)
    }
}

impl From<PolyPath> for PolyFields {
    fn from(p: PolyPath) -> Self {
        PolyFields {
            role: p.role,
            duration: p.duration,
            coefficients: p.coefficients,
        }
    }
}

impl PolyPath {
    pub fn new(role: PathRole, duration: f64, mut coefficients: Vec<f64>) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::invalid("path duration must be positive and finite"));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("path coefficients must be finite"));
        }
        if coefficients.is_empty() {
            coefficients.push(0.0);
        }
        if coefficients.len() > MAX_DEGREE + 1 {
            return Err(Error::invalid(format!(
                "polynomial degree {} exceeds the cap of {MAX_DEGREE}",
                coefficients.len() - 1
            )));
        }
        Ok(PolyPath {
            role,
            duration,
            coefficients,
        })
    }

    pub fn role(&self) -> PathRole {
        self.role
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn with_role(mut self, role: PathRole) -> Self {
        self.role = role;
        self
    }

    pub(crate) fn expect_role(&self, role: PathRole) -> Result<()> {
        if self.role == role {
            Ok(())
        } else {
            Err(Error::RoleMismatch {
                expected: role,
                found: self.role,
            })
        }
    }

    /// Coefficients of `d^order x / ds^order` as a polynomial in `s`.
    pub fn scaled_derivative(&self, order: usize) -> Vec<f64> {
        derivative_coefficients(&self.coefficients, order)
    }

    /// `d^order x / dt^order` at time `t`.
    pub fn derivative(&self, order: usize, t: f64) -> f64 {
        let s = t / self.duration;
        horner_derivative(&self.coefficients, order, s) / self.duration.powi(order as i32)
    }

    pub fn position(&self, t: f64) -> f64 {
        self.derivative(0, t)
    }

    pub fn velocity(&self, t: f64) -> f64 {
        self.derivative(1, t)
    }

    pub fn acceleration(&self, t: f64) -> f64 {
        self.derivative(2, t)
    }

    pub fn scaled(&self, factor: f64) -> PolyPath {
        PolyPath {
            role: self.role,
            duration: self.duration,
            coefficients: self.coefficients.iter().map(|c| c * factor).collect(),
        }
    }

    /// Uniform sampling with `n` points over `[0, duration]`.
    pub fn sample(&self, n: usize) -> Result<SampledPath> {
        if n < 2 {
            return Err(Error::invalid("sampling needs at least two points"));
        }
        let dt = self.duration / (n - 1) as f64;
        let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let positions = times.iter().map(|&t| self.position(t)).collect();
        let velocities = times.iter().map(|&t| self.velocity(t)).collect();
        let accelerations = times.iter().map(|&t| self.acceleration(t)).collect();
        SampledPath::new(self.duration, positions, velocities, accelerations)
    }

    /// Largest `|d^order x / dt^order|` over `n` uniformly spaced points.
    pub fn max_abs_derivative(&self, order: usize, n: usize) -> f64 {
        let deriv = self.scaled_derivative(order);
        let scale = self.duration.powi(order as i32);
        (0..n)
            .map(|i| horner(&deriv, i as f64 / (n - 1) as f64).abs())
            .fold(0.0, f64::max)
            / scale
    }
}

pub(crate) fn derivative_coefficients(coefficients: &[f64], order: usize) -> Vec<f64> {
    if order >= coefficients.len() {
        return vec![0.0];
    }
    (order..coefficients.len())
        .map(|k| coefficients[k] * falling_factorial(k, order))
        .collect()
}

/// `k (k-1) ... (k-order+1)`
pub(crate) fn falling_factorial(k: usize, order: usize) -> f64 {
    (0..order).map(|j| (k - j) as f64).product()
}

pub(crate) fn horner(coefficients: &[f64], s: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, &c| acc * s + c)
}

fn horner_derivative(coefficients: &[f64], order: usize, s: f64) -> f64 {
    if order >= coefficients.len() {
        return 0.0;
    }
    coefficients[order..]
        .iter()
        .enumerate()
        .rev()
        .fold(0.0, |acc, (j, &c)| acc * s + c * falling_factorial(j + order, order))
}

impl TrapMotion for PolyPath {
    fn duration(&self) -> f64 {
        self.duration
    }

    fn kinematics(&self, t: f64, _side: Side) -> Kinematics {
        let t = t.clamp(0.0, self.duration);
        Kinematics {
            position: self.position(t),
            velocity: self.velocity(t),
            acceleration: self.acceleration(t),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_hand_computation() {
        // x(s) = 1 + 2s + 3s^2 + 4s^3 with duration 2
        let p = PolyPath::new(PathRole::Trap, 2.0, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let t = 1.0; // s = 0.5
        assert!((p.position(t) - (1.0 + 1.0 + 0.75 + 0.5)).abs() < 1e-15);
        // dx/ds = 2 + 6s + 12 s^2 = 2 + 3 + 3 = 8 -> /2
        assert!((p.velocity(t) - 4.0).abs() < 1e-15);
        // d2x/ds2 = 6 + 24 s = 18 -> /4
        assert!((p.acceleration(t) - 4.5).abs() < 1e-15);
        assert_eq!(p.derivative(4, t), 0.0);
        assert_eq!(p.scaled_derivative(2), vec![6.0, 24.0]);
    }

    #[test]
    fn degree_cap() {
        assert!(PolyPath::new(PathRole::Trap, 1.0, vec![0.0; 32]).is_ok());
        assert!(PolyPath::new(PathRole::Trap, 1.0, vec![0.0; 33]).is_err());
        assert!(PolyPath::new(PathRole::Trap, 0.0, vec![0.0]).is_err());
    }

    #[test]
    fn json_shape() {
        let p = PolyPath::new(PathRole::Reference, 1.5, vec![0.0, 1.0]).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, r#"{"role":"reference","duration":1.5,"coefficients":[0.0,1.0]}"#);
        let back: PolyPath = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }
}
