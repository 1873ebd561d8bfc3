use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::PotentialModel;
use crate::error::{Error, Result};

/// Which lattice parameter fluctuates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseTarget {
    /// `Φ → Φ - λ ξ`
    Position,
    /// `A → A (1 + λ ξ)`
    Amplitude,
    /// `K → K (1 + λ ξ)`, stretching about the trap centre
    Wavenumber,
}

/// Statistics of the stationary process `ξ(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseKind {
    /// Delta-correlated, `α(τ) = D δ(τ)`.
    White { intensity: f64 },
    /// Ornstein-Uhlenbeck, `α(τ) = c exp(-|τ|/τ_c)`.
    Ou { variance: f64, correlation_time: f64 },
}

impl NoiseKind {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseKind::White { intensity } => intensity.is_finite() && intensity > 0.0,
            NoiseKind::Ou {
                variance,
                correlation_time,
            } => variance.is_finite() && variance > 0.0 && correlation_time.is_finite() && correlation_time > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "noise parameters must be positive and finite: {self:?}"
            )))
        }
    }

    /// `S(ω) = ∫ α(τ) e^{-iωτ} dτ`.
    pub fn spectral_density(&self, omega: f64) -> f64 {
        match *self {
            NoiseKind::White { intensity } => intensity,
            NoiseKind::Ou {
                variance,
                correlation_time,
            } => 2.0 * variance * correlation_time / (1.0 + (omega * correlation_time).powi(2)),
        }
    }

    /// Variance of one sample held over a step of length `dt`.
    pub fn sample_variance(&self, dt: f64) -> f64 {
        match *self {
            NoiseKind::White { intensity } => intensity / dt,
            NoiseKind::Ou { variance, .. } => variance,
        }
    }

    /// Largest step that resolves the correlation time.
    pub fn max_step(&self) -> Option<f64> {
        match *self {
            NoiseKind::White { .. } => None,
            NoiseKind::Ou { correlation_time, .. } => Some(correlation_time / 10.0),
        }
    }

    /// Piecewise-constant samples for `n` steps of length `dt`.
    pub fn sample(&self, dt: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
        match *self {
            NoiseKind::White { intensity } => generate_white(dt, n, intensity, seed),
            NoiseKind::Ou {
                variance,
                correlation_time,
            } => generate_ou(dt, n, variance, correlation_time, seed),
        }
    }
}

/// A noisy lattice parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub target: NoiseTarget,
    pub kind: NoiseKind,
    pub lambda: f64,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(target: NoiseTarget, kind: NoiseKind, lambda: f64, seed: u64) -> Result<Self> {
        let m = NoiseModel {
            target,
            kind,
            lambda,
            seed,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.kind.validate()?;
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid("noise strength lambda must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_kind(mut self, kind: NoiseKind) -> Self {
        self.kind = kind;
        self
    }

    /// Seed of realization `index`.
    pub fn realization_seed(&self, index: usize) -> u64 {
        self.seed ^ index as u64
    }

    /// The lattice with this noise's parameter shifted by the sample `xi`.
    pub fn perturb(&self, lattice: &PotentialModel, xi: f64) -> PotentialModel {
        let PotentialModel::Lattice {
            depth,
            wavenumber,
            phase,
        } = *lattice
        else {
            return *lattice;
        };
        let e = self.lambda * xi;
        match self.target {
            NoiseTarget::Position => PotentialModel::Lattice {
                depth,
                wavenumber,
                phase: phase - e,
            },
            NoiseTarget::Amplitude => PotentialModel::Lattice {
                depth: depth * (1.0 + e),
                wavenumber,
                phase,
            },
            NoiseTarget::Wavenumber => PotentialModel::Lattice {
                depth,
                wavenumber: wavenumber * (1.0 + e),
                phase,
            },
        }
    }
}

fn check_step(dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("noise time step must be positive"));
    }
    Ok(())
}

/// Exactly discretised Ornstein-Uhlenbeck samples, started from the
/// stationary distribution. A zero variance gives zeros.
pub fn generate_ou(dt: f64, n: usize, variance: f64, correlation_time: f64, seed: u64) -> Result<Vec<f64>> {
    check_step(dt)?;
    if !(variance.is_finite() && variance >= 0.0 && correlation_time.is_finite() && correlation_time > 0.0) {
        return Err(Error::invalid("OU variance must be >= 0 and correlation time > 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho = (-dt / correlation_time).exp();
    let kick = (variance * (1.0 - rho * rho)).sqrt();
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return Ok(out);
    }
    let g: f64 = StandardNormal.sample(&mut rng);
    let mut xi = variance.sqrt() * g;
    out.push(xi);
    for _ in 1..n {
        let g: f64 = StandardNormal.sample(&mut rng);
        xi = xi * rho + kick * g;
        out.push(xi);
    }
    Ok(out)
}

/// Independent normals with variance `D/dt`: a piecewise-constant white
/// drive whose integral has a flat spectrum of level `D`.
pub fn generate_white(dt: f64, n: usize, intensity: f64, seed: u64) -> Result<Vec<f64>> {
    check_step(dt)?;
    if !(intensity.is_finite() && intensity >= 0.0) {
        return Err(Error::invalid("white-noise intensity must be >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = (intensity / dt).sqrt();
    Ok((0..n)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            s * g
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ou_statistics() {
        let (c, tau, dt) = (0.7, 2.0, 0.1);
        let xs = generate_ou(dt, 1_000_000, c, tau, 3).unwrap();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!((var - c).abs() < 0.02 * c, "{var}");
        for lag_steps in [5usize, 20, 40, 60] {
            let lag = lag_steps as f64 * dt;
            let acf = xs.iter().zip(&xs[lag_steps..]).map(|(a, b)| a * b).sum::<f64>() / (n - lag_steps as f64);
            let expected = c * (-lag / tau).exp();
            assert!(
                (acf - expected).abs() < 0.05 * expected,
                "lag {lag}: {acf} vs {expected}"
            );
        }
    }

    #[test]
    fn zero_strength_gives_zeros() {
        assert!(generate_ou(0.1, 100, 0.0, 1.0, 1).unwrap().iter().all(|&x| x == 0.0));
        assert!(generate_white(0.1, 100, 0.0, 1).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn seeds_are_reproducible_and_independent() {
        let a = generate_white(0.01, 100_000, 1.0, 11).unwrap();
        let b = generate_white(0.01, 100_000, 1.0, 11).unwrap();
        assert_eq!(a, b);
        let c = generate_white(0.01, 100_000, 1.0, 12).unwrap();
        let n = a.len() as f64;
        let (sa, sc) = (
            a.iter().map(|x| x * x).sum::<f64>(),
            c.iter().map(|x| x * x).sum::<f64>(),
        );
        let corr = a.iter().zip(&c).map(|(x, y)| x * y).sum::<f64>() / (sa * sc).sqrt();
        assert!(corr.abs() < 3.0 / n.sqrt());
        assert!((sa / n - 100.0).abs() < 2.0);
    }

    #[test]
    fn perturbation_maps() {
        let lat = PotentialModel::Lattice {
            depth: 2.0,
            wavenumber: 3.0,
            phase: 0.5,
        };
        let kind = NoiseKind::White { intensity: 1.0 };
        let pos = NoiseModel::new(NoiseTarget::Position, kind, 0.1, 0).unwrap();
        assert_eq!(
            pos.perturb(&lat, 2.0),
            PotentialModel::Lattice {
                depth: 2.0,
                wavenumber: 3.0,
                phase: 0.3
            }
        );
        let amp = NoiseModel::new(NoiseTarget::Amplitude, kind, 0.1, 0).unwrap();
        assert!(matches!(amp.perturb(&lat, 1.0), PotentialModel::Lattice { depth, .. } if (depth - 2.2).abs() < 1e-15));
        let k = NoiseModel::new(NoiseTarget::Wavenumber, kind, 0.1, 0).unwrap();
        assert!(
            matches!(k.perturb(&lat, -1.0), PotentialModel::Lattice { wavenumber, .. } if (wavenumber - 2.7).abs() < 1e-15)
        );
        assert!(NoiseModel::new(
            NoiseTarget::Position,
            NoiseKind::Ou {
                variance: 1.0,
                correlation_time: 0.0
            },
            0.1,
            0
        )
        .is_err());
        assert!(NoiseModel::new(NoiseTarget::Position, kind, -0.1, 0).is_err());
    }
}
