use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::moments::phase_moments;
use crate::error::{Error, Result};
use crate::trajectory::{PolyPath, SampledPath, Side, TrapMotion, TrapPath};

/// How trap-velocity and position discontinuities are treated.
///
/// With `Flagged`, the trap is taken to rest before `t = 0` and after `t_f`;
/// velocity jumps at the boundaries and annotated jumps of a sampled path
/// contribute their delta terms. With `None` any such jump is an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discontinuities {
    #[default]
    None,
    Flagged,
}

const SMOOTHNESS_TOL: f64 = 1e-9;
const MIN_QUADRATURE_INTERVALS: usize = 4096;

/// `ã(ω) = ∫_0^{t_f} ẍ_0(t) e^{iωt} dt` for a trap path.
pub fn acceleration_transform(path: &TrapPath, omega: f64, discontinuities: Discontinuities) -> Result<Complex64> {
    match path {
        TrapPath::Poly(p) => poly_transform(p, omega, discontinuities),
        TrapPath::Sampled(p) => sampled_transform(p, omega, discontinuities),
    }
}

/// Final excitation energy `(m/2) |ã|²` of a particle driven from rest.
pub fn excitation_from_transform(mass: f64, transform: Complex64) -> f64 {
    0.5 * mass * transform.norm_sqr()
}

/// Convenience: `excitation_from_transform(mass, acceleration_transform(..))`.
pub fn excitation(path: &TrapPath, mass: f64, omega: f64, discontinuities: Discontinuities) -> Result<f64> {
    Ok(excitation_from_transform(
        mass,
        acceleration_transform(path, omega, discontinuities)?,
    ))
}

fn check_omega(omega: f64) -> Result<()> {
    if omega.is_finite() && omega >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("transform frequency must be finite and non-negative"))
    }
}

fn velocity_scale(p: &PolyPath) -> f64 {
    p.coefficients().iter().fold(0.0f64, |m, c| m.max(c.abs())) / p.duration()
}

fn boundary_velocities(p: &PolyPath, discontinuities: Discontinuities) -> Result<(f64, f64)> {
    let (v0, v1) = (p.velocity(0.0), p.velocity(p.duration()));
    if discontinuities == Discontinuities::None {
        let tol = SMOOTHNESS_TOL * velocity_scale(p);
        if v0.abs() > tol || v1.abs() > tol {
            return Err(Error::UnflaggedDiscontinuity(format!(
                "trap velocity is {v0:.3e} at t = 0 and {v1:.3e} at t_f; flag the protocol as discontinuous"
            )));
        }
        return Ok((0.0, 0.0));
    }
    Ok((v0, v1))
}

pub(crate) fn poly_transform(p: &PolyPath, omega: f64, discontinuities: Discontinuities) -> Result<Complex64> {
    check_omega(omega)?;
    let (v0, v1) = boundary_velocities(p, discontinuities)?;
    let t_f = p.duration();
    let theta = omega * t_f;
    let accel = p.scaled_derivative(2);
    let m = phase_moments(theta, accel.len());
    let interior: Complex64 = accel.iter().zip(&m).map(|(a, mk)| a * mk).sum::<Complex64>() / t_f;
    Ok(interior + v0 - v1 * Complex64::from_polar(1.0, theta))
}

/// `dã/dω` for a polynomial trap path.
#[cfg(test)]
pub(crate) fn poly_transform_slope(p: &PolyPath, omega: f64, discontinuities: Discontinuities) -> Result<Complex64> {
    check_omega(omega)?;
    let (_, v1) = boundary_velocities(p, discontinuities)?;
    let t_f = p.duration();
    let theta = omega * t_f;
    let accel = p.scaled_derivative(2);
    let m = phase_moments(theta, accel.len() + 1);
    let i = Complex64::new(0.0, 1.0);
    let interior: Complex64 = i * accel.iter().enumerate().map(|(j, a)| a * m[j + 1]).sum::<Complex64>();
    Ok(interior - v1 * i * t_f * Complex64::from_polar(1.0, theta))
}

fn sampled_transform(p: &SampledPath, omega: f64, discontinuities: Discontinuities) -> Result<Complex64> {
    check_omega(omega)?;
    let n = p.len();
    let t_f = p.duration();
    let last = n - 1;
    let phase = |t: f64| Complex64::from_polar(1.0, omega * t);
    let i = Complex64::new(0.0, 1.0);

    let start = p.right_limit(0);
    let end = p.left_limit(last);
    let scale = p
        .positions()
        .iter()
        .chain(p.velocities())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE)
        / t_f;
    let has_jumps = p.jumps().iter().any(|j| j.position != 0.0 || j.velocity != 0.0);
    let boundary_moving = start.velocity.abs() > SMOOTHNESS_TOL * scale || end.velocity.abs() > SMOOTHNESS_TOL * scale;
    if discontinuities == Discontinuities::None && (has_jumps || boundary_moving) {
        return Err(Error::UnflaggedDiscontinuity(
            "sampled path has annotated jumps or a moving boundary; flag the protocol as discontinuous".into(),
        ));
    }

    // smooth part, segment by segment between interior jumps
    let mut cuts: Vec<f64> = vec![0.0];
    cuts.extend(p.breakpoints());
    cuts.push(t_f);
    let mut total = Complex64::new(0.0, 0.0);
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let sample_intervals = ((b - a) / p.dt()).round() as usize;
        let wanted = ((MIN_QUADRATURE_INTERVALS as f64) * (b - a) / t_f).ceil() as usize;
        let mut intervals = sample_intervals.max(wanted).max(2);
        if intervals % 2 == 1 {
            intervals += 1;
        }
        let h = (b - a) / intervals as f64;
        let f = |k: usize| {
            let (t, side) = if k == intervals {
                (b, Side::Left)
            } else {
                (a + k as f64 * h, Side::Right)
            };
            p.kinematics(t, side).acceleration * phase(t)
        };
        let mut acc = f(0) + f(intervals);
        for k in 1..intervals {
            acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k);
        }
        total += acc * h / 3.0;
    }

    if discontinuities == Discontinuities::Flagged {
        // leaving rest at t = 0 and returning to rest at t_f
        total += start.velocity;
        total -= end.velocity * phase(t_f);
        for j in p.jumps() {
            let t = p.times()[j.index];
            if j.index > 0 && j.index < last {
                total += j.velocity * phase(t);
            }
            total -= i * omega * j.position * phase(t);
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{Jump, PathRole};

    #[test]
    fn constant_path_has_zero_transform() {
        let p = TrapPath::Poly(PolyPath::new(PathRole::Trap, 2.0, vec![0.7]).unwrap());
        for w in [0.0, 0.5, 3.0, 40.0] {
            assert_eq!(
                acceleration_transform(&p, w, Discontinuities::None).unwrap().norm(),
                0.0
            );
        }
    }

    #[test]
    fn ramp_requires_flag() {
        let p = TrapPath::Poly(PolyPath::new(PathRole::Trap, 2.0, vec![0.0, 1.0]).unwrap());
        assert!(matches!(
            acceleration_transform(&p, 1.0, Discontinuities::None),
            Err(Error::UnflaggedDiscontinuity(_))
        ));
    }

    #[test]
    fn ramp_closed_form() {
        let (d, t_f, w) = (1.3, 2.1, 1.7);
        let p = TrapPath::Poly(PolyPath::new(PathRole::Trap, t_f, vec![0.0, d]).unwrap());
        let a = acceleration_transform(&p, w, Discontinuities::Flagged).unwrap();
        let expected = 2.0 * (d / t_f).powi(2) * (1.0 - (w * t_f).cos());
        assert!((a.norm_sqr() - expected).abs() < 1e-14);
    }

    #[test]
    fn sudden_step_excitation() {
        // trap jumps from 0 to d at t = 0 and stays
        let d = 0.8;
        let p = SampledPath::new(1.0, vec![d; 11], vec![0.0; 11], vec![0.0; 11])
            .unwrap()
            .with_jumps(vec![Jump {
                index: 0,
                position: d,
                velocity: 0.0,
                acceleration: 0.0,
            }])
            .unwrap();
        let w = 2.5;
        let e = excitation(&TrapPath::Sampled(p), 1.0, w, Discontinuities::Flagged).unwrap();
        assert!((e - 0.5 * w * w * d * d).abs() < 1e-14);
    }

    #[test]
    fn sampled_matches_poly() {
        let poly = PolyPath::new(PathRole::Trap, 3.0, vec![0.0, 0.0, 3.0, -2.0]).unwrap();
        let sampled = poly.sample(301).unwrap();
        for w in [0.3, 1.0, 4.0] {
            let a = poly_transform(&poly, w, Discontinuities::Flagged).unwrap();
            let b = acceleration_transform(&TrapPath::Sampled(sampled.clone()), w, Discontinuities::Flagged).unwrap();
            assert!((a - b).norm() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn slope_matches_finite_difference() {
        let poly = PolyPath::new(PathRole::Trap, 3.0, vec![0.0, 0.2, 3.0, -2.0, 0.1]).unwrap();
        let w = 1.4;
        let h = 1e-5;
        let fd = (poly_transform(&poly, w + h, Discontinuities::Flagged).unwrap()
            - poly_transform(&poly, w - h, Discontinuities::Flagged).unwrap())
            / (2.0 * h);
        let slope = poly_transform_slope(&poly, w, Discontinuities::Flagged).unwrap();
        assert!((fd - slope).norm() < 1e-8, "{fd} vs {slope}");
    }
}
