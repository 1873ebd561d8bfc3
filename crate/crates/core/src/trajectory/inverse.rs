use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::motion::{Side, TrapMotion};
use super::poly::{falling_factorial, PathRole, PolyPath};
use super::sampled::SampledPath;
use super::task::TransportTask;
use crate::error::{Error, Result};
use crate::numeric::{rk4_over, solve_checked};

/// Accepted continuity orders for boundary polynomials.
pub const CONTINUITY_ORDERS: [usize; 3] = [1, 2, 3];

pub const DEFAULT_CONTINUITY_ORDER: usize = 2;

pub(crate) const MIN_STEPS: usize = 100;

/// Default RK4 step count: `max(2000, 200 ω t_f / 2π)`.
pub fn default_steps(omega: f64, duration: f64) -> usize {
    let per_period = (200.0 * omega * duration / (2.0 * PI)).ceil();
    (per_period as usize).max(2000)
}

pub(crate) fn check_continuity_order(order: usize) -> Result<()> {
    if CONTINUITY_ORDERS.contains(&order) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "continuity order must be 1, 2 or 3 (got {order})"
        )))
    }
}

/// Rows (in scaled time) pinning `x(0) = 0`, `x(1) = d` and derivatives
/// `1..=order` to zero at both ends, for a polynomial with `n_coef` coefficients.
pub(crate) fn boundary_rows(n_coef: usize, order: usize, distance: f64) -> Vec<(Vec<f64>, f64)> {
    let mut rows = Vec::with_capacity(2 * order + 2);
    for j in 0..=order {
        // derivative j at s = 0 only involves c_j
        let mut at0 = vec![0.0; n_coef];
        at0[j] = falling_factorial(j, j);
        rows.push((at0, 0.0));
        let at1 = (0..n_coef)
            .map(|k| if k >= j { falling_factorial(k, j) } else { 0.0 })
            .collect();
        rows.push((at1, if j == 0 { distance } else { 0.0 }));
    }
    rows
}

pub(crate) fn solve_rows(rows: Vec<(Vec<f64>, f64)>, advice: &str) -> Result<Vec<f64>> {
    let n = rows.len();
    let a = DMatrix::from_fn(n, n, |r, c| rows[r].0[c]);
    let b = DVector::from_iterator(n, rows.iter().map(|r| r.1));
    Ok(solve_checked(a, b, 1e12, advice)?.iter().copied().collect())
}

/// Minimal-degree reference path with `x_c(0) = 0`, `x_c(t_f) = d` and
/// vanishing derivatives `1..=continuity_order` at both ends.
///
/// The polynomial has degree `2 k + 1` and is obtained from the exact
/// boundary-condition linear system.
pub fn solve_boundary_polynomial(task: &TransportTask, continuity_order: usize) -> Result<PolyPath> {
    check_continuity_order(continuity_order)?;
    let n_coef = 2 * continuity_order + 2;
    let coefficients = solve_rows(
        boundary_rows(n_coef, continuity_order, task.distance()),
        "boundary system is singular",
    )?;
    PolyPath::new(PathRole::Reference, task.duration(), coefficients)
}

/// Trap path `x_0 = x_c + ẍ_c / ω²` realising the reference `x_c`.
pub fn trap_from_reference(reference: &PolyPath, task: &TransportTask) -> Result<PolyPath> {
    reference.expect_role(PathRole::Reference)?;
    check_duration(reference.duration(), task.duration())?;
    let c = reference.coefficients();
    let wt2 = (task.omega() * task.duration()).powi(2);
    let coefficients = (0..c.len())
        .map(|j| {
            let curvature = c.get(j + 2).map_or(0.0, |cj2| (j + 2) as f64 * (j + 1) as f64 * cj2);
            c[j] + curvature / wt2
        })
        .collect();
    PolyPath::new(PathRole::Trap, task.duration(), coefficients)
}

/// Harmonic compensation of a trap path: `x_0' = x_0 + ẍ_0 / ω²`.
pub fn shifted_trajectory(trap: &PolyPath, omega: f64) -> Result<PolyPath> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::invalid("omega must be positive and finite"));
    }
    let c = trap.coefficients();
    let wt2 = (omega * trap.duration()).powi(2);
    let coefficients = (0..c.len())
        .map(|j| c[j] + c.get(j + 2).map_or(0.0, |cj2| (j + 2) as f64 * (j + 1) as f64 * cj2) / wt2)
        .collect();
    PolyPath::new(PathRole::Trap, trap.duration(), coefficients)
}

/// Integrate `ẍ_c + ω² x_c = ω² x_0(t)` forward from `x_c(0) = q0`,
/// `ẋ_c(0) = p0 / m` with fixed-step RK4.
pub fn reference_from_trap<M: TrapMotion + ?Sized>(
    trap: &M,
    task: &TransportTask,
    initial: (f64, f64),
    steps: Option<usize>,
) -> Result<SampledPath> {
    check_duration(trap.duration(), task.duration())?;
    let w2 = task.omega() * task.omega();
    let steps = steps.unwrap_or_else(|| default_steps(task.omega(), task.duration()));
    if steps < MIN_STEPS {
        return Err(Error::invalid(format!(
            "at least {MIN_STEPS} integration steps are required"
        )));
    }
    let mut xs = Vec::with_capacity(steps + 1);
    let mut vs = Vec::with_capacity(steps + 1);
    let mut accs = Vec::with_capacity(steps + 1);
    rk4_over(
        trap,
        steps,
        [initial.0, initial.1 / task.mass()],
        |_, t, side, y| [y[1], w2 * (trap.kinematics(t, side).position - y[0])],
        |_, t, y| {
            xs.push(y[0]);
            vs.push(y[1]);
            accs.push(w2 * (trap.kinematics(t, Side::Right).position - y[0]));
            Ok(())
        },
    )?;
    SampledPath::new(task.duration(), xs, vs, accs)
}

fn check_duration(path: f64, task: f64) -> Result<()> {
    if (path - task).abs() > 1e-12 * task {
        Err(Error::invalid(format!(
            "path duration {path} does not match task duration {task}"
        )))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(d: f64, t_f: f64, omega: f64) -> TransportTask {
        TransportTask::new(1.0, omega, d, t_f).unwrap()
    }

    #[test]
    fn quintic_coefficients() {
        let p = solve_boundary_polynomial(&task(1.0, 1.0, 1.0), 2).unwrap();
        let expected = [0.0, 0.0, 0.0, 10.0, -15.0, 6.0];
        for (c, e) in p.coefficients().iter().zip(expected) {
            assert!((c - e).abs() < 1e-12, "{:?}", p.coefficients());
        }
        assert_eq!(p.role(), PathRole::Reference);
    }

    #[test]
    fn cubic_and_septic() {
        let cubic = solve_boundary_polynomial(&task(1.0, 1.0, 1.0), 1).unwrap();
        for (c, e) in cubic.coefficients().iter().zip([0.0, 0.0, 3.0, -2.0]) {
            assert!((c - e).abs() < 1e-12);
        }
        let septic = solve_boundary_polynomial(&task(1.0, 1.0, 1.0), 3).unwrap();
        for (c, e) in septic
            .coefficients()
            .iter()
            .zip([0.0, 0.0, 0.0, 0.0, 35.0, -84.0, 70.0, -20.0])
        {
            assert!((c - e).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_distance_and_linearity() {
        let zero = solve_boundary_polynomial(&task(0.0, 3.0, 1.0), 3).unwrap();
        assert!(zero.coefficients().iter().all(|&c| c == 0.0));
        let one = solve_boundary_polynomial(&task(1.0, 1.0, 1.0), 2).unwrap();
        let two = solve_boundary_polynomial(&task(2.0, 1.0, 1.0), 2).unwrap();
        for (a, b) in one.coefficients().iter().zip(two.coefficients()) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_order_rejected() {
        assert!(solve_boundary_polynomial(&task(1.0, 1.0, 1.0), 0).is_err());
        assert!(solve_boundary_polynomial(&task(1.0, 1.0, 1.0), 4).is_err());
    }

    #[test]
    fn trap_midpoint_and_adiabatic_limit() {
        let t = task(1.0, 1.0, 2.0 * PI);
        let xc = solve_boundary_polynomial(&t, 2).unwrap();
        let x0 = trap_from_reference(&xc, &t).unwrap();
        assert!((x0.position(0.5) - 0.5).abs() < 1e-14);
        assert!(x0.position(0.0).abs() < 1e-12 && (x0.position(1.0) - 1.0).abs() < 1e-12);

        let stiff = task(1.0, 1.0, 1e7);
        let x0 = trap_from_reference(&xc, &stiff).unwrap();
        for (a, b) in x0.coefficients().iter().zip(xc.coefficients()) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn short_transport_overshoots() {
        let t = task(1.0, 0.2, 2.0 * PI);
        let x0 = trap_from_reference(&solve_boundary_polynomial(&t, 2).unwrap(), &t).unwrap();
        let peak = (0..=10_000)
            .map(|i| x0.position(0.2 * i as f64 / 10_000.0))
            .fold(f64::MIN, f64::max);
        assert!(peak > 1.0, "peak {peak}");
    }

    #[test]
    fn role_mismatch() {
        let t = task(1.0, 1.0, 1.0);
        let xc = solve_boundary_polynomial(&t, 2).unwrap();
        let x0 = trap_from_reference(&xc, &t).unwrap();
        assert!(matches!(trap_from_reference(&x0, &t), Err(Error::RoleMismatch { .. })));
    }

    #[test]
    fn shifted_trajectory_cases() {
        let lin = PolyPath::new(PathRole::Trap, 2.0, vec![0.0, 1.0]).unwrap();
        assert_eq!(
            shifted_trajectory(&lin, 3.0).unwrap().coefficients(),
            lin.coefficients()
        );

        let t = task(1.0, 2.0, 1.0);
        let x0 = trap_from_reference(&solve_boundary_polynomial(&t, 2).unwrap(), &t).unwrap();
        let shifted = shifted_trajectory(&x0, 1.0).unwrap();
        // x0 has nonzero third derivative at the ends, so the shifted path
        // starts with a nonzero velocity.
        assert!(shifted.velocity(0.0).abs() > 1e-3);
        let far = shifted_trajectory(&x0, 1e8).unwrap();
        for (a, b) in far.coefficients().iter().zip(x0.coefficients()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn step_count_floor() {
        let t = task(1.0, 1.0, 1.0);
        let x0 = PolyPath::new(PathRole::Trap, 1.0, vec![0.0]).unwrap();
        assert!(reference_from_trap(&x0, &t, (0.0, 0.0), Some(99)).is_err());
        let r = reference_from_trap(&x0, &t, (0.0, 0.0), Some(100)).unwrap();
        assert!(r.positions().iter().all(|&x| x == 0.0));
    }
}
