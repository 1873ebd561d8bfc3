//! Small numerical helpers shared across modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::trajectory::{Side, TrapMotion};

/// Fixed-step classical RK4 over a trap motion.
///
/// Steps sit on a uniform grid of `steps` intervals over `[0, t_f]`. A step
/// that straddles a breakpoint of the motion is split there, and stage
/// evaluations at the two ends of a sub-interval use the inner one-sided
/// limits. `rhs` receives the step index so that piecewise-constant drives
/// (noise) can be looked up per step. `observe` sees every grid node.
pub(crate) fn rk4_over<M, F, O>(motion: &M, steps: usize, y0: [f64; 2], mut rhs: F, mut observe: O) -> Result<[f64; 2]>
where
    M: TrapMotion + ?Sized,
    F: FnMut(usize, f64, Side, [f64; 2]) -> [f64; 2],
    O: FnMut(usize, f64, [f64; 2]) -> Result<()>,
{
    let t_f = motion.duration();
    let dt = t_f / steps as f64;
    let mut breaks = motion.breakpoints();
    breaks.sort_by(f64::total_cmp);
    let eps = 1e-12 * t_f;

    let mut y = y0;
    observe(0, 0.0, y)?;
    let mut cuts = Vec::with_capacity(4);
    for i in 0..steps {
        let t0 = i as f64 * dt;
        let t1 = if i + 1 == steps { t_f } else { (i + 1) as f64 * dt };
        cuts.clear();
        cuts.push(t0);
        cuts.extend(breaks.iter().copied().filter(|&b| b > t0 + eps && b < t1 - eps));
        cuts.push(t1);
        for w in cuts.windows(2) {
            y = rk4_step(&mut rhs, i, w[0], w[1], y);
        }
        observe(i + 1, t1, y)?;
    }
    Ok(y)
}

fn rk4_step<F>(rhs: &mut F, step: usize, a: f64, b: f64, y: [f64; 2]) -> [f64; 2]
where
    F: FnMut(usize, f64, Side, [f64; 2]) -> [f64; 2],
{
    let h = b - a;
    let mid = a + 0.5 * h;
    let add = |y: [f64; 2], k: [f64; 2], s: f64| [y[0] + s * k[0], y[1] + s * k[1]];
    let k1 = rhs(step, a, Side::Right, y);
    let k2 = rhs(step, mid, Side::Right, add(y, k1, 0.5 * h));
    let k3 = rhs(step, mid, Side::Right, add(y, k2, 0.5 * h));
    let k4 = rhs(step, b, Side::Left, add(y, k3, h));
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Neumaier compensated summation.
pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Sample mean and standard error of the mean.
pub(crate) fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Ordinary least squares `y = intercept + slope x`; returns (slope, intercept).
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = compensated_sum(x.iter().copied()) / n;
    let my = compensated_sum(y.iter().copied()) / n;
    let sxy = compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let sxx = compensated_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Solve a square system after row equilibration, rejecting it when the
/// condition number of the equilibrated matrix exceeds `max_condition`.
pub(crate) fn solve_checked(
    mut a: DMatrix<f64>,
    mut b: DVector<f64>,
    max_condition: f64,
    advice: &str,
) -> Result<DVector<f64>> {
    for r in 0..a.nrows() {
        let scale = a.row(r).amax();
        if scale > 0.0 {
            a.row_mut(r).scale_mut(1.0 / scale);
            b[r] /= scale;
        }
    }
    let condition = condition_number(&a);
    if !(condition <= max_condition) {
        return Err(Error::IllConditioned {
            condition,
            advice: advice.to_string(),
        });
    }
    a.lu().solve(&b).ok_or_else(|| Error::IllConditioned {
        condition: f64::INFINITY,
        advice: advice.to_string(),
    })
}

pub(crate) fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_beats_naive() {
        let v = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(compensated_sum(v), 2.0);
    }

    #[test]
    fn fit_recovers_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|x| 3.0 - 0.5 * x).collect();
        let (s, c) = linear_fit(&x, &y);
        assert!((s + 0.5).abs() < 1e-14 && (c - 3.0).abs() < 1e-14);
    }

    #[test]
    fn singular_system_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(
            solve_checked(a, b, 1e12, "x"),
            Err(Error::IllConditioned { .. })
        ));
    }
}
