use argmin::core::{CostFunction, Executor, State, TerminationReason, TerminationStatus};
use argmin::solver::neldermead::NelderMead;
use serde::{Deserialize, Serialize};

use super::bang_bang::ControlConstraint;
use super::family::{uniform_points, DerivativeTable, SmoothFamily};
use crate::error::{Error, Result};
use crate::trajectory::{trap_from_reference, PolyPath, TransportTask};

/// Free coefficients used by [`constrained_smooth`].
pub const SMOOTH_FAMILY_DIM: usize = 6;
/// Points used while optimising.
const SEARCH_POINTS: usize = 1201;
/// Points used to certify the returned path.
pub const VERIFY_POINTS: usize = 10_001;
const RESTARTS: usize = 4;
const MAX_ITERS: u64 = 4000;

/// Peak values of `x_0 - x_c` and its first two time derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintPeaks {
    pub displacement: f64,
    pub rate: f64,
    pub curvature: f64,
    /// Largest peak-to-bound ratio; the path is feasible when this is `≤ 1`.
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct SmoothPath {
    pub reference: PolyPath,
    pub trap: PolyPath,
    pub peaks: ConstraintPeaks,
    /// `1 - peaks.ratio`
    pub slack: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfeasibleReport {
    pub requested_t_f: f64,
    /// Best peak-to-bound ratio reached at the requested duration.
    pub best_ratio: f64,
    /// Smallest duration found feasible by bisection.
    pub smallest_feasible_t_f: f64,
}

#[derive(Debug, Clone)]
pub enum SmoothOutcome {
    Feasible(SmoothPath),
    Infeasible(InfeasibleReport),
}

impl SmoothOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, SmoothOutcome::Feasible(_))
    }
}

/// Smooth rest-to-rest protocol for `task` respecting `constraint`.
///
/// Searches the polynomial family (quintic plus boundary-preserving
/// corrections) for the member minimising the largest peak-to-bound ratio,
/// then certifies it on a dense grid. If the quintic is already feasible it
/// is returned unchanged. Otherwise, if no feasible member is found, the
/// report gives the smallest feasible duration located by bisection.
pub fn constrained_smooth(task: &TransportTask, constraint: &ControlConstraint) -> Result<SmoothOutcome> {
    constraint.validate()?;
    let family = SmoothFamily::new(task, SMOOTH_FAMILY_DIM)?;
    let quintic = family.reference(task, &[0.0; SMOOTH_FAMILY_DIM])?;
    let peaks = certify(&quintic, task, constraint)?;
    if peaks.ratio <= 1.0 {
        return Ok(SmoothOutcome::Feasible(finish(quintic, task, peaks)?));
    }
    let (beta, _) = minimise_ratio(&family, task, constraint, 0.0)?;
    let reference = family.reference(task, &beta)?;
    let peaks = certify(&reference, task, constraint)?;
    if peaks.ratio <= 1.0 {
        return Ok(SmoothOutcome::Feasible(finish(reference, task, peaks)?));
    }
    let smallest = bisect_feasible(task, constraint, task.duration())?;
    Ok(SmoothOutcome::Infeasible(InfeasibleReport {
        requested_t_f: task.duration(),
        best_ratio: peaks.ratio,
        smallest_feasible_t_f: smallest,
    }))
}

/// Whether some member of the family is feasible at `task.duration()`.
pub fn smooth_feasible(task: &TransportTask, constraint: &ControlConstraint) -> Result<bool> {
    let family = SmoothFamily::new(task, SMOOTH_FAMILY_DIM)?;
    let (beta, ratio) = minimise_ratio(&family, task, constraint, 1.0 - 1e-4)?;
    if ratio > 1.0 {
        return Ok(false);
    }
    Ok(certify(&family.reference(task, &beta)?, task, constraint)?.ratio <= 1.0)
}

fn bisect_feasible(task: &TransportTask, constraint: &ControlConstraint, infeasible: f64) -> Result<f64> {
    let mut lo = infeasible;
    let mut hi = infeasible;
    for _ in 0..40 {
        hi *= 2.0;
        if smooth_feasible(&task.with_duration(hi)?, constraint)? {
            break;
        }
        lo = hi;
    }
    if !smooth_feasible(&task.with_duration(hi)?, constraint)? {
        return Err(Error::Numerical("no feasible duration found while bracketing".into()));
    }
    while (hi - lo) > 1e-4 * hi {
        let mid = 0.5 * (lo + hi);
        if smooth_feasible(&task.with_duration(mid)?, constraint)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn finish(reference: PolyPath, task: &TransportTask, peaks: ConstraintPeaks) -> Result<SmoothPath> {
    let trap = trap_from_reference(&reference, task)?;
    Ok(SmoothPath {
        reference,
        trap,
        peaks,
        slack: 1.0 - peaks.ratio,
    })
}

/// Dense-grid peaks of `ẍ_c/ω²` and its next two derivatives.
pub fn certify(reference: &PolyPath, task: &TransportTask, constraint: &ControlConstraint) -> Result<ConstraintPeaks> {
    constraint.validate()?;
    let t_f = task.duration();
    let w2 = task.omega() * task.omega();
    let mut peaks = [0.0f64; 3];
    for i in 0..VERIFY_POINTS {
        let t = t_f * i as f64 / (VERIFY_POINTS - 1) as f64;
        for (k, p) in peaks.iter_mut().enumerate() {
            *p = p.max(reference.derivative(k + 2, t).abs() / w2);
        }
    }
    Ok(to_peaks(peaks, constraint))
}

fn to_peaks(peaks: [f64; 3], c: &ControlConstraint) -> ConstraintPeaks {
    let mut ratio = peaks[0] / c.max_relative_displacement;
    if let Some(b) = c.max_displacement_rate {
        ratio = ratio.max(peaks[1] / b);
    }
    if let Some(b) = c.max_displacement_curvature {
        ratio = ratio.max(peaks[2] / b);
    }
    ConstraintPeaks {
        displacement: peaks[0],
        rate: peaks[1],
        curvature: peaks[2],
        ratio,
    }
}

struct PeakRatio<'a> {
    tables: [DerivativeTable; 3],
    scales: [f64; 3],
    constraint: &'a ControlConstraint,
}

impl PeakRatio<'_> {
    fn ratio(&self, beta: &[f64]) -> f64 {
        let mut peaks = [0.0f64; 3];
        for (k, peak) in peaks.iter_mut().enumerate() {
            let needed = match k {
                0 => true,
                1 => self.constraint.max_displacement_rate.is_some(),
                _ => self.constraint.max_displacement_curvature.is_some(),
            };
            if needed {
                *peak = self.tables[k].values(beta).iter().fold(0.0f64, |m, v| m.max(v.abs())) * self.scales[k];
            }
        }
        to_peaks(peaks, self.constraint).ratio
    }
}

impl CostFunction for PeakRatio<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, beta: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.ratio(beta))
    }
}

/// Nelder-Mead on the peak ratio, restarted from the best point with a
/// fresh simplex; stops early once the ratio drops below `target`.
fn minimise_ratio(
    family: &SmoothFamily,
    task: &TransportTask,
    constraint: &ControlConstraint,
    target: f64,
) -> Result<(Vec<f64>, f64)> {
    let points = uniform_points(SEARCH_POINTS);
    let (t_f, w2) = (task.duration(), task.omega() * task.omega());
    let problem = PeakRatio {
        tables: [
            family.table(2, &points),
            family.table(3, &points),
            family.table(4, &points),
        ],
        scales: [
            1.0 / (t_f.powi(2) * w2),
            1.0 / (t_f.powi(3) * w2),
            1.0 / (t_f.powi(4) * w2),
        ],
        constraint,
    };
    let dim = family.dim();
    let mut best = vec![0.0; dim];
    let mut best_ratio = problem.ratio(&best);
    let mut step = 1.0;
    for _ in 0..RESTARTS {
        if best_ratio <= target {
            break;
        }
        let (beta, ratio, _) = nelder_mead(&problem, &best, step, MAX_ITERS, target)?;
        if ratio < best_ratio {
            best = beta;
            best_ratio = ratio;
        }
        step *= 0.3;
    }
    Ok((best, best_ratio))
}

/// Run Nelder-Mead from `start` with an axis-aligned simplex of size
/// `step`. Returns the best point, its cost and whether it converged.
pub(crate) fn nelder_mead<C>(
    problem: &C,
    start: &[f64],
    step: f64,
    max_iters: u64,
    target: f64,
) -> Result<(Vec<f64>, f64, bool)>
where
    C: CostFunction<Param = Vec<f64>, Output = f64>,
{
    let mut simplex = vec![start.to_vec()];
    for j in 0..start.len() {
        let mut p = start.to_vec();
        p[j] += step;
        simplex.push(p);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-12)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let result = Executor::new(ByRef(problem), solver)
        .configure(|s| s.max_iters(max_iters).target_cost(target))
        .run()
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let state = result.state();
    let converged = !matches!(
        state.get_termination_status(),
        TerminationStatus::Terminated(TerminationReason::MaxItersReached)
    );
    let param = state
        .get_best_param()
        .cloned()
        .ok_or_else(|| Error::Numerical("optimiser returned no parameters".into()))?;
    Ok((param, state.get_best_cost(), converged))
}

/// Lets the executor own a borrowed problem.
struct ByRef<'a, C>(&'a C);

impl<C: CostFunction<Param = Vec<f64>, Output = f64>> CostFunction for ByRef<'_, C> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        self.0.cost(p)
    }
}
