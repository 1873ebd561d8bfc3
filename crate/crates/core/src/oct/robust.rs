use std::cell::RefCell;
use std::io::Write;

use argmin::core::CostFunction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::family::{SmoothFamily, MAX_FAMILY_DIM};
use super::smooth::nelder_mead;
use crate::dynamics::{integrate_classical, ClassicalState, DrivingMode, PotentialModel};
use crate::error::{Error, Result};
use crate::fourier::{excitation_from_transform, poly_transform, Discontinuities};
use crate::trajectory::{default_steps, trap_from_reference, PolyPath, TransportTask};

const SEARCH_POINTS: usize = 401;
const REPORT_POINTS: usize = 2001;
const WINDOW_POINTS: usize = 41;

/// Weights of the robustness cost terms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustCost {
    /// Excitation integrated over the trap-frequency error window.
    pub window: f64,
    /// Peak `|x_0 - x_c|`.
    pub displacement: f64,
    /// Time integral of `m ω² (x_0 - x_c)² / 2`.
    pub potential_energy: f64,
    /// Largest excursion of the trap outside `[0, d]`.
    pub excursion: f64,
    /// Time-averaged anharmonic energy of a Gaussian trap of the same
    /// frequency along the nominal path.
    pub anharmonic: f64,
}

impl RobustCost {
    pub fn validate(&self) -> Result<()> {
        let w = [
            self.window,
            self.displacement,
            self.potential_energy,
            self.excursion,
            self.anharmonic,
        ];
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("cost weights must be finite and non-negative"));
        }
        if w.iter().all(|v| *v == 0.0) {
            return Err(Error::invalid("at least one cost weight must be positive"));
        }
        Ok(())
    }
}

/// Perturbation scenario the cost is evaluated against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Perturbation {
    /// Relative half-width of the trap-frequency error window.
    pub frequency_window: f64,
    /// Waist of the Gaussian trap used by the anharmonic term.
    pub gaussian_waist: Option<f64>,
}

impl Default for Perturbation {
    fn default() -> Self {
        Perturbation {
            frequency_window: 0.05,
            gaussian_waist: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustOptions {
    pub family_dim: usize,
    pub restarts: usize,
    pub max_iters: u64,
    pub seed: u64,
}

impl Default for RobustOptions {
    fn default() -> Self {
        RobustOptions {
            family_dim: 4,
            restarts: 4,
            max_iters: 2000,
            seed: 0,
        }
    }
}

/// Unweighted value of every term plus the weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub window: f64,
    pub displacement: f64,
    pub potential_energy: f64,
    pub excursion: f64,
    pub anharmonic: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub cost: f64,
}

#[derive(Debug, Clone)]
pub struct RobustResult {
    pub reference: PolyPath,
    pub trap: PolyPath,
    pub breakdown: CostBreakdown,
    /// Cost of the plain quintic for comparison.
    pub quintic: CostBreakdown,
    /// Best cost after each evaluation of the winning restart.
    pub trace: Vec<TracePoint>,
    pub converged: bool,
    pub warning: Option<String>,
    /// Final excess energy of a classical particle moved by `trap` in the
    /// nominal harmonic trap.
    pub nominal_excess: f64,
}

/// Best point, its cost, convergence flag and trace of one restart.
type RestartRun = (Vec<f64>, f64, bool, Vec<TracePoint>);

/// Minimise a robustness cost over inverse-engineered protocols.
///
/// Candidates are members of the boundary-preserving polynomial family for
/// the reference path; the trap follows by inverse engineering, so every
/// candidate is excitation-free in the nominal harmonic trap. Restart 0
/// starts at the quintic, the others at points drawn from `seed ^ restart`;
/// restarts run in parallel and the lowest cost wins (ties go to the lower
/// restart index). Hitting the iteration cap returns the best point with a
/// warning.
pub fn optimize_robust_cost(
    task: &TransportTask,
    cost: &RobustCost,
    perturbation: &Perturbation,
    options: &RobustOptions,
) -> Result<RobustResult> {
    cost.validate()?;
    if !(perturbation.frequency_window.is_finite()
        && perturbation.frequency_window > 0.0
        && perturbation.frequency_window < 1.0)
    {
        return Err(Error::invalid("frequency window must lie in (0, 1)"));
    }
    if cost.anharmonic > 0.0 && !perturbation.gaussian_waist.is_some_and(|w| w.is_finite() && w > 0.0) {
        return Err(Error::invalid("the anharmonic term needs a positive gaussian_waist"));
    }
    if options.family_dim > MAX_FAMILY_DIM {
        return Err(Error::invalid(format!(
            "family dimension must be at most {MAX_FAMILY_DIM}"
        )));
    }
    if options.restarts == 0 {
        return Err(Error::invalid("need at least one restart"));
    }
    let family = SmoothFamily::new(task, options.family_dim)?;
    let dim = family.dim();
    let evaluator = Evaluator {
        task,
        family: &family,
        cost,
        perturbation,
    };
    let quintic = evaluator.breakdown(&vec![0.0; dim], REPORT_POINTS)?;

    let (beta, trace, converged) = if dim == 0 {
        (
            Vec::new(),
            vec![TracePoint {
                iteration: 0,
                cost: quintic.total,
            }],
            true,
        )
    } else {
        let runs: Vec<Result<RestartRun>> = (0..options.restarts)
            .into_par_iter()
            .map(|r| {
                let start: Vec<f64> = if r == 0 {
                    vec![0.0; dim]
                } else {
                    let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ r as u64);
                    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
                };
                let problem = Objective {
                    evaluator: &evaluator,
                    trace: RefCell::new(Vec::new()),
                };
                let (beta, c, conv) = nelder_mead(&problem, &start, 0.5, options.max_iters, f64::NEG_INFINITY)?;
                Ok((beta, c, conv, problem.trace.into_inner()))
            })
            .collect();
        let mut best: Option<RestartRun> = None;
        for run in runs {
            let run = run?;
            if best.as_ref().is_none_or(|b| run.1 < b.1) {
                best = Some(run);
            }
        }
        let (beta, c, conv, trace) = best.expect("at least one restart");
        if c <= quintic.total {
            (beta, trace, conv)
        } else {
            (vec![0.0; dim], trace, conv)
        }
    };

    let reference = family.reference(task, &beta)?;
    let trap = trap_from_reference(&reference, task)?;
    let breakdown = evaluator.breakdown(&beta, REPORT_POINTS)?;
    let breakdown = if breakdown.total > quintic.total {
        quintic
    } else {
        breakdown
    };

    let omega = task.omega();
    let run = integrate_classical(
        &trap,
        &PotentialModel::Harmonic { omega },
        task.mass(),
        DrivingMode::Plain,
        ClassicalState::default(),
        2 * default_steps(omega, task.duration()),
    )?;
    let nominal_excess = run.report.final_excess_energy;
    if nominal_excess.abs() > 1e-8 * task.energy_scale().max(f64::MIN_POSITIVE) && task.distance() > 0.0 {
        return Err(Error::Numerical(format!(
            "optimised protocol leaves nominal excitation {nominal_excess:.3e}"
        )));
    }
    Ok(RobustResult {
        reference,
        trap,
        breakdown,
        quintic,
        trace,
        converged,
        warning: (!converged).then(|| {
            format!(
                "optimizer hit the iteration cap ({}); returning best so far",
                options.max_iters
            )
        }),
        nominal_excess,
    })
}

struct Evaluator<'a> {
    task: &'a TransportTask,
    family: &'a SmoothFamily,
    cost: &'a RobustCost,
    perturbation: &'a Perturbation,
}

impl Evaluator<'_> {
    fn breakdown(&self, beta: &[f64], points: usize) -> Result<CostBreakdown> {
        let task = self.task;
        let (m, w, d, t_f) = (task.mass(), task.omega(), task.distance(), task.duration());
        let reference = self.family.reference(task, beta)?;
        let trap = trap_from_reference(&reference, task)?;

        let mut window = 0.0;
        if self.cost.window > 0.0 {
            let lo = w * (1.0 - self.perturbation.frequency_window);
            let hi = w * (1.0 + self.perturbation.frequency_window);
            let h = (hi - lo) / (WINDOW_POINTS - 1) as f64;
            for i in 0..WINDOW_POINTS {
                let weight = if i == 0 || i == WINDOW_POINTS - 1 {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                let z = poly_transform(&trap, lo + i as f64 * h, Discontinuities::Flagged)?;
                window += weight * excitation_from_transform(m, z);
            }
            window *= h / 3.0;
        }

        let mut displacement = 0.0f64;
        let mut potential_energy = 0.0;
        let mut lo_x = 0.0f64;
        let mut hi_x = d;
        let mut anharmonic = 0.0;
        let gauss = self.perturbation.gaussian_waist.map(|waist| {
            let depth = m * w * w * waist * waist / 4.0;
            (PotentialModel::Gaussian { depth, waist }, depth)
        });
        let h = t_f / (points - 1) as f64;
        for i in 0..points {
            let t = i as f64 * h;
            let y = trap.position(t) - reference.position(t);
            let weight = if i == 0 || i == points - 1 { 0.5 } else { 1.0 };
            displacement = displacement.max(y.abs());
            potential_energy += weight * 0.5 * m * w * w * y * y * h;
            lo_x = lo_x.min(trap.position(t));
            hi_x = hi_x.max(trap.position(t));
            if let Some((g, depth)) = gauss {
                let anh = g.energy(m, y) + depth - 0.5 * m * w * w * y * y;
                anharmonic += weight * anh.abs() * h / t_f;
            }
        }
        let excursion = (-lo_x).max(hi_x - d).max(0.0);
        let c = self.cost;
        let total = c.window * window
            + c.displacement * displacement
            + c.potential_energy * potential_energy
            + c.excursion * excursion
            + c.anharmonic * anharmonic;
        Ok(CostBreakdown {
            window,
            displacement,
            potential_energy,
            excursion,
            anharmonic,
            total,
        })
    }
}

struct Objective<'a> {
    evaluator: &'a Evaluator<'a>,
    trace: RefCell<Vec<TracePoint>>,
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, beta: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let c = match self.evaluator.breakdown(beta, SEARCH_POINTS) {
            Ok(b) if b.total.is_finite() => b.total,
            _ => f64::INFINITY,
        };
        let mut trace = self.trace.borrow_mut();
        let best = trace.last().map_or(c, |p| p.cost.min(c));
        let iteration = trace.len();
        trace.push(TracePoint { iteration, cost: best });
        Ok(c)
    }
}

/// CSV with header `iteration,cost`.
pub fn write_trace_csv<W: Write>(trace: &[TracePoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["iteration", "cost"])?;
    for p in trace {
        w.write_record(&[p.iteration.to_string(), p.cost.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
