//! Job configuration: one transport task plus exactly one command block.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sta_shuttle::dynamics::{ClassicalState, DrivingMode, Grid, PotentialModel};
use sta_shuttle::fourier::{design_with_nulls, Discontinuities, FrequencyNull};
use sta_shuttle::noise::{HeatingOptions, MonteCarloOptions, NoiseKind, NoiseModel};
use sta_shuttle::oct::{ControlConstraint, Perturbation, RobustCost, RobustOptions};
use sta_shuttle::trajectory::{
    shifted_trajectory, solve_boundary_polynomial, trap_from_reference, Jump, PathRole, PolyPath, SampledPath,
    TransportTask, TrapMotion, TrapPath, DEFAULT_CONTINUITY_ORDER,
};
use sta_shuttle::{io, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Design,
    Simulate,
    Spectrum,
    Noise,
    Oct,
    Sweep,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Design => "design",
            CommandKind::Simulate => "simulate",
            CommandKind::Spectrum => "spectrum",
            CommandKind::Noise => "noise",
            CommandKind::Oct => "oct",
            CommandKind::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub task: TransportTask,
    /// Output directory; `--out` takes precedence. Not echoed.
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
    /// Master seed for every stochastic step; `--seed` takes precedence.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignJob>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateJob>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumJob>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseJob>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oct: Option<OctJob>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepJob>,
}

impl JobConfig {
    pub fn load(path: &Path) -> Result<Self> {
        io::read_json(path)
    }

    /// Check the block layout against the requested subcommand and push the
    /// master seed into every seeded component.
    pub fn resolve(&mut self, command: CommandKind, seed: Option<u64>) -> Result<()> {
        let present: Vec<CommandKind> = [
            (self.design.is_some(), CommandKind::Design),
            (self.simulate.is_some(), CommandKind::Simulate),
            (self.spectrum.is_some(), CommandKind::Spectrum),
            (self.noise.is_some(), CommandKind::Noise),
            (self.oct.is_some(), CommandKind::Oct),
            (self.sweep.is_some(), CommandKind::Sweep),
        ]
        .into_iter()
        .filter_map(|(on, k)| on.then_some(k))
        .collect();
        match present.as_slice() {
            [k] if *k == command => {}
            [k] => {
                return Err(Error::InvalidInput(format!(
                    "config holds a `{}` block but the `{}` command was requested",
                    k.name(),
                    command.name()
                )))
            }
            [] => return Err(Error::InvalidInput(format!("config has no `{}` block", command.name()))),
            _ => return Err(Error::InvalidInput("config must hold exactly one command block".into())),
        }
        if let Some(s) = seed {
            self.seed = s;
        }
        let seed = self.seed;
        if let Some(n) = self.noise.as_mut() {
            n.model.seed = seed;
        }
        if let Some(SweepJob { noise: Some(n), .. }) = self.sweep.as_mut() {
            n.model.seed = seed;
        }
        if let Some(OctJob::Robust { options, .. }) = self.oct.as_mut() {
            options.seed = seed;
        }
        self.validate()
    }

    fn validate(&self) -> Result<()> {
        if let Some(d) = &self.design {
            if d.samples < 2 {
                return Err(Error::InvalidInput("design samples must be at least 2".into()));
            }
        }
        if let Some(s) = &self.simulate {
            s.validate()?;
        }
        if let Some(s) = &self.spectrum {
            if s.points < 2 || !(s.omega_max > s.omega_min) || s.omega_min < 0.0 {
                return Err(Error::InvalidInput(
                    "spectrum needs points >= 2 and 0 <= omega_min < omega_max".into(),
                ));
            }
        }
        if let Some(n) = &self.noise {
            n.validate()?;
        }
        if let Some(OctJob::Smooth { constraint }) = &self.oct {
            constraint.validate()?;
        }
        if let Some(OctJob::Robust { cost, .. }) = &self.oct {
            cost.validate()?;
        }
        if let Some(s) = &self.sweep {
            s.validate()?;
        }
        Ok(())
    }
}

fn default_order() -> usize {
    DEFAULT_CONTINUITY_ORDER
}

/// Where a trap path comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathSpec {
    /// Boundary polynomial as the reference, trap by inverse engineering.
    Sta {
        #[serde(default = "default_order")]
        continuity_order: usize,
    },
    /// Trap path with Fourier nulls of its acceleration.
    Nulls {
        nulls: Vec<FrequencyNull>,
        #[serde(default = "default_order")]
        continuity_order: usize,
    },
    /// Boundary polynomial used directly as the trap path.
    Boundary {
        #[serde(default = "default_order")]
        continuity_order: usize,
    },
    /// Polynomial path from a JSON file; reference paths are converted.
    Poly { file: PathBuf },
    /// Sampled trap path from a `t,x,v,a` CSV file.
    Sampled {
        file: PathBuf,
        #[serde(default)]
        jumps: Vec<Jump>,
    },
}

impl Default for PathSpec {
    fn default() -> Self {
        PathSpec::Sta {
            continuity_order: DEFAULT_CONTINUITY_ORDER,
        }
    }
}

impl PathSpec {
    /// Whether the path is rebuilt for each duration of a sweep.
    pub fn follows_duration(&self) -> bool {
        matches!(
            self,
            PathSpec::Sta { .. } | PathSpec::Nulls { .. } | PathSpec::Boundary { .. }
        )
    }

    pub fn trap(&self, task: &TransportTask) -> Result<TrapPath> {
        let path = match self {
            PathSpec::Sta { continuity_order } => {
                let reference = solve_boundary_polynomial(task, *continuity_order)?;
                TrapPath::Poly(trap_from_reference(&reference, task)?)
            }
            PathSpec::Nulls {
                nulls,
                continuity_order,
            } => TrapPath::Poly(design_with_nulls(task, nulls, *continuity_order)?),
            PathSpec::Boundary { continuity_order } => {
                TrapPath::Poly(solve_boundary_polynomial(task, *continuity_order)?.with_role(PathRole::Trap))
            }
            PathSpec::Poly { file } => {
                let p: PolyPath = io::read_json(file)?;
                match p.role() {
                    PathRole::Trap => TrapPath::Poly(p),
                    PathRole::Reference => TrapPath::Poly(trap_from_reference(&p, task)?),
                }
            }
            PathSpec::Sampled { file, jumps } => {
                let p = SampledPath::read_csv(std::fs::File::open(file)?)?;
                TrapPath::Sampled(p.with_jumps(jumps.clone())?)
            }
        };
        let d = (path.duration() - task.duration()).abs();
        if d > 1e-12 * task.duration() {
            return Err(Error::InvalidInput(format!(
                "path duration {} does not match the task duration {}",
                path.duration(),
                task.duration()
            )));
        }
        Ok(path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignJob {
    #[serde(default = "default_order")]
    pub continuity_order: usize,
    /// Fourier nulls; when present the trap path is designed directly.
    #[serde(default)]
    pub nulls: Vec<FrequencyNull>,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    1001
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    Classical,
    Quantum,
    Both,
}

impl Engine {
    pub fn classical(self) -> bool {
        matches!(self, Engine::Classical | Engine::Both)
    }

    pub fn quantum(self) -> bool {
        matches!(self, Engine::Quantum | Engine::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub points: usize,
    /// Margin beyond the trap excursion, in ground-state widths.
    pub padding: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            points: Grid::DEFAULT_POINTS,
            padding: Grid::DEFAULT_PADDING,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateJob {
    #[serde(default)]
    pub path: PathSpec,
    /// Replace the trap path `x_0` by `x_0 + ẍ_0/ω²` (polynomial paths only).
    #[serde(default)]
    pub shift: bool,
    /// Defaults to a harmonic trap at the task frequency.
    #[serde(default)]
    pub potential: Option<PotentialModel>,
    #[serde(default)]
    pub mode: DrivingMode,
    #[serde(default)]
    pub engine: Engine,
    /// Classical offset from rest in the initial trap.
    #[serde(default)]
    pub offset: ClassicalState,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub dt: Option<f64>,
    /// Times at which quantum snapshots are written.
    #[serde(default)]
    pub snapshots: Vec<f64>,
}

impl SimulateJob {
    fn validate(&self) -> Result<()> {
        if let Some(p) = &self.potential {
            p.validate()?;
        }
        if self.shift
            && !matches!(
                self.path,
                PathSpec::Sta { .. } | PathSpec::Nulls { .. } | PathSpec::Boundary { .. } | PathSpec::Poly { .. }
            )
        {
            return Err(Error::InvalidInput("shift needs a polynomial path".into()));
        }
        if !self.snapshots.is_empty() && !self.engine.quantum() {
            return Err(Error::InvalidInput("snapshots need the quantum engine".into()));
        }
        Ok(())
    }

    pub fn potential(&self, task: &TransportTask) -> PotentialModel {
        self.potential
            .unwrap_or(PotentialModel::Harmonic { omega: task.omega() })
    }

    pub fn trap(&self, task: &TransportTask) -> Result<TrapPath> {
        let path = self.path.trap(task)?;
        if !self.shift {
            return Ok(path);
        }
        match path {
            TrapPath::Poly(p) => Ok(TrapPath::Poly(shifted_trajectory(&p, task.omega())?)),
            TrapPath::Sampled(_) => Err(Error::InvalidInput("shift needs a polynomial path".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    /// Defaults to the task frequency.
    #[serde(default)]
    pub omega0: Option<f64>,
    /// Threshold in units of the task energy scale `m ω² d² / 2`.
    pub epsilon: f64,
    #[serde(default)]
    pub half_range: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumJob {
    #[serde(default)]
    pub path: PathSpec,
    pub omega_min: f64,
    pub omega_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub discontinuities: Discontinuities,
    #[serde(default)]
    pub window: Option<WindowSpec>,
}

fn default_points() -> usize {
    512
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseJob {
    pub lattice: PotentialModel,
    /// Its seed is replaced by the job seed.
    pub model: NoiseModel,
    pub analysis: NoiseAnalysis,
}

impl NoiseJob {
    fn validate(&self) -> Result<()> {
        if !matches!(self.lattice, PotentialModel::Lattice { .. }) {
            return Err(Error::InvalidInput("noise jobs need a lattice potential".into()));
        }
        self.lattice.validate()?;
        self.model.validate()?;
        if let NoiseAnalysis::Heating { second, .. } = &self.analysis {
            second.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseAnalysis {
    /// Monte Carlo mean excess energy of a transport.
    Sensitivity {
        #[serde(default)]
        path: PathSpec,
        #[serde(default = "default_realizations")]
        realizations: usize,
        #[serde(default)]
        options: MonteCarloOptions,
    },
    /// Welch estimate of one generated noise record.
    Psd {
        #[serde(default = "default_psd_samples")]
        samples: usize,
        dt: f64,
        #[serde(default)]
        segment: Option<usize>,
    },
    /// Static-trap heating of `model` against a second noise spectrum.
    Heating {
        second: NoiseKind,
        #[serde(default)]
        options: HeatingOptions,
    },
}

fn default_realizations() -> usize {
    200
}

fn default_psd_samples() -> usize {
    1 << 18
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OctJob {
    /// Minimal-time protocol under `|x_0 - x_c| ≤ delta`.
    BangBang { delta: f64 },
    /// Smooth protocol at the task duration under a constraint.
    Smooth { constraint: ControlConstraint },
    /// Robustness-cost optimization at the task duration.
    Robust {
        cost: RobustCost,
        #[serde(default)]
        perturbation: Perturbation,
        #[serde(default)]
        options: RobustOptions,
    },
}

/// Either an explicit list or `count` evenly spaced values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DurationGrid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, count: usize },
}

impl DurationGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            DurationGrid::List(v) => v.clone(),
            DurationGrid::Range { start, stop, count } => match count {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..*n)
                    .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepJob {
    pub durations: DurationGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateJob>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseJob>,
}

impl SweepJob {
    fn validate(&self) -> Result<()> {
        let values = self.durations.values();
        if values.is_empty() {
            return Err(Error::InvalidInput("sweep duration grid is empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidInput(format!("sweep duration {v} must be positive")));
        }
        let path = match (&self.simulate, &self.noise) {
            (Some(s), None) => {
                s.validate()?;
                &s.path
            }
            (None, Some(n)) => {
                n.validate()?;
                match &n.analysis {
                    NoiseAnalysis::Sensitivity { path, .. } => path,
                    _ => return Err(Error::InvalidInput("noise sweeps need a sensitivity analysis".into())),
                }
            }
            _ => {
                return Err(Error::InvalidInput(
                    "sweep needs exactly one of `simulate` or `noise`".into(),
                ))
            }
        };
        if !path.follows_duration() && values.len() > 1 {
            return Err(Error::InvalidInput(
                "paths read from files cannot be swept over durations".into(),
            ));
        }
        Ok(())
    }
}
