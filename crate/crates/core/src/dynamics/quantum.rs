use std::f64::consts::TAU;
use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::potential::{Particle, PotentialModel};
use super::report::{DrivingMode, ExcitationReport};
use crate::error::{Error, Result};
use crate::trajectory::{Side, TrapMotion};

/// Density allowed in the outermost grid points before a run is rejected.
pub const BOUNDARY_DENSITY_LIMIT: f64 = 1e-8;
/// Probability outside the central well that counts as an escape.
pub const ESCAPE_PROBABILITY: f64 = 1e-3;
/// Target residual `‖Hψ - Eψ‖` for computed ground states.
pub const GROUND_STATE_TOLERANCE: f64 = 1e-8;

const BOUNDARY_POINTS: usize = 8;
const CHECK_EVERY: usize = 16;
const NORM_TOLERANCE: f64 = 1e-10;

/// Uniform periodic grid `x_j = x_min + j dx`, `j < n`, with `n` a power of two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_min: f64,
    dx: f64,
    n: usize,
}

impl Grid {
    pub const DEFAULT_POINTS: usize = 1024;
    pub const DEFAULT_PADDING: f64 = 8.0;

    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !n.is_power_of_two() || n < 16 {
            return Err(Error::invalid(format!(
                "grid size must be a power of two >= 16, got {n}"
            )));
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(Error::invalid("grid bounds must be finite with x_max > x_min"));
        }
        Ok(Grid {
            x_min,
            dx: (x_max - x_min) / n as f64,
            n,
        })
    }

    /// Grid spanning the initial and final trap positions plus `padding`
    /// ground-state widths on each side.
    pub fn for_transport<M: TrapMotion + ?Sized>(
        path: &M,
        potential: &PotentialModel,
        particle: Particle,
        n: usize,
        padding: f64,
    ) -> Result<Self> {
        potential.validate()?;
        if !(padding.is_finite() && padding >= Self::DEFAULT_PADDING) {
            return Err(Error::invalid(format!(
                "grid padding must be at least {} ground-state widths",
                Self::DEFAULT_PADDING
            )));
        }
        let sigma = ground_width(potential, particle);
        let eq = potential.equilibrium();
        let a = path.initial_position() + eq;
        let b = path.final_position() + eq;
        Grid::new(a.min(b) - padding * sigma, a.max(b) + padding * sigma, n)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.n as f64 * self.dx
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// FFT-ordered wavenumbers.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let dk = TAU / (self.n as f64 * self.dx);
        (0..self.n)
            .map(|j| {
                let m = if j < self.n / 2 {
                    j as f64
                } else {
                    j as f64 - self.n as f64
                };
                m * dk
            })
            .collect()
    }
}

/// `sqrt(ħ / (m ω))` at the well bottom.
pub fn ground_width(potential: &PotentialModel, particle: Particle) -> f64 {
    (particle.hbar / (particle.mass * potential.frequency(particle.mass))).sqrt()
}

/// Default propagation step: `min(2π/(200 ω), t_f/2000)`.
pub fn default_time_step(omega: f64, duration: f64) -> f64 {
    (TAU / (200.0 * omega)).min(duration / 2000.0)
}

/// A wavefunction sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    grid: Grid,
    amplitudes: Vec<Complex64>,
}

impl QuantumState {
    pub fn new(grid: Grid, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.len() {
            return Err(Error::invalid("amplitude count does not match the grid"));
        }
        if amplitudes.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(Error::invalid("amplitudes must be finite"));
        }
        Ok(QuantumState { grid, amplitudes })
    }

    /// Harmonic-oscillator eigenstate `level` (0 or 1 supported analytically)
    /// centred at `center`, normalised on the grid.
    pub fn harmonic_eigenstate(
        grid: Grid,
        mass: f64,
        omega: f64,
        hbar: f64,
        center: f64,
        level: usize,
    ) -> Result<Self> {
        if level > 1 {
            return Err(Error::invalid("only the two lowest harmonic levels are available"));
        }
        let alpha = mass * omega / hbar;
        let amplitudes = (0..grid.len())
            .map(|j| {
                let y = grid.x(j) - center;
                let g = (-0.5 * alpha * y * y).exp();
                Complex64::new(if level == 0 { g } else { y * g }, 0.0)
            })
            .collect();
        let mut s = QuantumState::new(grid, amplitudes)?;
        s.normalize()?;
        Ok(s)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dx
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Numerical("cannot normalise a zero wavefunction".into()));
        }
        let s = 1.0 / n.sqrt();
        self.amplitudes.iter_mut().for_each(|a| *a *= s);
        Ok(())
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn mean_position(&self) -> f64 {
        let dx = self.grid.dx;
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(j, a)| a.norm_sqr() * self.grid.x(j))
            .sum::<f64>()
            * dx
            / self.norm()
    }

    /// Largest density among the outermost points on either side.
    pub fn boundary_density(&self) -> f64 {
        let n = self.amplitudes.len();
        let k = BOUNDARY_POINTS.min(n / 2);
        self.amplitudes[..k]
            .iter()
            .chain(&self.amplitudes[n - k..])
            .map(|a| a.norm_sqr())
            .fold(0.0, f64::max)
    }

    /// Probability outside the central well of a trap resting at `center`.
    pub fn probability_outside(&self, potential: &PotentialModel, center: f64) -> f64 {
        if !potential.is_bounded() {
            return 0.0;
        }
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(j, _)| !potential.in_central_well(self.grid.x(*j) - center))
            .map(|(_, a)| a.norm_sqr())
            .sum::<f64>()
            * self.grid.dx
    }

    /// CSV with header `x,re,im,density`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "re", "im", "density"])?;
        for (j, a) in self.amplitudes.iter().enumerate() {
            w.write_record(&[
                self.grid.x(j).to_string(),
                a.re.to_string(),
                a.im.to_string(),
                a.norm_sqr().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `|⟨target|psi⟩|²` for two states on the same grid.
pub fn fidelity(psi: &QuantumState, target: &QuantumState) -> Result<f64> {
    if psi.grid != target.grid {
        return Err(Error::invalid("fidelity needs both states on the same grid"));
    }
    let overlap: Complex64 = psi
        .amplitudes
        .iter()
        .zip(&target.amplitudes)
        .map(|(a, b)| b.conj() * a)
        .sum::<Complex64>()
        * psi.grid.dx;
    Ok((overlap.norm_sqr() / (psi.norm() * target.norm())).min(1.0))
}

/// FFT plans plus the wavenumber table for one grid.
struct Spectral {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    k: Vec<f64>,
}

impl Spectral {
    fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.len());
        let inverse = planner.plan_fft_inverse(grid.len());
        let len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Spectral {
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); len],
            k: grid.wavenumbers(),
        }
    }

    fn forward(&mut self, buf: &mut [Complex64]) {
        self.forward.process_with_scratch(buf, &mut self.scratch);
    }

    fn inverse(&mut self, buf: &mut [Complex64]) {
        self.inverse.process_with_scratch(buf, &mut self.scratch);
        let s = 1.0 / buf.len() as f64;
        buf.iter_mut().for_each(|a| *a *= s);
    }

    /// `⟨(ħk - m v)²⟩ / 2m` for a normalised state.
    fn kinetic_expectation(&mut self, psi: &[Complex64], particle: Particle, frame_velocity: f64) -> f64 {
        let mut buf = psi.to_vec();
        self.forward(&mut buf);
        let total: f64 = buf.iter().map(|a| a.norm_sqr()).sum();
        let weighted: f64 = buf
            .iter()
            .zip(&self.k)
            .map(|(a, &k)| {
                let p = particle.hbar * k - particle.mass * frame_velocity;
                a.norm_sqr() * p * p
            })
            .sum();
        weighted / total / (2.0 * particle.mass)
    }
}

fn potential_expectation(psi: &QuantumState, potential: &PotentialModel, mass: f64, center: f64) -> f64 {
    let g = psi.grid;
    psi.amplitudes
        .iter()
        .enumerate()
        .map(|(j, a)| a.norm_sqr() * potential.energy(mass, g.x(j) - center))
        .sum::<f64>()
        * g.dx
        / psi.norm()
}

/// `⟨ψ|p²/2m + U(q - center)|ψ⟩`, kinetic part evaluated spectrally.
pub fn energy_expectation(psi: &QuantumState, potential: &PotentialModel, particle: Particle, center: f64) -> f64 {
    let mut spectral = Spectral::new(&psi.grid);
    spectral.kinetic_expectation(&psi.amplitudes, particle, 0.0)
        + potential_expectation(psi, potential, particle.mass, center)
}

/// A computed ground state and its energy.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub state: QuantumState,
    pub energy: f64,
    pub residual: f64,
}

/// Ground state of the trap resting at `center`.
///
/// Harmonic traps use the analytic Gaussian. Other shapes start from the
/// harmonic approximation, relax in imaginary time and are then refined by
/// a preconditioned block eigensolver. For a lattice the central well is
/// treated in isolation (the potential is held at the barrier height
/// outside it), which is the localised deep-lattice state.
pub fn ground_state(potential: &PotentialModel, particle: Particle, grid: Grid, center: f64) -> Result<GroundState> {
    potential.validate()?;
    let m = particle.mass;
    let omega = potential.frequency(m);
    let c = center + potential.equilibrium();
    let guess = QuantumState::harmonic_eigenstate(grid, m, omega, particle.hbar, c, 0)?;
    let v = isolated_well(potential, m, &grid, center);
    let mut spectral = Spectral::new(&grid);
    let dx = grid.dx;
    let kinetic: Vec<f64> = spectral
        .k
        .iter()
        .map(|k| particle.hbar * particle.hbar * k * k / (2.0 * m))
        .collect();

    let (vector, energy, residual) = if let PotentialModel::Harmonic { .. } = potential {
        let x: Vec<f64> = guess.amplitudes.iter().map(|a| a.re).collect();
        let hx = apply_hamiltonian(&mut spectral, &kinetic, &v, &x);
        let e = dot(&x, &hx, dx);
        let r = residual_norm(&x, &hx, e, dx);
        (x, e, r)
    } else {
        let v_min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let lifted: Vec<f64> = v.iter().map(|v| v - v_min).collect();
        let relaxed = imaginary_time(&mut spectral, &kinetic, &lifted, &guess, particle.hbar, omega)?;
        let (x, e, r) = lobpcg(&mut spectral, &kinetic, &lifted, relaxed, dx, particle.hbar * omega);
        (x, e + v_min, r)
    };
    if !(residual <= GROUND_STATE_TOLERANCE) {
        return Err(Error::Numerical(format!(
            "ground-state residual {residual:.3e} above {GROUND_STATE_TOLERANCE:e}; refine the grid"
        )));
    }
    let state = QuantumState::new(grid, vector.into_iter().map(|r| Complex64::new(r, 0.0)).collect())?;
    Ok(GroundState {
        state,
        energy,
        residual,
    })
}

/// Energy above the ground level of the trap resting at `center`.
pub fn excess_energy_quantum(
    psi: &QuantumState,
    potential: &PotentialModel,
    particle: Particle,
    center: f64,
) -> Result<f64> {
    let ground = ground_state(potential, particle, psi.grid, center)?;
    Ok(energy_expectation(psi, potential, particle, center) - ground.energy)
}

fn isolated_well(potential: &PotentialModel, mass: f64, grid: &Grid, center: f64) -> Vec<f64> {
    (0..grid.len())
        .map(|j| {
            let y = grid.x(j) - center;
            match *potential {
                PotentialModel::Lattice { depth, .. } if !potential.in_central_well(y) => depth,
                _ => potential.energy(mass, y),
            }
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64], dx: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * dx
}

fn residual_norm(x: &[f64], hx: &[f64], e: f64, dx: f64) -> f64 {
    (hx.iter().zip(x).map(|(h, x)| (h - e * x).powi(2)).sum::<f64>() * dx).sqrt()
}

fn apply_hamiltonian(spectral: &mut Spectral, kinetic: &[f64], v: &[f64], x: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&r| Complex64::new(r, 0.0)).collect();
    spectral.forward(&mut buf);
    buf.iter_mut().zip(kinetic).for_each(|(a, t)| *a *= t);
    spectral.inverse(&mut buf);
    buf.iter().zip(v).zip(x).map(|((a, v), x)| a.re + v * x).collect()
}

fn precondition(spectral: &mut Spectral, kinetic: &[f64], shift: f64, r: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex64> = r.iter().map(|&r| Complex64::new(r, 0.0)).collect();
    spectral.forward(&mut buf);
    buf.iter_mut().zip(kinetic).for_each(|(a, t)| *a /= t + shift);
    spectral.inverse(&mut buf);
    buf.iter().map(|a| a.re).collect()
}

fn imaginary_time(
    spectral: &mut Spectral,
    kinetic: &[f64],
    v: &[f64],
    guess: &QuantumState,
    hbar: f64,
    omega: f64,
) -> Result<Vec<f64>> {
    let tau = 0.05 / omega;
    let half: Vec<f64> = v.iter().map(|v| (-v * tau / (2.0 * hbar)).exp()).collect();
    let full: Vec<f64> = kinetic.iter().map(|t| (-t * tau / hbar).exp()).collect();
    let mut buf = guess.amplitudes.clone();
    for _ in 0..200 {
        buf.iter_mut().zip(&half).for_each(|(a, h)| *a *= h);
        spectral.forward(&mut buf);
        buf.iter_mut().zip(&full).for_each(|(a, f)| *a *= f);
        spectral.inverse(&mut buf);
        buf.iter_mut().zip(&half).for_each(|(a, h)| *a *= h);
        let n = buf.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Numerical("imaginary-time relaxation collapsed".into()));
        }
        buf.iter_mut().for_each(|a| *a /= n);
    }
    Ok(buf.iter().map(|a| a.re).collect())
}

/// Locally optimal block preconditioned conjugate gradient for the lowest
/// eigenpair, using the three-vector subspace {x, Tw, p}.
fn lobpcg(
    spectral: &mut Spectral,
    kinetic: &[f64],
    v: &[f64],
    x0: Vec<f64>,
    dx: f64,
    shift: f64,
) -> (Vec<f64>, f64, f64) {
    const MAX_ITERATIONS: usize = 3000;
    let scale = |x: &mut Vec<f64>, s: f64| x.iter_mut().for_each(|a| *a *= s);
    let axpy = |y: &mut Vec<f64>, a: f64, x: &[f64]| y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);

    let mut x = x0;
    let n0 = dot(&x, &x, dx).sqrt();
    scale(&mut x, 1.0 / n0);
    let mut hx = apply_hamiltonian(spectral, kinetic, v, &x);
    let mut p: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut best = (x.clone(), f64::INFINITY, f64::INFINITY);

    for it in 0..MAX_ITERATIONS {
        if it % 20 == 0 {
            hx = apply_hamiltonian(spectral, kinetic, v, &x);
        }
        let e = dot(&x, &hx, dx);
        let res = residual_norm(&x, &hx, e, dx);
        if res < best.2 {
            best = (x.clone(), e, res);
        }
        if res <= 0.05 * GROUND_STATE_TOLERANCE {
            break;
        }
        let r: Vec<f64> = hx.iter().zip(&x).map(|(h, x)| h - e * x).collect();
        let w = precondition(spectral, kinetic, shift, &r);

        let mut basis: Vec<(Vec<f64>, Vec<f64>)> = vec![(x.clone(), hx.clone())];
        let mut push = |mut b: Vec<f64>, mut hb: Option<Vec<f64>>, basis: &mut Vec<(Vec<f64>, Vec<f64>)>| {
            let before = dot(&b, &b, dx).sqrt();
            for _ in 0..2 {
                for (q, hq) in basis.iter() {
                    let c = dot(q, &b, dx);
                    axpy(&mut b, -c, q);
                    if let Some(hb) = hb.as_mut() {
                        axpy(hb, -c, hq);
                    }
                }
            }
            let after = dot(&b, &b, dx).sqrt();
            if !(after > 1e-10 * before && after > 0.0) {
                return;
            }
            scale(&mut b, 1.0 / after);
            let hb = match hb {
                Some(mut hb) => {
                    scale(&mut hb, 1.0 / after);
                    hb
                }
                None => apply_hamiltonian(spectral, kinetic, v, &b),
            };
            basis.push((b, hb));
        };
        push(w, None, &mut basis);
        if let Some((pv, hp)) = p.take() {
            push(pv, Some(hp), &mut basis);
        }

        let dim = basis.len();
        // Rayleigh-Ritz on H - e keeps the small corrections resolvable.
        let shifted: Vec<Vec<f64>> = basis
            .iter()
            .map(|(b, hb)| hb.iter().zip(b).map(|(h, b)| h - e * b).collect())
            .collect();
        let s = DMatrix::from_fn(dim, dim, |i, j| {
            0.5 * (dot(&basis[i].0, &shifted[j], dx) + dot(&basis[j].0, &shifted[i], dx))
        });
        let eig = SymmetricEigen::new(s);
        let idx = eig.eigenvalues.imin();
        let c = eig.eigenvectors.column(idx);

        let n = x.len();
        let mut nx = vec![0.0; n];
        let mut nhx = vec![0.0; n];
        let mut np = vec![0.0; n];
        let mut nhp = vec![0.0; n];
        for (i, (b, hb)) in basis.iter().enumerate() {
            axpy(&mut nx, c[i], b);
            axpy(&mut nhx, c[i], hb);
            if i > 0 {
                axpy(&mut np, c[i], b);
                axpy(&mut nhp, c[i], hb);
            }
        }
        let norm = dot(&nx, &nx, dx).sqrt();
        scale(&mut nx, 1.0 / norm);
        scale(&mut nhx, 1.0 / norm);
        x = nx;
        hx = nhx;
        if dim > 1 {
            p = Some((np, nhp));
        }
    }

    let (mut x, _, _) = best;
    if x.iter().sum::<f64>() < 0.0 {
        scale(&mut x, -1.0);
    }
    let hx = apply_hamiltonian(spectral, kinetic, v, &x);
    let e = dot(&x, &hx, dx);
    let res = residual_norm(&x, &hx, e, dx);
    (x, e, res)
}

/// Wavefunction captured during propagation.
#[derive(Debug, Clone)]
pub struct Snapshot {
    /// Requested time.
    pub requested: f64,
    /// Grid time at which the state was taken (first step end at or after the request).
    pub time: f64,
    pub state: QuantumState,
}

/// Result of a recorded propagation.
#[derive(Debug, Clone)]
pub struct QuantumRun {
    pub final_state: QuantumState,
    pub snapshots: Vec<Snapshot>,
    /// Largest `⟨(p - m ẋ_0)²⟩/2m + ⟨U⟩` seen at the periodic checks.
    pub max_frame_energy: f64,
    pub max_relative_displacement: f64,
    pub steps: usize,
}

/// Split-step propagation of `psi0` through the transport.
///
/// Strang splitting with spectral kinetic steps. The counterdiabatic
/// momentum coupling is a pure translation in momentum space and is folded
/// into the kinetic factor as the exact increment of `x_0` over each step;
/// position jumps of the trap itself are not followed by it.
pub fn propagate_quantum<M: TrapMotion + ?Sized>(
    path: &M,
    potential: &PotentialModel,
    particle: Particle,
    mode: DrivingMode,
    psi0: &QuantumState,
    dt: f64,
) -> Result<QuantumState> {
    Ok(propagate_recorded(path, potential, particle, mode, psi0, dt, &[])?.final_state)
}

/// As [`propagate_quantum`], also capturing snapshots at the requested times.
pub fn propagate_recorded<M: TrapMotion + ?Sized>(
    path: &M,
    potential: &PotentialModel,
    particle: Particle,
    mode: DrivingMode,
    psi0: &QuantumState,
    dt: f64,
    snapshot_times: &[f64],
) -> Result<QuantumRun> {
    run_quantum(path, potential, particle, mode, psi0, dt, snapshot_times, |_| {
        *potential
    })
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn run_quantum<M, P>(
    path: &M,
    nominal: &PotentialModel,
    particle: Particle,
    mode: DrivingMode,
    psi0: &QuantumState,
    dt: f64,
    snapshot_times: &[f64],
    potential_at: P,
) -> Result<QuantumRun>
where
    M: TrapMotion + ?Sized,
    P: Fn(usize) -> PotentialModel,
{
    nominal.validate()?;
    let m = particle.mass;
    let hbar = particle.hbar;
    let omega = nominal.frequency(m);
    let max_dt = TAU / (40.0 * omega);
    if !(dt > 0.0 && dt <= max_dt) {
        return Err(Error::invalid(format!("time step {dt} must lie in (0, {max_dt:.6}]")));
    }
    if (psi0.norm() - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::invalid("initial state is not normalised"));
    }
    let t_f = path.duration();
    if snapshot_times.iter().any(|&t| !(0.0..=t_f).contains(&t)) {
        return Err(Error::invalid("snapshot times must lie in [0, t_f]"));
    }

    let grid = psi0.grid;
    let mut spectral = Spectral::new(&grid);
    let xs = grid.points();
    let steps = ((t_f / dt) - 1e-9).ceil().max(1.0) as usize;
    let h = t_f / steps as f64;
    let kin: Vec<f64> = spectral.k.iter().map(|k| hbar * k * k / (2.0 * m)).collect();
    let kinetic_phase =
        |len: f64| -> Vec<Complex64> { kin.iter().map(|w| Complex64::from_polar(1.0, -w * len)).collect() };
    let regular = kinetic_phase(h);
    let mut breaks = path.breakpoints();
    breaks.sort_by(f64::total_cmp);
    let eps = 1e-12 * t_f;

    let mut order: Vec<usize> = (0..snapshot_times.len()).collect();
    order.sort_by(|&a, &b| snapshot_times[a].total_cmp(&snapshot_times[b]));
    let mut pending = order.into_iter().peekable();
    let mut snapshots = Vec::with_capacity(snapshot_times.len());

    let mut psi = psi0.amplitudes.clone();
    let mut max_frame_energy = 0.0f64;
    let mut max_displacement = 0.0f64;

    let half_kick = |psi: &mut [Complex64], u: &PotentialModel, t: f64, side: Side, len: f64| {
        let k = path.kinematics(t, side);
        let extra = if mode == DrivingMode::Compensating {
            -m * k.acceleration
        } else {
            0.0
        };
        let f = -0.5 * len / hbar;
        for (a, &x) in psi.iter_mut().zip(&xs) {
            let v = u.energy(m, x - k.position) + extra * x;
            *a *= Complex64::from_polar(1.0, f * v);
        }
    };

    let mut check = |psi: &[Complex64], t: f64, side: Side, spectral: &mut Spectral| -> Result<()> {
        let state = QuantumState {
            grid,
            amplitudes: psi.to_vec(),
        };
        let density = state.boundary_density();
        if density > BOUNDARY_DENSITY_LIMIT {
            return Err(Error::BoundaryContamination { time: t, density });
        }
        let k = path.kinematics(t, side);
        let outside = state.probability_outside(nominal, k.position);
        if outside > ESCAPE_PROBABILITY {
            return Err(Error::Escape {
                time: t,
                detail: format!("probability {outside:.3e} outside the central well"),
            });
        }
        let frame_v = if mode == DrivingMode::Counterdiabatic {
            0.0
        } else {
            k.velocity
        };
        let e = spectral.kinetic_expectation(psi, particle, frame_v)
            + potential_expectation(&state, nominal, m, k.position)
            - nominal.minimum_energy();
        max_frame_energy = max_frame_energy.max(e);
        max_displacement = max_displacement.max((state.mean_position() - k.position - nominal.equilibrium()).abs());
        Ok(())
    };

    check(&psi, 0.0, Side::Right, &mut spectral)?;
    while let Some(&i) = pending.peek() {
        if snapshot_times[i] > 1e-12 * t_f {
            break;
        }
        snapshots.push((i, 0.0, psi.clone()));
        pending.next();
    }

    let mut cuts = Vec::with_capacity(4);
    for s in 0..steps {
        let t0 = s as f64 * h;
        let t1 = if s + 1 == steps { t_f } else { (s + 1) as f64 * h };
        let u = potential_at(s);
        cuts.clear();
        cuts.push(t0);
        cuts.extend(breaks.iter().copied().filter(|&b| b > t0 + eps && b < t1 - eps));
        cuts.push(t1);
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let len = b - a;
            half_kick(&mut psi, &u, a, Side::Right, len);
            spectral.forward(&mut psi);
            let irregular;
            let phase = if cuts.len() == 2 {
                &regular
            } else {
                irregular = kinetic_phase(len);
                &irregular
            };
            if mode == DrivingMode::Counterdiabatic {
                let shift = path.kinematics(b, Side::Left).position - path.kinematics(a, Side::Right).position;
                for ((amp, p), &k) in psi.iter_mut().zip(phase).zip(&spectral.k) {
                    *amp *= p * Complex64::from_polar(1.0, -k * shift);
                }
            } else {
                psi.iter_mut().zip(phase).for_each(|(amp, p)| *amp *= p);
            }
            spectral.inverse(&mut psi);
            half_kick(&mut psi, &u, b, Side::Left, len);
        }
        if (s + 1) % CHECK_EVERY == 0 || s + 1 == steps {
            check(&psi, t1, Side::Left, &mut spectral)?;
        }
        while let Some(&i) = pending.peek() {
            if snapshot_times[i] > t1 + 1e-12 * t_f {
                break;
            }
            snapshots.push((i, t1, psi.clone()));
            pending.next();
        }
    }

    let final_state = QuantumState { grid, amplitudes: psi };
    let drift = (final_state.norm() - 1.0).abs();
    if drift > NORM_TOLERANCE {
        return Err(Error::Numerical(format!("norm drifted by {drift:.3e}")));
    }
    snapshots.sort_by_key(|s| s.0);
    Ok(QuantumRun {
        final_state,
        snapshots: snapshots
            .into_iter()
            .map(|(i, time, amplitudes)| Snapshot {
                requested: snapshot_times[i],
                time,
                state: QuantumState { grid, amplitudes },
            })
            .collect(),
        max_frame_energy,
        max_relative_displacement: max_displacement,
        steps,
    })
}

/// Full quantum transport simulation: ground state of the initial trap,
/// propagation, and comparison with the ground state of the final trap.
#[derive(Debug, Clone)]
pub struct QuantumSimulation {
    pub report: ExcitationReport,
    pub run: QuantumRun,
    pub target: GroundState,
}

pub fn simulate_quantum<M: TrapMotion + ?Sized>(
    path: &M,
    potential: &PotentialModel,
    particle: Particle,
    mode: DrivingMode,
    grid: Grid,
    dt: Option<f64>,
    snapshot_times: &[f64],
) -> Result<QuantumSimulation> {
    potential.validate()?;
    let omega = potential.frequency(particle.mass);
    let dt = dt.unwrap_or_else(|| default_time_step(omega, path.duration()));
    let start = ground_state(potential, particle, grid, path.initial_position())?;
    let target = ground_state(potential, particle, grid, path.final_position())?;
    let run = propagate_recorded(path, potential, particle, mode, &start.state, dt, snapshot_times)?;
    let final_energy = energy_expectation(&run.final_state, potential, particle, path.final_position());
    let report = ExcitationReport {
        mode,
        final_excess_energy: final_energy - target.energy,
        initial_excess_energy: energy_expectation(&start.state, potential, particle, path.initial_position())
            - start.energy,
        fidelity: Some(fidelity(&run.final_state, &target.state)?),
        max_transient_energy: run.max_frame_energy - (start.energy - potential.minimum_energy()),
        max_relative_displacement: run.max_relative_displacement,
        non_physical: mode == DrivingMode::Counterdiabatic,
    };
    Ok(QuantumSimulation { report, run, target })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{solve_boundary_polynomial, trap_from_reference, PathRole, PolyPath, TransportTask};

    const UNIT: Particle = Particle { mass: 1.0, hbar: 1.0 };
    const HARMONIC: PotentialModel = PotentialModel::Harmonic { omega: 1.0 };

    fn sta_trap(t_f: f64) -> PolyPath {
        let task = TransportTask::new(1.0, 1.0, 1.0, t_f).unwrap();
        trap_from_reference(&solve_boundary_polynomial(&task, 2).unwrap(), &task).unwrap()
    }

    #[test]
    fn harmonic_ground_state_is_analytic() {
        let grid = Grid::new(-10.0, 10.0, 512).unwrap();
        let g = ground_state(&HARMONIC, UNIT, grid, 0.0).unwrap();
        assert!((g.energy - 0.5).abs() < 1e-12);
        assert!(g.residual < 1e-10);
        let x2: f64 = g
            .state
            .density()
            .iter()
            .enumerate()
            .map(|(j, d)| d * grid.x(j).powi(2))
            .sum::<f64>()
            * grid.dx();
        assert!((x2 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn deep_gaussian_and_lattice_levels() {
        let gauss = PotentialModel::Gaussian {
            depth: 200.0,
            waist: 2.0,
        };
        let grid = Grid::new(-8.0, 8.0, 1024).unwrap();
        let g = ground_state(&gauss, UNIT, grid, 0.0).unwrap();
        let w = gauss.frequency(1.0);
        assert!(((g.energy + 200.0) - 0.5 * w).abs() < 0.02 * 0.5 * w, "{}", g.energy);
        assert!(g.residual <= GROUND_STATE_TOLERANCE);

        let lattice = PotentialModel::Lattice {
            depth: 400.0,
            wavenumber: 1.0,
            phase: 0.0,
        };
        let l = ground_state(&lattice, UNIT, Grid::new(-6.0, 6.0, 1024).unwrap(), 0.0).unwrap();
        let w = lattice.frequency(1.0);
        assert!((l.energy - 0.5 * w).abs() < 0.02 * 0.5 * w, "{}", l.energy);
        assert!(l.residual <= GROUND_STATE_TOLERANCE);
    }

    #[test]
    fn fidelity_properties() {
        let grid = Grid::new(-20.0, 20.0, 1024).unwrap();
        let a = QuantumState::harmonic_eigenstate(grid, 1.0, 1.0, 1.0, -8.0, 0).unwrap();
        let b = QuantumState::harmonic_eigenstate(grid, 1.0, 1.0, 1.0, 8.0, 0).unwrap();
        assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-14);
        assert!(fidelity(&a, &b).unwrap() <= 1e-8);
        let phase = Complex64::from_polar(1.0, 0.7);
        let rotated = QuantumState::new(grid, a.amplitudes().iter().map(|z| z * phase).collect()).unwrap();
        assert!((fidelity(&rotated, &a).unwrap() - 1.0).abs() < 1e-14);
        let other = Grid::new(-20.0, 20.0, 512).unwrap();
        let c = QuantumState::harmonic_eigenstate(other, 1.0, 1.0, 1.0, 0.0, 0).unwrap();
        assert!(fidelity(&a, &c).is_err());
    }

    #[test]
    fn excess_energy_of_low_levels() {
        let grid = Grid::new(-12.0, 12.0, 512).unwrap();
        let g = ground_state(&HARMONIC, UNIT, grid, 1.0).unwrap();
        assert!(excess_energy_quantum(&g.state, &HARMONIC, UNIT, 1.0).unwrap().abs() < 1e-9);
        let e1 = QuantumState::harmonic_eigenstate(grid, 1.0, 1.0, 1.0, 1.0, 1).unwrap();
        assert!((excess_energy_quantum(&e1, &HARMONIC, UNIT, 1.0).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn static_trap_keeps_ground_state() {
        let path = PolyPath::new(PathRole::Trap, 3.0, vec![0.0]).unwrap();
        let grid = Grid::for_transport(&path, &HARMONIC, UNIT, 512, 10.0).unwrap();
        let g = ground_state(&HARMONIC, UNIT, grid, 0.0).unwrap();
        let out = propagate_quantum(&path, &HARMONIC, UNIT, DrivingMode::Plain, &g.state, 0.01).unwrap();
        assert!((fidelity(&out, &g.state).unwrap() - 1.0).abs() < 1e-10);
        assert!((out.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn counterdiabatic_transport_is_exact() {
        let task = TransportTask::new(1.0, 1.0, 1.0, 0.05 * TAU).unwrap();
        let x0 = solve_boundary_polynomial(&task, 2).unwrap().with_role(PathRole::Trap);
        let grid = Grid::for_transport(&x0, &HARMONIC, UNIT, 1024, 8.0).unwrap();
        let sim = simulate_quantum(&x0, &HARMONIC, UNIT, DrivingMode::Counterdiabatic, grid, None, &[]).unwrap();
        assert!(sim.report.fidelity.unwrap() >= 1.0 - 1e-6, "{:?}", sim.report);
        assert!(sim.report.non_physical);
    }

    #[test]
    fn plain_sta_transport_in_harmonic_trap() {
        for t_f in [0.1 * TAU, TAU] {
            let x0 = sta_trap(t_f);
            let grid = Grid::for_transport(&x0, &HARMONIC, UNIT, 1024, 8.0).unwrap();
            let sim =
                simulate_quantum(&x0, &HARMONIC, UNIT, DrivingMode::Plain, grid, None, &[0.0, 0.5 * t_f]).unwrap();
            assert!(
                sim.report.final_excess_energy.abs() <= 1e-8 * 0.5,
                "{t_f}: {:?}",
                sim.report
            );
            assert!(sim.report.fidelity.unwrap() >= 1.0 - 1e-6);
            assert_eq!(sim.run.snapshots.len(), 2);
            assert_eq!(sim.run.snapshots[0].time, 0.0);
        }
    }

    #[test]
    fn time_step_guard_and_boundary_check() {
        let path = PolyPath::new(PathRole::Trap, 1.0, vec![0.0]).unwrap();
        let grid = Grid::new(-10.0, 10.0, 256).unwrap();
        let g = ground_state(&HARMONIC, UNIT, grid, 0.0).unwrap();
        assert!(propagate_quantum(&path, &HARMONIC, UNIT, DrivingMode::Plain, &g.state, 0.5).is_err());
        let far = QuantumState::harmonic_eigenstate(grid, 1.0, 1.0, 1.0, -8.0, 0).unwrap();
        let err = propagate_quantum(&path, &HARMONIC, UNIT, DrivingMode::Plain, &far, 0.01).unwrap_err();
        assert!(matches!(err, Error::BoundaryContamination { .. }));
    }
}
