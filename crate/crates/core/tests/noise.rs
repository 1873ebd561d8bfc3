use num_complex::Complex64;
use sta_shuttle::dynamics::{integrate_classical, ClassicalState, DrivingMode, Particle, PotentialModel};
use sta_shuttle::fourier::design_multinull;
use sta_shuttle::noise::*;
use sta_shuttle::trajectory::*;

const UNIT: Particle = Particle { mass: 1.0, hbar: 1.0 };
const DEEP_K: f64 = 0.1;

/// Deep lattice with `ω = 1`; close to harmonic over the noise-induced motion.
fn deep_lattice() -> PotentialModel {
    PotentialModel::Lattice {
        depth: 50.0,
        wavenumber: DEEP_K,
        phase: 0.0,
    }
}

/// Shallow lattice with `ω = 1`.
fn shallow_lattice() -> PotentialModel {
    PotentialModel::Lattice {
        depth: 0.5,
        wavenumber: 1.0,
        phase: 0.0,
    }
}

fn task(t_f: f64) -> TransportTask {
    TransportTask::new(1.0, 1.0, 1.0, t_f).unwrap()
}

fn sta(t_f: f64, k: usize) -> PolyPath {
    let t = task(t_f);
    trap_from_reference(&solve_boundary_polynomial(&t, k).unwrap(), &t).unwrap()
}

fn model(kind: NoiseKind, lambda: f64) -> NoiseModel {
    NoiseModel::new(NoiseTarget::Position, kind, lambda, 7).unwrap()
}

const WHITE: NoiseKind = NoiseKind::White { intensity: 1.0 };

fn ou(tau: f64) -> NoiseKind {
    NoiseKind::Ou {
        variance: 1.0,
        correlation_time: tau,
    }
}

fn sensitivity<M: TrapMotion>(path: &M, lattice: &PotentialModel, noise: &NoiseModel, n: usize) -> SensitivityReport {
    monte_carlo_sensitivity(path, lattice, UNIT, noise, n, &MonteCarloOptions::default()).unwrap()
}

/// Second-order mean excess for position noise in a harmonic well of unit
/// frequency: `(m/2)(λ/K)² · 2 Re ∫_0^T (T - u) α(u) e^{iu} du` for OU noise.
fn ou_theory(t: f64, tau: f64, lambda: f64) -> f64 {
    let g = Complex64::new(1.0 / tau, -1.0);
    let integral = t / g - (Complex64::new(1.0, 0.0) - (-g * t).exp()) / (g * g);
    (lambda / DEEP_K).powi(2) * integral.re
}

#[test]
fn excess_scales_with_lambda_squared() {
    let x0 = sta(4.0, 2);
    let lambdas = [0.005, 0.01, 0.02];
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for l in lambdas {
        let r = sensitivity(&x0, &deep_lattice(), &model(ou(1.0), l), 200);
        assert!(r.perturbation_rms < PERTURBATIVE_RMS);
        let (x, y) = (l.ln(), r.noise_induced_excess.ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let n = lambdas.len() as f64;
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    assert!((slope - 2.0).abs() <= 0.1, "exponent {slope}");
}

#[test]
fn white_position_noise_ignores_the_trajectory() {
    let noise = model(WHITE, 0.001);
    let t = task(3.0);
    let paths = [sta(3.0, 2), sta(3.0, 3), design_multinull(&t, &[1.0], 2).unwrap()];
    let reports: Vec<SensitivityReport> = paths
        .iter()
        .map(|p| sensitivity(p, &deep_lattice(), &noise, 2000))
        .collect();
    let theory = 0.5 * (0.001 / DEEP_K).powi(2) * 3.0;
    for r in &reports {
        assert!(r.perturbation_rms < PERTURBATIVE_RMS);
        assert!(
            (r.noise_induced_excess / theory - 1.0).abs() < 0.1,
            "{} vs {theory}",
            r.noise_induced_excess
        );
    }
    for pair in reports.windows(2) {
        let se = pair[0].standard_error.hypot(pair[1].standard_error);
        assert!((pair[0].noise_induced_excess - pair[1].noise_induced_excess).abs() <= 2.0 * se);
    }
}

#[test]
fn white_noise_excess_grows_linearly_with_duration() {
    let noise = model(WHITE, 0.001);
    let a = sensitivity(&sta(3.0, 2), &deep_lattice(), &noise, 1000);
    let b = sensitivity(&sta(6.0, 2), &deep_lattice(), &noise, 1000);
    let ratio = b.noise_induced_excess / a.noise_induced_excess;
    let rel_se = (a.standard_error / a.noise_induced_excess).hypot(b.standard_error / b.noise_induced_excess);
    assert!((ratio - 2.0).abs() <= 3.0 * 2.0 * rel_se, "ratio {ratio}");
}

#[test]
fn correlated_noise_gives_non_monotonic_duration_dependence() {
    let tau = 8.0;
    let noise = model(ou(tau), 0.01);
    let durations = [2.0, 3.5, 6.0, 9.0];
    let rows = scan_durations(
        &task(2.0),
        &deep_lattice(),
        UNIT,
        &noise,
        &durations,
        400,
        2,
        &MonteCarloOptions::default(),
    )
    .unwrap();
    let e: Vec<f64> = rows.iter().map(|r| r.mean_excess).collect();
    assert!(e[0] < e[1] && e[1] > e[2] && e[2] < e[3], "scan {e:?}");
    for r in &rows {
        let theory = ou_theory(r.t_f, tau, 0.01);
        let tol = (0.15 * theory).max(3.0 * r.stderr);
        assert!(
            (r.mean_excess - theory).abs() <= tol,
            "t_f {}: {} vs {theory}",
            r.t_f,
            r.mean_excess
        );
    }
}

#[test]
fn noiseless_baseline_matches_the_deterministic_run() {
    let x0 = sta(2.0, 2);
    let lattice = shallow_lattice();
    let r = sensitivity(&x0, &lattice, &model(ou(1.0), 0.01), 10);
    let start = ClassicalState::at_rest(&x0, &lattice);
    let det = integrate_classical(&x0, &lattice, 1.0, DrivingMode::Plain, start, r.steps)
        .unwrap()
        .report;
    assert!((r.noiseless_excess - det.final_excess_energy).abs() <= 1e-12 * task(2.0).energy_scale());
    assert!(r.noiseless_excess > 0.0);
}

#[test]
fn monte_carlo_is_reproducible_across_thread_counts() {
    let x0 = sta(3.0, 2);
    let noise = model(ou(1.0), 0.01);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sensitivity(&x0, &shallow_lattice(), &noise, 64))
    };
    let (a, b, c) = (run(1), run(3), run(1));
    assert_eq!(a, b);
    assert_eq!(a, c);
    let other = sensitivity(
        &x0,
        &shallow_lattice(),
        &NoiseModel {
            seed: noise.seed ^ (1 << 40),
            ..noise
        },
        64,
    );
    assert_ne!(a.mean_excess_energy, other.mean_excess_energy);
}

#[test]
fn heating_rates_follow_the_noise_spectrum() {
    let lattice = shallow_lattice();
    let options = HeatingOptions::default();
    let cases = [
        (NoiseTarget::Position, 0.01, ou(1.0), ou(2.0 - 3f64.sqrt())),
        (NoiseTarget::Amplitude, 0.1, ou(0.25), ou(2.0)),
        (NoiseTarget::Wavenumber, 0.1, ou(0.25), ou(2.0)),
    ];
    for (target, lambda, a, b) in cases {
        let first = NoiseModel::new(target, a, lambda, 11).unwrap();
        let c = heating_rate_check(&lattice, 1.0, &first, &first.with_kind(b), &options).unwrap();
        assert_eq!(c.first.probe_frequency, probe_frequency(target, 1.0));
        assert!(c.consistent, "{target:?}: deviation {}", c.relative_deviation);
    }
}

#[test]
fn welch_estimate_matches_the_ou_spectrum() {
    let kind = ou(0.5);
    let dt = 0.01;
    let xi = kind.sample(dt, 1 << 18, 3).unwrap();
    let psd = psd_estimate(&xi, dt, None).unwrap();
    for w in [0.5, 2.0, 5.0] {
        let est = psd.band_mean(0.9 * w, 1.1 * w).unwrap();
        let exact = kind.spectral_density(w);
        assert!((est / exact - 1.0).abs() < 0.1, "S({w}) {est} vs {exact}");
    }
}

#[test]
fn large_noise_reports_escapes() {
    let x0 = sta(3.0, 2);
    let err = monte_carlo_sensitivity(
        &x0,
        &shallow_lattice(),
        UNIT,
        &model(WHITE, 0.5),
        50,
        &MonteCarloOptions::default(),
    );
    assert!(err.is_err());
}
