use num_complex::Complex64;

/// `M_k(θ) = ∫_0^1 s^k e^{iθs} ds` for `k = 0..=max_k`, `θ ≥ 0`.
///
/// Uses the integration-by-parts recurrence `iθ M_k = e^{iθ} - k M_{k-1}`,
/// run upwards for `k ≤ θ` and downwards (Miller style, from a high start
/// index) for `k > θ`, so that each direction only ever damps rounding error.
pub(crate) fn phase_moments(theta: f64, max_k: usize) -> Vec<Complex64> {
    debug_assert!(theta >= 0.0);
    let e = Complex64::from_polar(1.0, theta);
    let i_theta = Complex64::new(0.0, theta);
    let mut m = vec![Complex64::new(0.0, 0.0); max_k + 1];

    // upward branch
    let forward_top = if theta >= 1.0 {
        (theta.floor() as usize).min(max_k)
    } else {
        0
    };
    let mut backward_floor = 0;
    if theta >= 1.0 {
        m[0] = (e - 1.0) / i_theta;
        for k in 1..=forward_top {
            m[k] = (e - k as f64 * m[k - 1]) / i_theta;
        }
        backward_floor = forward_top + 1;
    }
    if backward_floor > max_k {
        return m;
    }

    // downward branch: start far enough up that the start error is damped away
    let mut top = max_k.max(backward_floor);
    let mut damping = 1.0;
    while damping > 1e-18 {
        top += 1;
        damping *= theta / top as f64;
    }
    let mut current = e / (top as f64 + 1.0);
    for k in (backward_floor + 1..=top).rev() {
        let prev = (e - i_theta * current) / k as f64;
        if k - 1 <= max_k {
            m[k - 1] = prev;
        }
        current = prev;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Gauss-Legendre (5 nodes per panel) on many panels.
    fn quadrature(theta: f64, k: usize) -> Complex64 {
        let nodes = [
            (0.0, 0.568_888_888_888_888_9),
            (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
            (0.906_179_845_938_664, 0.236_926_885_056_189_1),
        ];
        let panels = 2000;
        let h = 1.0 / panels as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * h;
            for (x, w) in nodes {
                let s: f64 = mid + 0.5 * h * x;
                acc += 0.5 * h * w * s.powi(k as i32) * Complex64::from_polar(1.0, theta * s);
            }
        }
        acc
    }

    #[test]
    fn matches_quadrature_across_regimes() {
        for &theta in &[0.0, 1e-6, 0.3, 1.0, 2.5, 7.0, 19.0, 60.0, 250.0] {
            let m = phase_moments(theta, 25);
            for k in [0, 1, 2, 5, 11, 17, 25] {
                let q = quadrature(theta, k);
                let err = (m[k] - q).norm();
                assert!(err < 1e-12, "theta {theta} k {k}: {} vs {} ({err:e})", m[k], q);
            }
        }
    }

    #[test]
    fn zero_frequency_is_reciprocal() {
        let m = phase_moments(0.0, 6);
        for (k, v) in m.iter().enumerate() {
            assert!((v.re - 1.0 / (k as f64 + 1.0)).abs() < 1e-16 && v.im == 0.0);
        }
    }
}
