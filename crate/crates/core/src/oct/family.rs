use crate::error::{Error, Result};
use crate::trajectory::{
    derivative_coefficients, horner, solve_boundary_polynomial, PathRole, PolyPath, TransportTask,
    DEFAULT_CONTINUITY_ORDER,
};

/// Largest number of free coefficients in the smooth family.
pub const MAX_FAMILY_DIM: usize = 12;

/// Rest-to-rest reference paths
/// `x_c(s) = d [q(s) + s³(1-s)³ Σ_j β_j P_j(2s-1)]`,
/// with `q` the quintic and `P_j` Legendre polynomials. Every member meets
/// the boundary conditions exactly, whatever `β`.
#[derive(Debug, Clone)]
pub(crate) struct SmoothFamily {
    base: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

impl SmoothFamily {
    pub(crate) fn new(task: &TransportTask, dim: usize) -> Result<Self> {
        if dim > MAX_FAMILY_DIM {
            return Err(Error::invalid(format!(
                "family dimension {dim} exceeds {MAX_FAMILY_DIM}"
            )));
        }
        let d = task.distance();
        let base = solve_boundary_polynomial(task, DEFAULT_CONTINUITY_ORDER)?
            .coefficients()
            .to_vec();
        let bump = [0.0, 0.0, 0.0, 1.0, -3.0, 3.0, -1.0];
        let basis = (0..dim)
            .map(|j| {
                multiply(&bump, &shifted_legendre(j))
                    .into_iter()
                    .map(|c| c * d)
                    .collect()
            })
            .collect();
        Ok(SmoothFamily { base, basis })
    }

    pub(crate) fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Monomial coefficients in `s` of the member `β`.
    pub(crate) fn coefficients(&self, beta: &[f64]) -> Vec<f64> {
        let len = self.basis.iter().map(Vec::len).max().unwrap_or(0).max(self.base.len());
        let mut c = vec![0.0; len];
        c[..self.base.len()].copy_from_slice(&self.base);
        for (b, col) in beta.iter().zip(&self.basis) {
            for (ci, v) in c.iter_mut().zip(col) {
                *ci += b * v;
            }
        }
        while c.len() > 1 && c.last() == Some(&0.0) {
            c.pop();
        }
        c
    }

    pub(crate) fn reference(&self, task: &TransportTask, beta: &[f64]) -> Result<PolyPath> {
        PolyPath::new(PathRole::Reference, task.duration(), self.coefficients(beta))
    }

    /// Values of the `order`-th `s`-derivative of the base and every basis
    /// polynomial at `points`, for cheap repeated evaluation.
    pub(crate) fn table(&self, order: usize, points: &[f64]) -> DerivativeTable {
        let eval = |c: &[f64]| -> Vec<f64> {
            let dc = derivative_coefficients(c, order);
            points.iter().map(|&s| horner(&dc, s)).collect()
        };
        DerivativeTable {
            base: eval(&self.base),
            columns: self.basis.iter().map(|b| eval(b)).collect(),
        }
    }
}

pub(crate) struct DerivativeTable {
    base: Vec<f64>,
    columns: Vec<Vec<f64>>,
}

impl DerivativeTable {
    pub(crate) fn values(&self, beta: &[f64]) -> Vec<f64> {
        let mut v = self.base.clone();
        for (b, col) in beta.iter().zip(&self.columns) {
            for (vi, c) in v.iter_mut().zip(col) {
                *vi += b * c;
            }
        }
        v
    }
}

/// `n` uniform points on `[0, 1]`.
pub(crate) fn uniform_points(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

fn multiply(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Monomial coefficients of `P_n(2s - 1)`.
fn shifted_legendre(n: usize) -> Vec<f64> {
    let binom = |n: usize, k: usize| -> f64 { (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64) };
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    (0..=n)
        .map(|k| {
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * s * binom(n, k) * binom(n + k, k)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_values() {
        // P_2(x) = (3x² - 1)/2 at x = 2s - 1
        let p = shifted_legendre(2);
        for s in [0.0, 0.3, 1.0] {
            let x: f64 = 2.0 * s - 1.0;
            assert!((horner(&p, s) - 0.5 * (3.0 * x * x - 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn members_keep_boundary_conditions() {
        let task = TransportTask::new(1.0, 1.0, 2.0, 3.0).unwrap();
        let fam = SmoothFamily::new(&task, 5).unwrap();
        let x = fam.reference(&task, &[0.3, -1.2, 4.0, 0.5, 2.0]).unwrap();
        assert!(x.position(0.0).abs() < 1e-12);
        assert!((x.position(3.0) - 2.0).abs() < 1e-12);
        for order in 1..=2 {
            assert!(x.derivative(order, 0.0).abs() < 1e-12);
            assert!(x.derivative(order, 3.0).abs() < 1e-12);
        }
        let q = fam.reference(&task, &[0.0; 5]).unwrap();
        assert_eq!(q, solve_boundary_polynomial(&task, 2).unwrap());
        assert!(SmoothFamily::new(&task, 13).is_err());
    }
}
