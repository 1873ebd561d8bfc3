use serde::{Deserialize, Serialize};

use super::moments::phase_moments;
use crate::error::{Error, Result};
use crate::trajectory::{
    boundary_rows, check_continuity_order, solve_rows, PathRole, PolyPath, TransportTask, MAX_DEGREE,
};

/// Maximum number of distinct null frequencies in one design.
pub const MAX_NULLS: usize = 8;

/// A frequency at which the acceleration transform must vanish.
///
/// With `flat` set, the first frequency derivative of the transform is
/// nulled as well, which widens the low-excitation window around `omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyNull {
    pub omega: f64,
    #[serde(default)]
    pub flat: bool,
}

impl FrequencyNull {
    pub fn simple(omega: f64) -> Self {
        FrequencyNull { omega, flat: false }
    }

    pub fn flat(omega: f64) -> Self {
        FrequencyNull { omega, flat: true }
    }

    fn constraint_count(&self) -> usize {
        if self.flat {
            4
        } else {
            2
        }
    }
}

/// Trap path with `x_0(0) = 0`, `x_0(t_f) = d`, derivatives `1..=k` zero at
/// both ends and a vanishing acceleration transform at every requested
/// frequency.
pub fn design_multinull(task: &TransportTask, null_frequencies: &[f64], continuity_order: usize) -> Result<PolyPath> {
    let nulls: Vec<FrequencyNull> = null_frequencies.iter().map(|&w| FrequencyNull::simple(w)).collect();
    design_with_nulls(task, &nulls, continuity_order)
}

/// General form of [`design_multinull`] accepting flat (value + slope) nulls.
pub fn design_with_nulls(task: &TransportTask, nulls: &[FrequencyNull], continuity_order: usize) -> Result<PolyPath> {
    check_continuity_order(continuity_order)?;
    validate_nulls(nulls)?;
    let n_coef = 2 * continuity_order + 2 + nulls.iter().map(FrequencyNull::constraint_count).sum::<usize>();
    if n_coef > MAX_DEGREE + 1 {
        return Err(Error::invalid(format!(
            "{} constraints need degree {} above the cap of {MAX_DEGREE}; drop nulls or lower the continuity order",
            n_coef,
            n_coef - 1
        )));
    }
    let mut rows = boundary_rows(n_coef, continuity_order, task.distance());
    rows.extend(null_rows(n_coef, task.duration(), nulls));
    let coefficients = solve_rows(
        rows,
        "null frequencies too close together or too low for this duration; \
         increase the continuity order (raising the degree) or spread the nulls",
    )?;
    PolyPath::new(PathRole::Trap, task.duration(), coefficients)
}

pub(crate) fn validate_nulls(nulls: &[FrequencyNull]) -> Result<()> {
    if nulls.len() > MAX_NULLS {
        return Err(Error::invalid(format!(
            "at most {MAX_NULLS} null frequencies are supported (got {})",
            nulls.len()
        )));
    }
    if let Some(n) = nulls.iter().find(|n| !(n.omega.is_finite() && n.omega > 0.0)) {
        return Err(Error::invalid(format!("null frequency {} must be positive", n.omega)));
    }
    for (i, a) in nulls.iter().enumerate() {
        if nulls[..i].iter().any(|b| b.omega == a.omega) {
            return Err(Error::invalid(format!("null frequency {} repeated", a.omega)));
        }
    }
    Ok(())
}

/// Real rows expressing `Re ã = Im ã = 0` (and the slope for flat nulls) as
/// linear functionals of the monomial coefficients in scaled time.
///
/// For `x = s^j`: `ã = j (j-1) M_{j-2}(ωt_f) / t_f` and
/// `dã/dω = i j (j-1) M_{j-1}(ωt_f)`; rows are scaled to be O(1).
pub(crate) fn null_rows(n_coef: usize, duration: f64, nulls: &[FrequencyNull]) -> Vec<(Vec<f64>, f64)> {
    let mut rows = Vec::new();
    for null in nulls {
        let m = phase_moments(null.omega * duration, n_coef);
        let value: Vec<_> = (0..n_coef)
            .map(|j| {
                if j >= 2 {
                    (j * (j - 1)) as f64 * m[j - 2]
                } else {
                    0.0.into()
                }
            })
            .collect();
        rows.push((value.iter().map(|c| c.re).collect(), 0.0));
        rows.push((value.iter().map(|c| c.im).collect(), 0.0));
        if null.flat {
            // i·z has real part -Im z and imaginary part Re z
            let slope: Vec<_> = (0..n_coef)
                .map(|j| {
                    if j >= 2 {
                        (j * (j - 1)) as f64 * m[j - 1]
                    } else {
                        0.0.into()
                    }
                })
                .collect();
            rows.push((slope.iter().map(|c| -c.im).collect(), 0.0));
            rows.push((slope.iter().map(|c| c.re).collect(), 0.0));
        }
    }
    rows
}
