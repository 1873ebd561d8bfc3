use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::motion::{Kinematics, Side, TrapMotion};
use crate::error::{Error, Result};

/// Discontinuity annotation at a sample: right limit minus left limit.
///
/// Stored samples always hold the right limit; the left limit is recovered by
/// subtracting the jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Jump {
    pub index: usize,
    #[serde(default)]
    pub position: f64,
    #[serde(default)]
    pub velocity: f64,
    #[serde(default)]
    pub acceleration: f64,
}

/// Path sampled on a uniform grid over `[0, duration]`.
///
/// Between samples the path is reconstructed by quintic Hermite interpolation
/// from position, velocity and acceleration, so piecewise polynomials of
/// degree five or less are represented exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    duration: f64,
    times: Vec<f64>,
    positions: Vec<f64>,
    velocities: Vec<f64>,
    accelerations: Vec<f64>,
    jumps: Vec<Jump>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    t: f64,
    x: f64,
    v: f64,
    a: f64,
}

impl SampledPath {
    pub fn new(duration: f64, positions: Vec<f64>, velocities: Vec<f64>, accelerations: Vec<f64>) -> Result<Self> {
        let n = positions.len();
        if n < 2 {
            return Err(Error::invalid("a sampled path needs at least two samples"));
        }
        if velocities.len() != n || accelerations.len() != n {
            return Err(Error::invalid("sample arrays must share the same length"));
        }
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::invalid("sampled path duration must be positive and finite"));
        }
        let all_finite = positions
            .iter()
            .chain(&velocities)
            .chain(&accelerations)
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::invalid("sample values must be finite"));
        }
        let dt = duration / (n - 1) as f64;
        let times = (0..n).map(|i| i as f64 * dt).collect();
        Ok(SampledPath {
            duration,
            times,
            positions,
            velocities,
            accelerations,
            jumps: Vec::new(),
        })
    }

    /// Attach discontinuity annotations. Indices must be in range and unique.
    pub fn with_jumps(mut self, mut jumps: Vec<Jump>) -> Result<Self> {
        jumps.sort_by_key(|j| j.index);
        for w in jumps.windows(2) {
            if w[0].index == w[1].index {
                return Err(Error::invalid(format!("duplicate jump at sample {}", w[0].index)));
            }
        }
        if let Some(j) = jumps.iter().find(|j| j.index >= self.len()) {
            return Err(Error::invalid(format!("jump index {} out of range", j.index)));
        }
        if jumps
            .iter()
            .any(|j| !(j.position.is_finite() && j.velocity.is_finite() && j.acceleration.is_finite()))
        {
            return Err(Error::invalid("jump sizes must be finite"));
        }
        self.jumps = jumps;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn dt(&self) -> f64 {
        self.duration / (self.len() - 1) as f64
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn accelerations(&self) -> &[f64] {
        &self.accelerations
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    fn jump_at(&self, index: usize) -> Option<&Jump> {
        self.jumps
            .binary_search_by_key(&index, |j| j.index)
            .ok()
            .map(|k| &self.jumps[k])
    }

    pub fn right_limit(&self, index: usize) -> Kinematics {
        Kinematics {
            position: self.positions[index],
            velocity: self.velocities[index],
            acceleration: self.accelerations[index],
        }
    }

    pub fn left_limit(&self, index: usize) -> Kinematics {
        let mut k = self.right_limit(index);
        if let Some(j) = self.jump_at(index) {
            k.position -= j.position;
            k.velocity -= j.velocity;
            k.acceleration -= j.acceleration;
        }
        k
    }

    fn hermite(&self, i: usize, tau: f64) -> Kinematics {
        let h = self.dt();
        let a = self.right_limit(i);
        let b = self.left_limit(i + 1);
        let (v0, a0) = (a.velocity * h, a.acceleration * h * h);
        let (v1, a1) = (b.velocity * h, b.acceleration * h * h);
        let r0 = b.position - a.position - v0 - 0.5 * a0;
        let r1 = v1 - v0 - a0;
        let r2 = a1 - a0;
        let c = [
            a.position,
            v0,
            0.5 * a0,
            10.0 * r0 - 4.0 * r1 + 0.5 * r2,
            -15.0 * r0 + 7.0 * r1 - r2,
            6.0 * r0 - 3.0 * r1 + 0.5 * r2,
        ];
        let x = c[0] + tau * (c[1] + tau * (c[2] + tau * (c[3] + tau * (c[4] + tau * c[5]))));
        let dx = c[1] + tau * (2.0 * c[2] + tau * (3.0 * c[3] + tau * (4.0 * c[4] + tau * 5.0 * c[5])));
        let ddx = 2.0 * c[2] + tau * (6.0 * c[3] + tau * (12.0 * c[4] + tau * 20.0 * c[5]));
        Kinematics {
            position: x,
            velocity: dx / h,
            acceleration: ddx / (h * h),
        }
    }

    /// Write the `t,x,v,a` CSV representation (right limits at jumps).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for i in 0..self.len() {
            w.serialize(CsvRow {
                t: self.times[i],
                x: self.positions[i],
                v: self.velocities[i],
                a: self.accelerations[i],
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let rows: Vec<CsvRow> = r.deserialize().collect::<std::result::Result<_, _>>()?;
        if rows.len() < 2 {
            return Err(Error::invalid("CSV path needs at least two rows"));
        }
        let duration = rows[rows.len() - 1].t - rows[0].t;
        if rows[0].t != 0.0 {
            return Err(Error::invalid("CSV path must start at t = 0"));
        }
        let dt = duration / (rows.len() - 1) as f64;
        for (i, row) in rows.iter().enumerate() {
            if (row.t - i as f64 * dt).abs() > 1e-9 * dt.max(f64::MIN_POSITIVE) || (i > 0 && row.t <= rows[i - 1].t) {
                return Err(Error::invalid(format!("CSV time grid is not uniform at row {i}")));
            }
        }
        SampledPath::new(
            duration,
            rows.iter().map(|r| r.x).collect(),
            rows.iter().map(|r| r.v).collect(),
            rows.iter().map(|r| r.a).collect(),
        )
    }
}

impl TrapMotion for SampledPath {
    fn duration(&self) -> f64 {
        self.duration
    }

    fn kinematics(&self, t: f64, side: Side) -> Kinematics {
        let last = self.len() - 1;
        if t < 0.0 || (t == 0.0 && side == Side::Left) {
            return self.left_limit(0);
        }
        if t > self.duration || (t == self.duration && side == Side::Right) {
            return self.right_limit(last);
        }
        let u = t / self.dt();
        let node = u.round();
        if (u - node).abs() < 1e-9 {
            let i = node as usize;
            return match side {
                Side::Left if i > 0 => self.left_limit(i),
                Side::Left => self.left_limit(0),
                Side::Right if i < last => self.right_limit(i),
                Side::Right => self.right_limit(last),
            };
        }
        let i = (u.floor() as usize).min(last - 1);
        self.hermite(i, u - i as f64)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.jumps
            .iter()
            .filter(|j| j.index > 0 && j.index < self.len() - 1)
            .map(|j| self.times[j.index])
            .collect()
    }
}
