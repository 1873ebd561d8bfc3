use super::poly::PolyPath;
use super::sampled::SampledPath;

/// Which one-sided limit to take at a discontinuity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub position: f64,
    pub velocity: f64,
    pub acceleration: f64,
}

/// A trap trajectory that can be queried at any time in `[0, duration]`.
///
/// Before `t = 0` the trap rests at `kinematics(0, Left).position`; after the
/// protocol it rests at `kinematics(duration, Right).position`. Paths may be
/// piecewise smooth; `breakpoints` lists the interior times where one-sided
/// limits differ.
pub trait TrapMotion: Sync {
    fn duration(&self) -> f64;

    fn kinematics(&self, t: f64, side: Side) -> Kinematics;

    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Trap position before the protocol starts.
    fn initial_position(&self) -> f64 {
        self.kinematics(0.0, Side::Left).position
    }

    /// Trap position after the protocol ends.
    fn final_position(&self) -> f64 {
        self.kinematics(self.duration(), Side::Right).position
    }

    /// Smallest and largest trap position over `n` samples plus the rest positions.
    fn position_range(&self, n: usize) -> (f64, f64) {
        let n = n.max(2);
        let t_f = self.duration();
        let mut lo = self.initial_position().min(self.final_position());
        let mut hi = self.initial_position().max(self.final_position());
        for i in 0..n {
            let t = t_f * i as f64 / (n - 1) as f64;
            for side in [Side::Left, Side::Right] {
                let x = self.kinematics(t, side).position;
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        (lo, hi)
    }
}

/// Either kind of trap path, for APIs that accept both.
#[derive(Debug, Clone, PartialEq)]
pub enum TrapPath {
    Poly(PolyPath),
    Sampled(SampledPath),
}

impl TrapMotion for TrapPath {
    fn duration(&self) -> f64 {
        match self {
            TrapPath::Poly(p) => p.duration(),
            TrapPath::Sampled(p) => TrapMotion::duration(p),
        }
    }

    fn kinematics(&self, t: f64, side: Side) -> Kinematics {
        match self {
            TrapPath::Poly(p) => p.kinematics(t, side),
            TrapPath::Sampled(p) => p.kinematics(t, side),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            TrapPath::Poly(p) => p.breakpoints(),
            TrapPath::Sampled(p) => p.breakpoints(),
        }
    }
}

impl From<PolyPath> for TrapPath {
    fn from(p: PolyPath) -> Self {
        TrapPath::Poly(p)
    }
}

impl From<SampledPath> for TrapPath {
    fn from(p: SampledPath) -> Self {
        TrapPath::Sampled(p)
    }
}
