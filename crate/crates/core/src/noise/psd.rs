use std::f64::consts::{PI, TAU};
use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of averaged segments.
pub const MIN_SEGMENTS: usize = 8;
/// Default cap on the segment length.
pub const DEFAULT_MAX_SEGMENT: usize = 4096;

/// Power spectral density `S(ω) = ∫ α(τ) e^{-iωτ} dτ` on `ω ≥ 0`.
///
/// Only non-negative angular frequencies are listed, but the level is the
/// two-sided density: white noise of intensity `D` reads `D` everywhere and
/// OU noise reads `2cτ_c / (1 + ω²τ_c²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSpectrum {
    pub omega: Vec<f64>,
    pub power: Vec<f64>,
    pub segments: usize,
}

impl PowerSpectrum {
    /// Linear interpolation in `ω`; `None` outside the covered band.
    pub fn at(&self, omega: f64) -> Option<f64> {
        let last = *self.omega.last()?;
        if omega < 0.0 || omega > last {
            return None;
        }
        let step = self.omega.get(1).copied().unwrap_or(last);
        let pos = omega / step;
        let i = (pos.floor() as usize).min(self.omega.len() - 1);
        if i + 1 >= self.omega.len() {
            return Some(self.power[i]);
        }
        let f = pos - i as f64;
        Some(self.power[i] * (1.0 - f) + self.power[i + 1] * f)
    }

    /// Mean level over `[lo, hi]`.
    pub fn band_mean(&self, lo: f64, hi: f64) -> Option<f64> {
        let vals: Vec<f64> = self
            .omega
            .iter()
            .zip(&self.power)
            .filter(|(w, _)| **w >= lo && **w <= hi)
            .map(|(_, p)| *p)
            .collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }

    /// CSV with header `omega,power`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["omega", "power"])?;
        for (o, p) in self.omega.iter().zip(&self.power) {
            w.write_record(&[o.to_string(), p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Welch estimate with a Hann window and 50% overlap.
///
/// The segment length defaults to the largest power of two not above
/// `min(n/8, 4096)`; the mean is not removed, so the zero-frequency bin
/// keeps its meaning for zero-mean noise.
pub fn psd_estimate(samples: &[f64], dt: f64, segment_len: Option<usize>) -> Result<PowerSpectrum> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("sample spacing must be positive"));
    }
    let n = samples.len();
    let len = match segment_len {
        Some(l) => l,
        None => {
            let cap = (n / MIN_SEGMENTS).min(DEFAULT_MAX_SEGMENT);
            if cap < 2 {
                0
            } else {
                1usize << cap.ilog2()
            }
        }
    };
    if len < 4 || len % 2 != 0 {
        return Err(Error::invalid(format!(
            "segment length must be even and >= 4, got {len}"
        )));
    }
    let hop = len / 2;
    let segments = if n >= len { (n - len) / hop + 1 } else { 0 };
    if segments < MIN_SEGMENTS {
        return Err(Error::invalid(format!(
            "{n} samples give {segments} segments of length {len}; need at least {MIN_SEGMENTS}"
        )));
    }

    let window: Vec<f64> = (0..len)
        .map(|j| 0.5 - 0.5 * (TAU * j as f64 / len as f64).cos())
        .collect();
    let norm = dt / window.iter().map(|w| w * w).sum::<f64>();
    let fft = FftPlanner::new().plan_fft_forward(len);
    let bins = len / 2 + 1;
    let mut acc = vec![0.0f64; bins];
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for s in 0..segments {
        let seg = &samples[s * hop..s * hop + len];
        for ((b, x), w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex64::new(x * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }
    let scale = norm / segments as f64;
    let d_omega = 2.0 * PI / (len as f64 * dt);
    Ok(PowerSpectrum {
        omega: (0..bins).map(|k| k as f64 * d_omega).collect(),
        power: acc.into_iter().map(|a| a * scale).collect(),
        segments,
    })
}
