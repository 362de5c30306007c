//! Welch averaged-periodogram PSD for complex baseband streams.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Hann,
    Hamming,
    Rectangular,
}

impl Window {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| {
                let x = 2.0 * PI * k as f64 / n as f64;
                match self {
                    Window::Hann => 0.5 - 0.5 * x.cos(),
                    Window::Hamming => 0.54 - 0.46 * x.cos(),
                    Window::Rectangular => 1.0,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WelchParams {
    pub segment_length: usize,
    /// Fraction of each segment shared with the next, in `[0, 1)`.
    pub overlap: f64,
    pub window: Window,
}

impl Default for WelchParams {
    fn default() -> Self {
        Self { segment_length: 4096, overlap: 0.5, window: Window::Hann }
    }
}

impl WelchParams {
    pub fn validate(&self) -> Result<()> {
        if !self.segment_length.is_power_of_two() || self.segment_length < 2 {
            return Err(Error::InvalidConfig(format!(
                "segment length {} is not a power of two",
                self.segment_length
            )));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::InvalidConfig(format!("overlap {} is outside [0, 1)", self.overlap)));
        }
        Ok(())
    }
}

/// Two-sided PSD with frequencies ascending from `-fs/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    pub freqs: Vec<f64>,
    /// Power per Hz.
    pub density: Vec<f64>,
    pub bin_width: f64,
    pub segments: usize,
}

impl Psd {
    /// Integral of the density over bins whose centres lie in `[lo, hi]`.
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        self.freqs
            .iter()
            .zip(&self.density)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(_, d)| d * self.bin_width)
            .sum()
    }

    pub fn total_power(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width
    }

    pub fn band_values(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.freqs
            .iter()
            .zip(&self.density)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(_, d)| *d)
            .collect()
    }

    /// Multiplies the density by `g(f)`.
    pub fn shaped<F: Fn(f64) -> f64>(&self, g: F) -> Psd {
        Psd {
            density: self.freqs.iter().zip(&self.density).map(|(f, d)| d * g(*f)).collect(),
            ..self.clone()
        }
    }
}

pub fn welch_psd(x: &[Complex64], fs: f64, params: &WelchParams) -> Result<Psd> {
    params.validate()?;
    let n = params.segment_length;
    if x.len() < n {
        return Err(Error::InvalidConfig(format!(
            "stream of {} samples is shorter than one {n}-point segment",
            x.len()
        )));
    }
    let hop = ((n as f64 * (1.0 - params.overlap)).round() as usize).max(1);
    let starts: Vec<usize> = (0..=(x.len() - n) / hop).map(|i| i * hop).collect();
    let w = params.window.coefficients(n);
    let w_energy: f64 = w.iter().map(|v| v * v).sum();
    let fft = FftPlanner::new().plan_fft_forward(n);
    let periodograms: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|&s| {
            let mut buf: Vec<Complex64> = x[s..s + n].iter().zip(&w).map(|(v, wk)| v * wk).collect();
            fft.process(&mut buf);
            buf.iter().map(|c| c.norm_sqr()).collect()
        })
        .collect();
    let mut acc = vec![0.0; n];
    for p in &periodograms {
        for (a, v) in acc.iter_mut().zip(p) {
            *a += v;
        }
    }
    let scale = 1.0 / (fs * w_energy * starts.len() as f64);
    let bin_width = fs / n as f64;
    // Reorder bins so frequency runs from -fs/2 upward.
    let half = n / 2;
    let order = (half..n).chain(0..half);
    let mut freqs = Vec::with_capacity(n);
    let mut density = Vec::with_capacity(n);
    for k in order {
        let f = if k >= half { k as f64 - n as f64 } else { k as f64 };
        freqs.push(f * bin_width);
        density.push(acc[k] * scale);
    }
    Ok(Psd { freqs, density, bin_width, segments: starts.len() })
}
