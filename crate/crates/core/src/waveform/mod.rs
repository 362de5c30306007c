//! Oversampled OFDM transmitter with a quantizing DAC.
//!
//! Symbols are drawn i.i.d. `CN(0, 1)` on the active subcarriers, each OFDM
//! symbol is an inverse FFT (no cyclic prefix), the baseband stream is
//! interpolated to the DAC rate through a Kaiser low-pass, normalized to unit
//! power and quantized. The Welch PSD of the DAC output gives the in-band and
//! adjacent-band powers, and the measured ACLR is set against the additive
//! Gaussian prediction `(|α|² + δτ) / (δτ)` with `δ = B / f_s`.

pub mod filter;
pub mod welch;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::{tx_moments, AgnMoments, MomentMethod};
use crate::quantizer::QuantizerSpec;
use crate::rng::{complex_normal, substream};

pub use welch::{welch_psd, Psd, WelchParams, Window};

/// Digital interpolation from the OFDM rate to the DAC rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpolationParams {
    pub factor: usize,
    pub filter_taps: usize,
    /// Pass-band edge in Hz; defaults to `B/2 + guard/2`.
    pub cutoff: Option<f64>,
    pub stopband_db: f64,
}

impl Default for InterpolationParams {
    fn default() -> Self {
        Self { factor: 4, filter_taps: 255, cutoff: None, stopband_db: 80.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformConfig {
    pub occupied_bandwidth: f64,
    pub sample_rate: f64,
    pub guard_band: f64,
    /// IFFT size at the pre-interpolation rate.
    pub fft_size: usize,
    /// Active subcarriers, centred on DC; defaults to `⌊B / Δf⌋`.
    pub num_subcarriers: Option<usize>,
    pub num_symbols: usize,
    pub interpolation: InterpolationParams,
    pub dac: QuantizerSpec,
    pub zoh: bool,
    pub psd: WelchParams,
    pub seed: u64,
}

impl Default for WaveformConfig {
    fn default() -> Self {
        Self {
            occupied_bandwidth: 200e6,
            sample_rate: 983.04e6,
            guard_band: 10e6,
            fft_size: 2048,
            num_subcarriers: None,
            num_symbols: 128,
            interpolation: InterpolationParams::default(),
            dac: QuantizerSpec::uniform_loaded(4, 3.0, 1.0),
            zoh: true,
            psd: WelchParams::default(),
            seed: 0,
        }
    }
}

impl WaveformConfig {
    pub fn baseband_rate(&self) -> f64 {
        self.sample_rate / self.interpolation.factor as f64
    }

    pub fn subcarrier_spacing(&self) -> f64 {
        self.baseband_rate() / self.fft_size as f64
    }

    pub fn active_subcarriers(&self) -> usize {
        self.num_subcarriers
            .unwrap_or_else(|| (self.occupied_bandwidth / self.subcarrier_spacing()).floor() as usize)
    }

    /// Subcarrier indices (relative to DC) of the default allocation.
    pub fn subcarrier_indices(&self) -> Vec<i64> {
        let k = self.active_subcarriers() as i64;
        (-(k / 2)..k - k / 2).collect()
    }

    pub fn cutoff_hz(&self) -> f64 {
        self.interpolation
            .cutoff
            .unwrap_or(0.5 * self.occupied_bandwidth + 0.5 * self.guard_band)
    }

    /// Fraction of the DAC bandwidth occupied by the signal.
    pub fn delta(&self) -> f64 {
        self.occupied_bandwidth / self.sample_rate
    }

    /// `[lo, hi]` of the upper adjacent channel; the lower one is its mirror.
    pub fn adjacent_band(&self) -> (f64, f64) {
        let b = self.occupied_bandwidth;
        (0.5 * b + self.guard_band, 1.5 * b + self.guard_band)
    }

    pub fn validate(&self) -> Result<()> {
        let b = self.occupied_bandwidth;
        if !(b > 0.0 && self.sample_rate > 0.0 && self.guard_band >= 0.0) {
            return Err(Error::InvalidConfig("bandwidths and rates must be positive".into()));
        }
        if b + 2.0 * self.guard_band > self.sample_rate {
            return Err(Error::InvalidConfig(
                "occupied bandwidth plus guard bands exceeds the sample rate".into(),
            ));
        }
        if self.adjacent_band().1 > 0.5 * self.sample_rate {
            return Err(Error::InvalidConfig("the adjacent channel does not fit below fs/2".into()));
        }
        if self.interpolation.factor == 0 || self.fft_size == 0 || self.num_symbols == 0 {
            return Err(Error::InvalidConfig("factor, FFT size and symbol count must be positive".into()));
        }
        if self.active_subcarriers() > self.fft_size {
            return Err(Error::InvalidConfig("more active subcarriers than FFT bins".into()));
        }
        self.psd.validate()?;
        self.dac.validate()?;
        Ok(())
    }

    /// Interpolation filter taps at the DAC rate.
    pub fn filter(&self) -> Result<Vec<f64>> {
        let fc = self.cutoff_hz();
        if fc >= 0.5 * self.baseband_rate() {
            return Err(Error::Filter(format!(
                "cutoff {fc} Hz is not below half the pre-interpolation rate {}",
                0.5 * self.baseband_rate()
            )));
        }
        filter::lowpass_kaiser(
            self.interpolation.filter_taps,
            fc / self.sample_rate,
            self.interpolation.stopband_db,
            self.interpolation.factor as f64,
        )
    }
}

/// Default-allocation baseband stream at the DAC rate, normalized to unit power.
pub fn synthesize_baseband(cfg: &WaveformConfig, num_symbols: usize, seed: u64) -> Result<Vec<Complex64>> {
    synthesize_subcarriers(cfg, &cfg.subcarrier_indices(), num_symbols, seed)
}

/// As [`synthesize_baseband`] with an explicit set of active subcarriers.
/// An empty set yields an all-zero stream.
pub fn synthesize_subcarriers(
    cfg: &WaveformConfig,
    subcarriers: &[i64],
    num_symbols: usize,
    seed: u64,
) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    let n = cfg.fft_size;
    let half = (n / 2) as i64;
    if subcarriers.iter().any(|&k| k < -half || k >= half) {
        return Err(Error::InvalidConfig("subcarrier index outside the FFT grid".into()));
    }
    let h = cfg.filter()?;
    let ifft = FftPlanner::new().plan_fft_inverse(n);
    let mut rng = substream(seed, "waveform", 0);
    let mut base = Vec::with_capacity(n * num_symbols);
    for _ in 0..num_symbols {
        let mut sym = vec![Complex64::new(0.0, 0.0); n];
        for &k in subcarriers {
            sym[k.rem_euclid(n as i64) as usize] = complex_normal(&mut rng, 1.0);
        }
        ifft.process(&mut sym);
        base.extend(sym);
    }
    let mut out = filter::interpolate_circular(&base, cfg.interpolation.factor, &h);
    let p = mean_power(&out);
    if p > 0.0 {
        let s = 1.0 / p.sqrt();
        out.iter_mut().for_each(|c| *c *= s);
    }
    Ok(out)
}

pub fn mean_power(x: &[Complex64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|c| c.norm_sqr()).sum::<f64>() / x.len() as f64
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AclrReport {
    pub inband_power: f64,
    /// Mean of the lower and upper adjacent-channel powers.
    pub adjacent_power: f64,
    pub adjacent_power_lower: f64,
    pub adjacent_power_upper: f64,
    pub aclr_db: f64,
    /// `None` when the DAC adds no distortion.
    pub agn_predicted_aclr_db: Option<f64>,
    pub pre_dac_aclr_db: f64,
    pub delta: f64,
    pub dac_moments: AgnMoments,
    /// Spread (max − min, dB) of the un-shaped PSD over the adjacent channels.
    pub adjacent_flatness_db: f64,
    /// Fraction of I/Q components beyond the outermost DAC level.
    pub saturation_fraction: f64,
    pub saturation_warning: bool,
    pub time_domain_power: f64,
    /// Integral of the un-shaped output PSD.
    pub psd_total_power: f64,
    /// `(frequency in Hz, PSD in dB relative to in-band power per Hz)`.
    pub psd_curve: Vec<(f64, f64)>,
}

struct BandPowers {
    inband: f64,
    lower: f64,
    upper: f64,
}

fn band_powers(cfg: &WaveformConfig, psd: &Psd) -> BandPowers {
    let b2 = 0.5 * cfg.occupied_bandwidth;
    let (lo, hi) = cfg.adjacent_band();
    BandPowers { inband: psd.band_power(-b2, b2), lower: psd.band_power(-hi, -lo), upper: psd.band_power(lo, hi) }
}

fn aclr_of(p: &BandPowers) -> f64 {
    10.0 * (p.inband / (0.5 * (p.lower + p.upper))).log10()
}

fn flatness_db(values: &[f64]) -> f64 {
    let (mn, mx) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if mn <= 0.0 {
        return f64::INFINITY;
    }
    10.0 * (mx / mn).log10()
}

/// Quantizes the stream, estimates its PSD and measures the ACLR.
pub fn apply_dac_and_measure(cfg: &WaveformConfig, stream: &[Complex64]) -> Result<AclrReport> {
    cfg.validate()?;
    if stream.is_empty() {
        return Err(Error::Contract("empty sample stream".into()));
    }
    let q = cfg.dac.compile()?;
    let y = q.apply_slice(stream);
    let saturation_fraction = match q.clip_level() {
        Some(c) => {
            stream.iter().map(|u| (u.re.abs() > c) as u8 as f64 + (u.im.abs() > c) as u8 as f64).sum::<f64>()
                / (2.0 * stream.len() as f64)
        }
        None => 0.0,
    };
    let fs = cfg.sample_rate;
    let zoh = |f: f64| sinc(f / fs).powi(2);
    let raw = welch_psd(&y, fs, &cfg.psd)?;
    let measured = if cfg.zoh { raw.shaped(zoh) } else { raw.clone() };
    let pre_raw = welch_psd(stream, fs, &cfg.psd)?;
    let pre = if cfg.zoh { pre_raw.shaped(zoh) } else { pre_raw };

    let bp = band_powers(cfg, &measured);
    let (lo, hi) = cfg.adjacent_band();
    let adjacent_flatness_db = flatness_db(&raw.band_values(lo, hi)).max(flatness_db(&raw.band_values(-hi, -lo)));

    let pbar = mean_power(stream);
    if pbar <= 0.0 {
        return Err(Error::Contract("stream has zero power".into()));
    }
    let delta = cfg.delta();
    let dac_moments = tx_moments(&cfg.dac, pbar, MomentMethod::default())?;
    let agn_predicted_aclr_db = (dac_moments.tau > 0.0).then(|| {
        let n = delta * dac_moments.tau;
        10.0 * ((dac_moments.alpha_sq() + n) / n).log10()
    });
    let psd_curve = measured
        .freqs
        .iter()
        .zip(&measured.density)
        .map(|(&f, &d)| (f, 10.0 * (d / bp.inband).log10()))
        .collect();
    Ok(AclrReport {
        aclr_db: aclr_of(&bp),
        inband_power: bp.inband,
        adjacent_power: 0.5 * (bp.lower + bp.upper),
        adjacent_power_lower: bp.lower,
        adjacent_power_upper: bp.upper,
        agn_predicted_aclr_db,
        pre_dac_aclr_db: aclr_of(&band_powers(cfg, &pre)),
        delta,
        dac_moments,
        adjacent_flatness_db,
        saturation_fraction,
        saturation_warning: saturation_fraction > 0.5,
        time_domain_power: mean_power(&y),
        psd_total_power: raw.total_power(),
        psd_curve,
    })
}

/// Synthesizes the configured stream and measures it.
pub fn run_waveform(cfg: &WaveformConfig) -> Result<AclrReport> {
    let stream = synthesize_baseband(cfg, cfg.num_symbols, cfg.seed)?;
    apply_dac_and_measure(cfg, &stream)
}
