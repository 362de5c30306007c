//! Kaiser-windowed sinc low-pass design and polyphase interpolation.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(x: f64) -> f64 {
    let y = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..500 {
        term *= y / (k as f64 * k as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Kaiser `β` for a target stopband attenuation in dB.
pub fn kaiser_beta(atten_db: f64) -> f64 {
    if atten_db > 50.0 {
        0.1102 * (atten_db - 8.7)
    } else if atten_db >= 21.0 {
        0.5842 * (atten_db - 21.0).powf(0.4) + 0.07886 * (atten_db - 21.0)
    } else {
        0.0
    }
}

pub fn kaiser_window(len: usize, beta: f64) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let m = (len - 1) as f64;
    let denom = bessel_i0(beta);
    (0..len)
        .map(|n| {
            let r = 2.0 * n as f64 / m - 1.0;
            bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / denom
        })
        .collect()
}

/// Low-pass FIR with cutoff `cutoff` in cycles per sample and DC gain `gain`.
pub fn lowpass_kaiser(taps: usize, cutoff: f64, atten_db: f64, gain: f64) -> Result<Vec<f64>> {
    if taps == 0 {
        return Err(Error::Filter("filter needs at least one tap".into()));
    }
    if !(cutoff > 0.0 && cutoff < 0.5) {
        return Err(Error::Filter(format!("cutoff {cutoff} cycles/sample is outside (0, 0.5)")));
    }
    let w = kaiser_window(taps, kaiser_beta(atten_db));
    let centre = (taps - 1) as f64 / 2.0;
    let mut h: Vec<f64> = w
        .iter()
        .enumerate()
        .map(|(n, wn)| {
            let x = n as f64 - centre;
            let s = if x == 0.0 { 2.0 * cutoff } else { (2.0 * PI * cutoff * x).sin() / (PI * x) };
            s * wn
        })
        .collect();
    let dc: f64 = h.iter().sum();
    if dc.abs() < 1e-300 {
        return Err(Error::Filter("filter has zero DC gain".into()));
    }
    h.iter_mut().for_each(|v| *v *= gain / dc);
    Ok(h)
}

/// `H(f) = Σ h[n] e^{-j2πfn}` at `f` cycles per sample.
pub fn frequency_response(h: &[f64], f: f64) -> Complex64 {
    h.iter()
        .enumerate()
        .map(|(n, &v)| Complex64::from_polar(v, -2.0 * PI * f * n as f64))
        .sum()
}

/// Worst stopband gain relative to the DC gain, in dB, over `[f_stop, 0.5]`.
pub fn stopband_attenuation_db(h: &[f64], f_stop: f64, grid: usize) -> f64 {
    let dc = frequency_response(h, 0.0).norm();
    let worst = (0..=grid)
        .map(|i| f_stop + (0.5 - f_stop) * i as f64 / grid as f64)
        .map(|f| frequency_response(h, f).norm())
        .fold(0.0, f64::max);
    20.0 * (dc / worst).log10()
}

/// Upsamples by `factor` (zero stuffing) and filters with `h`, treating the
/// input as periodic so the output has no start-up transient. The output is
/// advanced by the filter's group delay.
pub fn interpolate_circular(x: &[Complex64], factor: usize, h: &[f64]) -> Vec<Complex64> {
    let n_in = x.len();
    let n_out = n_in * factor;
    if n_in == 0 {
        return Vec::new();
    }
    let delay = (h.len() - 1) / 2;
    // Polyphase branch p holds taps h[p], h[p + L], ...
    let branches: Vec<Vec<f64>> = (0..factor).map(|p| h.iter().skip(p).step_by(factor).copied().collect()).collect();
    (0..n_out)
        .map(|m| {
            let n = m + delay;
            let p = n % factor;
            let base = n / factor;
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &c) in branches[p].iter().enumerate() {
                let idx = (base + n_in - j % n_in) % n_in;
                acc += x[idx] * c;
            }
            acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bessel_values() {
        assert_eq!(bessel_i0(0.0), 1.0);
        assert_abs_diff_eq!(bessel_i0(1.0), 1.2660658777520084, epsilon = 1e-14);
        assert_abs_diff_eq!(bessel_i0(5.0), 27.239871823604442, epsilon = 1e-11);
    }

    #[test]
    fn lowpass_properties() {
        let h = lowpass_kaiser(255, 0.1, 80.0, 4.0).unwrap();
        assert_abs_diff_eq!(h.iter().sum::<f64>(), 4.0, epsilon = 1e-12);
        for i in 0..h.len() {
            assert_abs_diff_eq!(h[i], h[h.len() - 1 - i], epsilon = 1e-15);
        }
        assert!(stopband_attenuation_db(&h, 0.12, 2000) > 70.0);
        assert!(lowpass_kaiser(0, 0.1, 80.0, 1.0).is_err());
        assert!(lowpass_kaiser(11, 0.6, 80.0, 1.0).is_err());
    }

    #[test]
    fn interpolation_preserves_a_tone() {
        let n = 64;
        let f = 3.0 / n as f64;
        let x: Vec<Complex64> = (0..n).map(|k| Complex64::from_polar(1.0, 2.0 * PI * f * k as f64)).collect();
        let h = lowpass_kaiser(63, 0.125, 80.0, 4.0).unwrap();
        let y = interpolate_circular(&x, 4, &h);
        assert_eq!(y.len(), 256);
        for (m, v) in y.iter().enumerate() {
            let expect = Complex64::from_polar(1.0, 2.0 * PI * f / 4.0 * m as f64);
            assert_abs_diff_eq!((v - expect).norm(), 0.0, epsilon = 1e-3);
        }
    }
}
