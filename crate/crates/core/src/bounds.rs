//! Capacity upper bound for transmitters restricted to a finite DAC
//! constellation.
//!
//! With `S = |X|²` for `X` uniform on the constellation `A`,
//!
//! ```text
//! λ(θ)   = ln E[exp(θ S)]               cumulant generating function
//! I(s)   = sup_θ θ s − λ(θ)             its Legendre transform
//! H(s)   = log2 |A| − I(s) / ln 2       max entropy at mean energy s
//! R̄      = H(s_tot) − D(δ‖ν)            rate upper bound
//! ```

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::analysis::{kl_divergence, validate_deltas};
use crate::error::{Error, Result};
use crate::moments::AgnMoments;
use crate::quantizer::Constellation;

const THETA_TOL: f64 = 1e-12;
const MAX_BRACKET_DOUBLINGS: usize = 1100;

/// Distinct energies of a constellation with their multiplicities, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyClasses {
    energies: Vec<f64>,
    counts: Vec<usize>,
    total: usize,
}

impl EnergyClasses {
    pub fn new(cset: &Constellation) -> Self {
        let mut e = cset.energies();
        e.sort_by(f64::total_cmp);
        let scale = e.last().copied().unwrap_or(0.0).max(1e-300);
        let mut energies: Vec<f64> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for x in e {
            match energies.last() {
                Some(&last) if (x - last).abs() <= 1e-12 * scale => *counts.last_mut().unwrap() += 1,
                _ => {
                    energies.push(x);
                    counts.push(1);
                }
            }
        }
        let total = counts.iter().sum();
        Self { energies, counts, total }
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn size(&self) -> usize {
        self.total
    }

    pub fn e_min(&self) -> f64 {
        self.energies[0]
    }

    pub fn e_max(&self) -> f64 {
        self.energies[self.energies.len() - 1]
    }

    pub fn e_mean(&self) -> f64 {
        self.energies.iter().zip(&self.counts).map(|(e, &c)| e * c as f64).sum::<f64>() / self.total as f64
    }

    fn shift(&self, theta: f64) -> f64 {
        if theta > 0.0 {
            theta * self.e_max()
        } else {
            theta * self.e_min()
        }
    }

    /// Class probabilities of the tilted law `P(x) ∝ exp(θ|x|²)`.
    pub fn tilted_class_probs(&self, theta: f64) -> Vec<f64> {
        let shift = self.shift(theta);
        let w: Vec<f64> = self
            .energies
            .iter()
            .zip(&self.counts)
            .map(|(e, &c)| c as f64 * (theta * e - shift).exp())
            .collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|x| x / z).collect()
    }

    /// `λ(θ)` in nats.
    pub fn cumulant(&self, theta: f64) -> f64 {
        let shift = self.shift(theta);
        let z: f64 = self
            .energies
            .iter()
            .zip(&self.counts)
            .map(|(e, &c)| c as f64 * (theta * e - shift).exp())
            .sum();
        shift + (z / self.total as f64).ln()
    }

    /// `λ'(θ)`: mean energy under the tilted law.
    pub fn cumulant_derivative(&self, theta: f64) -> f64 {
        self.tilted_class_probs(theta).iter().zip(&self.energies).map(|(p, e)| p * e).sum()
    }

    /// `λ''(θ)`: energy variance under the tilted law.
    pub fn cumulant_second_derivative(&self, theta: f64) -> f64 {
        let p = self.tilted_class_probs(theta);
        let m: f64 = p.iter().zip(&self.energies).map(|(p, e)| p * e).sum();
        p.iter().zip(&self.energies).map(|(p, e)| p * (e - m) * (e - m)).sum()
    }

    /// Shannon entropy (bits) of the tilted law over the individual points.
    pub fn tilted_entropy_bits(&self, theta: f64) -> f64 {
        self.tilted_class_probs(theta)
            .iter()
            .zip(&self.counts)
            .filter(|(p, _)| **p > 0.0)
            .map(|(&p, &c)| {
                let per_point = p / c as f64;
                -p * per_point.log2()
            })
            .sum()
    }

    fn boundary_tol(&self) -> f64 {
        1e-12 * self.e_max().abs().max(1.0)
    }
}

/// `λ(θ) = ln((1/|A|) Σ exp(θ|x|²))`.
pub fn cumulant(cset: &Constellation, theta: f64) -> f64 {
    EnergyClasses::new(cset).cumulant(theta)
}

/// A point of the Legendre transform: `I(s)` in nats and the maximizing tilt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegendrePoint {
    pub rate: f64,
    pub theta: f64,
}

/// `I(s) = sup_θ θs − λ(θ)` and its maximizer.
pub fn rate_function(cset: &Constellation, s: f64) -> Result<LegendrePoint> {
    rate_function_classes(&EnergyClasses::new(cset), s)
}

pub fn rate_function_classes(cls: &EnergyClasses, s: f64) -> Result<LegendrePoint> {
    let (lo_e, hi_e) = (cls.e_min(), cls.e_max());
    let tol = cls.boundary_tol();
    if !s.is_finite() || s < lo_e - tol || s > hi_e + tol {
        return Err(Error::InfeasibleEnergy { s, e_min: lo_e, e_max: hi_e });
    }
    if cls.len() == 1 {
        return Ok(LegendrePoint { rate: 0.0, theta: 0.0 });
    }
    if (s - lo_e).abs() <= tol {
        return Err(Error::EnergyAtBoundary { s, multiplicity: cls.counts()[0] });
    }
    if (s - hi_e).abs() <= tol {
        return Err(Error::EnergyAtBoundary { s, multiplicity: cls.counts()[cls.len() - 1] });
    }
    if s == cls.e_mean() {
        return Ok(LegendrePoint { rate: 0.0, theta: 0.0 });
    }
    let f = |t: f64| cls.cumulant_derivative(t) - s;
    let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
    let mut n = 0;
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        n += 1;
        if n > MAX_BRACKET_DOUBLINGS || !hi.is_finite() {
            return Err(Error::NumericalFailure(format!("could not bracket the tilt for s = {s}")));
        }
    }
    while f(lo) > 0.0 {
        hi = lo;
        lo *= 2.0;
        n += 1;
        if n > MAX_BRACKET_DOUBLINGS || !lo.is_finite() {
            return Err(Error::NumericalFailure(format!("could not bracket the tilt for s = {s}")));
        }
    }
    while hi - lo > THETA_TOL * hi.abs().max(lo.abs()).max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    let rate = (theta * s - cls.cumulant(theta)).max(0.0);
    Ok(LegendrePoint { rate, theta })
}

/// Maximum entropy (bits) of a law on the constellation with mean energy `s`.
pub fn h_max(cset: &Constellation, s: f64) -> Result<f64> {
    h_max_classes(&EnergyClasses::new(cset), s).map(|(h, _)| h)
}

/// `H_max(s)` and the optimal tilt (`None` on the energy boundary).
pub fn h_max_classes(cls: &EnergyClasses, s: f64) -> Result<(f64, Option<f64>)> {
    match rate_function_classes(cls, s) {
        Ok(p) => {
            let h = (cls.size() as f64).log2() - p.rate / LN_2;
            let direct = cls.tilted_entropy_bits(p.theta);
            if (h - direct).abs() > 1e-7 * h.abs().max(1.0) {
                return Err(Error::NumericalFailure(format!(
                    "tilted-law entropy {direct} disagrees with the Legendre value {h}"
                )));
            }
            Ok((h, Some(p.theta)))
        }
        Err(Error::EnergyAtBoundary { multiplicity, .. }) => Ok(((multiplicity as f64).log2(), None)),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperBoundReport {
    pub h_max: f64,
    pub kl_term: f64,
    pub r_upper: f64,
    pub theta_star: Option<f64>,
    pub s_tot: f64,
    pub nu_m: Vec<f64>,
    /// `H_max(s_tot) − log2(1 + |α|²/τ)` when transmitter moments are supplied.
    pub gap_vs_linear: Option<f64>,
}

/// `R̄ = H_max(s_tot) − D(δ‖ν)` for target per-band energies `s_m`.
pub fn rate_upper_bound(cset: &Constellation, target_s_m: &[f64], deltas: &[f64]) -> Result<UpperBoundReport> {
    validate_deltas(deltas)?;
    if target_s_m.len() != deltas.len() {
        return Err(Error::Contract(format!(
            "{} band energies for {} bands",
            target_s_m.len(),
            deltas.len()
        )));
    }
    if target_s_m.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::Contract("band energies must be finite and nonnegative".into()));
    }
    let s_tot: f64 = target_s_m.iter().sum();
    if s_tot == 0.0 {
        return Err(Error::InfeasibleMask);
    }
    let nu_m: Vec<f64> = target_s_m.iter().map(|s| s / s_tot).collect();
    let kl_term = kl_divergence(deltas, &nu_m);
    if !kl_term.is_finite() {
        return Err(Error::InfeasibleMask);
    }
    let (h, theta_star) = h_max_classes(&EnergyClasses::new(cset), s_tot)?;
    Ok(UpperBoundReport {
        h_max: h,
        kl_term,
        r_upper: h - kl_term,
        theta_star,
        s_tot,
        nu_m,
        gap_vs_linear: None,
    })
}

/// As [`rate_upper_bound`], also reporting the gap to the noise-free linear rate.
pub fn rate_upper_bound_with_gap(
    cset: &Constellation,
    target_s_m: &[f64],
    deltas: &[f64],
    m_tx: &AgnMoments,
) -> Result<UpperBoundReport> {
    let mut r = rate_upper_bound(cset, target_s_m, deltas)?;
    if m_tx.tau > 0.0 {
        r.gap_vs_linear = Some(r.h_max - m_tx.sdr().ln_1p() / LN_2);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::{constellation_of, QuantizerSpec};
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn qpsk() -> Constellation {
        constellation_of(&QuantizerSpec::uniform(1, 1.0)).unwrap()
    }

    fn qam16() -> Constellation {
        constellation_of(&QuantizerSpec::uniform(2, 3.0)).unwrap()
    }

    #[test]
    fn energy_classes() {
        let c = EnergyClasses::new(&qam16());
        assert_eq!(c.energies(), &[2.0, 10.0, 18.0]);
        assert_eq!(c.counts(), &[4, 8, 4]);
        assert_eq!(c.e_mean(), 10.0);
    }

    #[test]
    fn cumulant_examples() {
        assert_eq!(cumulant(&qam16(), 0.0), 0.0);
        assert_abs_diff_eq!(cumulant(&qpsk(), 2.0), 4.0, epsilon = 1e-14);
        let direct = (qam16().energies().iter().map(|e| (0.1 * e).exp()).sum::<f64>() / 16.0).ln();
        assert_abs_diff_eq!(cumulant(&qam16(), 0.1), direct, epsilon = 1e-12);
        // Large tilts must not overflow.
        assert_abs_diff_eq!(cumulant(&qam16(), 1e3), 18e3 + (0.25_f64).ln(), epsilon = 1e-9);
        assert_abs_diff_eq!(cumulant(&qam16(), -1e3), -2e3 + (0.25_f64).ln(), epsilon = 1e-9);
    }

    #[test]
    fn rate_function_at_mean_and_degenerate() {
        let p = rate_function(&qam16(), 10.0).unwrap();
        assert_eq!((p.rate, p.theta), (0.0, 0.0));
        let p = rate_function(&qpsk(), 2.0).unwrap();
        assert_eq!(p.rate, 0.0);
    }

    #[test]
    fn rate_function_errors() {
        assert!(matches!(rate_function(&qam16(), 1.0), Err(Error::InfeasibleEnergy { .. })));
        assert!(matches!(rate_function(&qam16(), 19.0), Err(Error::InfeasibleEnergy { .. })));
        assert!(matches!(
            rate_function(&qam16(), 2.0),
            Err(Error::EnergyAtBoundary { multiplicity: 4, .. })
        ));
        assert!(matches!(rate_function(&qpsk(), 1.0), Err(Error::InfeasibleEnergy { .. })));
    }

    #[test]
    fn tilt_solves_the_moment_equation() {
        let cls = EnergyClasses::new(&qam16());
        for s in [2.5, 4.0, 6.0, 9.9, 10.1, 12.0, 16.0, 17.9] {
            let p = rate_function_classes(&cls, s).unwrap();
            assert_abs_diff_eq!(cls.cumulant_derivative(p.theta), s, epsilon = 1e-8 * s);
            assert!(p.rate > 0.0);
        }
    }

    #[test]
    fn h_max_examples() {
        assert_abs_diff_eq!(h_max(&qpsk(), 2.0).unwrap(), 2.0, epsilon = 1e-15);
        assert_eq!(h_max(&qam16(), 10.0).unwrap(), 4.0);
        let h = h_max(&qam16(), 6.0).unwrap();
        assert!(h > 0.0 && h < 4.0);
        // Boundary: uniform over the four corner-energy points.
        assert_eq!(h_max(&qam16(), 18.0).unwrap(), 2.0);
        let single = Constellation::new(vec![Complex64::new(0.0, 0.0)]).unwrap();
        assert_eq!(h_max(&single, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn upper_bound_examples() {
        let r = rate_upper_bound(&qpsk(), &[1.0, 1.0], &[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(r.r_upper, 2.0, epsilon = 1e-15);
        let r = rate_upper_bound(&qpsk(), &[1.8, 0.2], &[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(r.r_upper, 2.0 - 0.73697, epsilon = 1e-5);
        assert_abs_diff_eq!(r.r_upper, r.h_max - r.kl_term, epsilon = 1e-15);
        assert!(matches!(rate_upper_bound(&qpsk(), &[2.0, 0.0], &[0.5, 0.5]), Err(Error::InfeasibleMask)));
        assert!(matches!(
            rate_upper_bound(&qpsk(), &[2.0, 1.0], &[0.5, 0.5]),
            Err(Error::InfeasibleEnergy { .. })
        ));
    }

    #[test]
    fn one_bit_gap() {
        let m = AgnMoments::new(
            Complex64::new(2.0 / std::f64::consts::PI.sqrt(), 0.0),
            2.0 - 4.0 / std::f64::consts::PI,
            1.0,
        )
        .unwrap();
        let r = rate_upper_bound_with_gap(&qpsk(), &[1.2, 0.8], &[0.5, 0.5], &m).unwrap();
        // 2 − log2(π/(π−2)), from 30-digit arithmetic.
        assert_abs_diff_eq!(r.gap_vs_linear.unwrap(), 0.539551826410831, epsilon = 1e-12);
    }
}
