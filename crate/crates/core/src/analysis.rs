//! Closed-form sub-band spectrum, linear feasibility region and linear
//! achievable rates. All rates are in bits per symbol.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::AgnMoments;

/// Tolerance on `Σ δ_m = 1` and `Σ ν_m = 1`.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Absolute slack for feasibility comparisons against the noise floor.
pub const FEASIBILITY_SLACK: f64 = 1e-12;

/// Relative tolerance when matching the power a set of moments was computed at.
const PBAR_RTOL: f64 = 1e-9;

/// Sub-band bandwidth fractions and per-band symbol energies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPlan", into = "RawPlan")]
pub struct SubbandPlan {
    deltas: Vec<f64>,
    powers: Vec<f64>,
    pbar: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    deltas: Vec<f64>,
    powers: Vec<f64>,
}

impl TryFrom<RawPlan> for SubbandPlan {
    type Error = Error;
    fn try_from(r: RawPlan) -> Result<Self> {
        SubbandPlan::new(r.deltas, r.powers)
    }
}

impl From<SubbandPlan> for RawPlan {
    fn from(p: SubbandPlan) -> Self {
        RawPlan { deltas: p.deltas, powers: p.powers }
    }
}

impl SubbandPlan {
    pub fn new(deltas: Vec<f64>, powers: Vec<f64>) -> Result<Self> {
        validate_deltas(&deltas)?;
        if powers.len() != deltas.len() {
            return Err(Error::InvalidPlan(format!(
                "{} bandwidth fractions but {} powers",
                deltas.len(),
                powers.len()
            )));
        }
        if powers.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidPlan("powers must be finite and nonnegative".into()));
        }
        let pbar = mean_power(&deltas, &powers);
        if pbar <= 0.0 {
            return Err(Error::InvalidPlan("all sub-band powers are zero".into()));
        }
        Ok(Self { deltas, powers, pbar })
    }

    /// Equal power `pbar` in every band.
    pub fn flat(deltas: Vec<f64>, pbar: f64) -> Result<Self> {
        let powers = vec![pbar; deltas.len()];
        Self::new(deltas, powers)
    }

    /// A single band carrying power `pbar`.
    pub fn single(pbar: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![pbar])
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    /// `Σ δ_m P_m`.
    pub fn pbar(&self) -> f64 {
        self.pbar
    }

    pub fn num_bands(&self) -> usize {
        self.deltas.len()
    }
}

fn mean_power(deltas: &[f64], powers: &[f64]) -> f64 {
    deltas.iter().zip(powers).map(|(d, p)| d * p).sum()
}

pub fn validate_deltas(deltas: &[f64]) -> Result<()> {
    if deltas.is_empty() {
        return Err(Error::InvalidPlan("at least one sub-band is required".into()));
    }
    if deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(Error::InvalidPlan("bandwidth fractions must be positive".into()));
    }
    let sum: f64 = deltas.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidPlan(format!("bandwidth fractions sum to {sum}, not 1")));
    }
    Ok(())
}

fn validate_fractions(deltas: &[f64], nu: &[f64]) -> Result<()> {
    validate_deltas(deltas)?;
    if nu.len() != deltas.len() {
        return Err(Error::Contract(format!("{} power fractions for {} bands", nu.len(), deltas.len())));
    }
    if nu.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Contract("power fractions must be finite and nonnegative".into()));
    }
    let sum: f64 = nu.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Contract(format!("power fractions sum to {sum}, not 1")));
    }
    Ok(())
}

fn check_pbar(expected: f64, m: &AgnMoments) -> Result<()> {
    if (expected - m.pbar).abs() > PBAR_RTOL * expected.abs().max(m.pbar.abs()) {
        return Err(Error::Contract(format!(
            "moments were computed at pbar = {} but the plan has pbar = {expected}",
            m.pbar
        )));
    }
    Ok(())
}

/// Predicted per-band output energies and power fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub s_m: Vec<f64>,
    pub s_tot: f64,
    pub nu_m: Vec<f64>,
    /// Smallest power fraction a linear transmitter can place in each band.
    pub nu_min_m: Vec<f64>,
}

/// `s_m = δ_m (|α|² P_m + τ P̄)`, `s_tot = (|α|² + τ) P̄`, `ν_m = s_m / s_tot`.
pub fn predict_spectrum(plan: &SubbandPlan, m_tx: &AgnMoments) -> Result<SpectrumReport> {
    check_pbar(plan.pbar, m_tx)?;
    let a2 = m_tx.alpha_sq();
    let tau = m_tx.tau;
    let pbar = plan.pbar;
    let s_m: Vec<f64> = plan
        .deltas
        .iter()
        .zip(&plan.powers)
        .map(|(d, p)| d * (a2 * p + tau * pbar))
        .collect();
    let s_tot = (a2 + tau) * pbar;
    let nu_m = s_m.iter().map(|s| s / s_tot).collect();
    Ok(SpectrumReport { s_m, s_tot, nu_m, nu_min_m: noise_floor(&plan.deltas, m_tx) })
}

/// `δ_m τ / (|α|² + τ)`.
pub fn noise_floor(deltas: &[f64], m_tx: &AgnMoments) -> Vec<f64> {
    let r = m_tx.tau / (m_tx.alpha_sq() + m_tx.tau);
    deltas.iter().map(|d| d * r).collect()
}

/// First band whose fraction falls below the floor, with that floor.
fn first_violation(deltas: &[f64], m_tx: &AgnMoments, nu: &[f64]) -> Option<(usize, f64)> {
    noise_floor(deltas, m_tx)
        .into_iter()
        .enumerate()
        .find(|&(m, floor)| nu[m] < floor - FEASIBILITY_SLACK)
}

/// Whether a linear transmitter can realise the power fractions `nu`.
pub fn feasible_fractions(deltas: &[f64], m_tx: &AgnMoments, nu: &[f64]) -> Result<bool> {
    validate_fractions(deltas, nu)?;
    Ok(first_violation(deltas, m_tx, nu).is_none())
}

/// Per-band symbol energies that produce the output power fractions `nu`.
pub fn powers_from_fractions(deltas: &[f64], m_tx: &AgnMoments, pbar: f64, nu: &[f64]) -> Result<Vec<f64>> {
    validate_fractions(deltas, nu)?;
    if let Some((band, floor)) = first_violation(deltas, m_tx, nu) {
        return Err(Error::Infeasible { band, nu: nu[band], floor });
    }
    let a2 = m_tx.alpha_sq();
    if a2 == 0.0 {
        return Err(Error::Contract("alpha = 0: the transmitter carries no linear signal".into()));
    }
    let tau = m_tx.tau;
    Ok(deltas
        .iter()
        .zip(nu)
        .map(|(d, v)| ((v / d * (a2 + tau) - tau) * pbar / a2).max(0.0))
        .collect())
}

/// `D(δ‖ν)` in bits, with `0·log(0/x) = 0` and `+∞` when `ν_m = 0 < δ_m`.
pub fn kl_divergence(delta: &[f64], nu: &[f64]) -> f64 {
    delta
        .iter()
        .zip(nu)
        .map(|(&d, &v)| {
            if d == 0.0 {
                0.0
            } else if v == 0.0 {
                f64::INFINITY
            } else {
                d * (d / v).log2()
            }
        })
        .sum()
}

/// Adjacent-channel leakage ratio `10 log10(ν_in / ν_adj)` in dB.
pub fn aclr_db(nu_in: f64, nu_adj: f64) -> f64 {
    10.0 * (nu_in / nu_adj).log10()
}

/// Largest ACLR a linear transmitter can reach on a two-band plan, in dB.
pub fn max_linear_aclr_db(deltas: &[f64], m_tx: &AgnMoments) -> Result<f64> {
    validate_deltas(deltas)?;
    if deltas.len() != 2 {
        return Err(Error::Contract("ACLR is defined for two-band plans".into()));
    }
    let floor = noise_floor(deltas, m_tx)[1];
    Ok(aclr_db(1.0 - floor, floor))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateRegime {
    Awgn,
    NoiseFree,
    GeneralChain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub r_lin: f64,
    pub per_band_terms: Vec<f64>,
    pub kl_term: Option<f64>,
    pub regime: RateRegime,
}

/// `Σ δ_m log2(1 + |α|² P_m / (τ P̄))` with `P̄ = m_rx.pbar`. Accepts all-zero powers.
pub fn linear_rate_from_powers(deltas: &[f64], powers: &[f64], m_rx: &AgnMoments) -> Result<Vec<f64>> {
    validate_deltas(deltas)?;
    if powers.len() != deltas.len() || powers.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidPlan("powers must be finite, nonnegative and one per band".into()));
    }
    if powers.iter().all(|&p| p == 0.0) {
        return Ok(vec![0.0; deltas.len()]);
    }
    if m_rx.tau == 0.0 {
        return Err(Error::InfiniteRate);
    }
    let snr_unit = m_rx.alpha_sq() / (m_rx.tau * m_rx.pbar);
    Ok(deltas
        .iter()
        .zip(powers)
        .map(|(d, p)| d * (snr_unit * p).ln_1p() / std::f64::consts::LN_2)
        .collect())
}

fn report(terms: Vec<f64>, kl_term: Option<f64>, regime: RateRegime) -> RateReport {
    RateReport { r_lin: terms.iter().sum(), per_band_terms: terms, kl_term, regime }
}

/// Linear-receiver rate lower bound for a general quantized chain.
pub fn linear_rate(plan: &SubbandPlan, m_rx: &AgnMoments) -> Result<RateReport> {
    check_pbar(plan.pbar, m_rx)?;
    let terms = linear_rate_from_powers(&plan.deltas, &plan.powers, m_rx)?;
    Ok(report(terms, None, RateRegime::GeneralChain))
}

/// Rate over an AWGN channel without receiver quantization: the noise adds
/// `σ²/P̄` to the transmitter's `τ`.
pub fn awgn_linear_rate(plan: &SubbandPlan, m_tx: &AgnMoments, sigma2: f64) -> Result<RateReport> {
    if !(sigma2.is_finite() && sigma2 >= 0.0) {
        return Err(Error::Contract(format!("noise variance must be finite and >= 0, got {sigma2}")));
    }
    check_pbar(plan.pbar, m_tx)?;
    let m_rx = m_tx.with_added_noise(sigma2);
    let terms = linear_rate_from_powers(&plan.deltas, &plan.powers, &m_rx)?;
    Ok(report(terms, None, RateRegime::Awgn))
}

/// Noise-free linear rate `log2(1 + |α|²/τ) − D(δ‖ν)` for output fractions `nu`.
pub fn noise_free_rate(deltas: &[f64], m_tx: &AgnMoments, nu: &[f64]) -> Result<RateReport> {
    validate_fractions(deltas, nu)?;
    if m_tx.tau == 0.0 {
        return Err(Error::InfiniteRate);
    }
    let powers = powers_from_fractions(deltas, m_tx, m_tx.pbar, nu)?;
    let kl = kl_divergence(deltas, nu);
    if !kl.is_finite() {
        return Err(Error::InfeasibleMask);
    }
    let terms = linear_rate_from_powers(deltas, &powers, m_tx)?;
    Ok(RateReport {
        r_lin: m_tx.sdr().ln_1p() / std::f64::consts::LN_2 - kl,
        per_band_terms: terms,
        kl_term: Some(kl),
        regime: RateRegime::NoiseFree,
    })
}
