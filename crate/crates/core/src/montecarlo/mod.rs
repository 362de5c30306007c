//! Finite-N simulation of the unitary-precoded quantized signal chain.
//!
//! Each trial draws frequency-domain symbols `z` (independent `CN(0, P_{a_k})`),
//! maps them to the time domain with `u = Vᴴ z`, quantizes `x = Q_tx(u)`,
//! passes `x` through the channel and receive quantizer `s = Q_rx(F(x, ξ))`
//! and returns to the frequency domain with `r = V x`, `ẑ = V s`. The
//! empirical band energies, the transmit distortion `w = r − α z` and the
//! per-band correlation between `z` and `ẑ` are compared with the closed
//! forms.

pub mod haar;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::analysis::{predict_spectrum, SubbandPlan};
use crate::error::{Error, Result};
use crate::moments::{chain_moments, tx_moments, AgnMoments, ChannelSpec, MomentMethod};
use crate::quantizer::{Quantizer, QuantizerSpec};
use crate::rng::{complex_normal, substream, SimRng};

pub use haar::{haar_unitary_from, sample_haar_unitary, HaarAction};

/// Unitary transform between the frequency and time domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    /// Haar unitary, sampled through its exact action on the needed vectors.
    #[default]
    Haar,
    /// Haar unitary, sampled as a dense matrix (cubic cost; small N only).
    HaarDense,
    /// Unitary DFT.
    Fft,
}

/// How the `N` frequency indices are split among sub-bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    #[default]
    Contiguous,
    Interleaved,
}

/// Band index `a_k` of every frequency index.
pub fn subband_assignment(n: usize, deltas: &[f64], layout: Layout) -> Vec<usize> {
    let m = deltas.len();
    match layout {
        Layout::Contiguous => {
            let mut out = Vec::with_capacity(n);
            let mut cum = 0.0;
            let mut start = 0usize;
            for (band, d) in deltas.iter().enumerate() {
                cum += d;
                let end = if band + 1 == m { n } else { ((cum * n as f64).round() as usize).min(n) };
                out.extend(std::iter::repeat_n(band, end.saturating_sub(start)));
                start = start.max(end);
            }
            out
        }
        Layout::Interleaved => {
            let mut counts = vec![0usize; m];
            (0..n)
                .map(|k| {
                    let target = (k + 1) as f64;
                    let band = (0..m)
                        .max_by(|&a, &b| {
                            let da = deltas[a] * target - counts[a] as f64;
                            let db = deltas[b] * target - counts[b] as f64;
                            da.total_cmp(&db).then(b.cmp(&a))
                        })
                        .unwrap_or(0);
                    counts[band] += 1;
                    band
                })
                .collect()
        }
    }
}

/// Channel and receive quantizer for chain simulations.
#[derive(Debug, Clone)]
pub struct ChainSpec {
    pub channel: ChannelSpec,
    pub qrx: QuantizerSpec,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n: usize,
    pub transform: Transform,
    pub trials: usize,
    pub seed: u64,
    pub plan: SubbandPlan,
    pub layout: Layout,
    pub qtx: QuantizerSpec,
    pub chain: Option<ChainSpec>,
    pub moment_method: MomentMethod,
}

impl SimConfig {
    /// Defaults: `N = 2048`, 20 Haar trials, contiguous bands, transmitter only.
    pub fn new(plan: SubbandPlan, qtx: QuantizerSpec) -> Self {
        Self {
            n: 2048,
            transform: Transform::Haar,
            trials: 20,
            seed: 0,
            plan,
            layout: Layout::Contiguous,
            qtx,
            chain: None,
            moment_method: MomentMethod::default(),
        }
    }

    pub fn assignment(&self) -> Vec<usize> {
        subband_assignment(self.n, self.plan.deltas(), self.layout)
    }

    fn validate(&self) -> Result<Vec<usize>> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("transform size must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("at least one trial is required".into()));
        }
        if self.transform == Transform::HaarDense && self.n > 1024 {
            return Err(Error::InvalidConfig("dense Haar sampling is limited to n <= 1024".into()));
        }
        self.qtx.validate()?;
        if let Some(c) = &self.chain {
            c.qrx.validate()?;
            c.channel.validate()?;
        }
        let a = self.assignment();
        let m = self.plan.num_bands();
        for (band, d) in self.plan.deltas().iter().enumerate() {
            let count = a.iter().filter(|&&x| x == band).count();
            if (count as f64 / self.n as f64 - d).abs() > 1.0 / self.n as f64 + 1e-12 {
                return Err(Error::InvalidConfig(format!(
                    "band {band} gets {count} of {} indices, which does not match delta = {d}",
                    self.n
                )));
            }
        }
        debug_assert!(a.iter().all(|&x| x < m));
        Ok(a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub stderr: f64,
}

impl MeanStd {
    fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let stderr = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr }
    }
}

/// Moment diagnostics of the transmit distortion `w = r − α z`.
/// Entries are `None` when `w` vanishes identically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseDiagnostics {
    pub excess_kurtosis_re: Option<f64>,
    pub excess_kurtosis_im: Option<f64>,
    /// Mean over trials of `|⟨z, w⟩| / (‖z‖ ‖w‖)`.
    pub z_w_correlation: Option<f64>,
    /// Pooled correlation of `Re w` and `Im w`.
    pub iq_correlation: Option<f64>,
    /// Pooled `E|w|² / P̄`, comparable to `τ_tx`.
    pub normalized_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub s_m: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub n: usize,
    pub trials: usize,
    pub transform: Transform,
    pub seed: u64,
    pub tx_moments: AgnMoments,
    pub empirical_s_m: Vec<MeanStd>,
    pub empirical_s_tot: MeanStd,
    pub empirical_nu_m: Vec<f64>,
    pub predicted_s_m: Vec<f64>,
    pub predicted_s_tot: f64,
    pub predicted_nu_m: Vec<f64>,
    /// `|empirical − predicted| / predicted`, or absolute when the prediction is 0.
    pub relative_errors: Vec<f64>,
    pub s_tot_relative_error: f64,
    pub noise_diagnostics: NoiseDiagnostics,
    pub rx_moments: Option<AgnMoments>,
    /// Pooled per-band `|Σ z* ẑ|² / (Σ|z|² Σ|ẑ|²)`; `None` for unloaded bands.
    pub empirical_rho_m: Option<Vec<Option<f64>>>,
    pub predicted_rho_m: Option<Vec<Option<f64>>>,
    /// Worst `|‖u‖ − ‖z‖| / ‖z‖` over trials.
    pub max_unitarity_error: f64,
    /// Worst `|Σ φ_m(r) − ‖x‖²/N|` over trials.
    pub max_energy_bookkeeping_error: f64,
    pub per_trial: Vec<TrialRecord>,
}

impl SimReport {
    pub fn max_relative_error(&self) -> f64 {
        self.relative_errors.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Default)]
struct TrialOut {
    s_m: Vec<f64>,
    w_re: [f64; 4],
    w_im: [f64; 4],
    w_reim: f64,
    w_count: f64,
    zw_corr: Option<f64>,
    unitarity: f64,
    bookkeeping: f64,
    rho: Vec<(Complex64, f64, f64)>,
}

fn relative_error(emp: f64, pred: f64) -> f64 {
    if pred == 0.0 {
        emp.abs()
    } else {
        ((emp - pred) / pred).abs()
    }
}

fn powers_acc(acc: &mut [f64; 4], x: f64) {
    let x2 = x * x;
    acc[0] += x;
    acc[1] += x2;
    acc[2] += x2 * x;
    acc[3] += x2 * x2;
}

fn excess_kurtosis(s: &[f64; 4], n: f64, floor: f64) -> Option<f64> {
    let m1 = s[0] / n;
    let e2 = s[1] / n;
    let e3 = s[2] / n;
    let e4 = s[3] / n;
    let var = e2 - m1 * m1;
    if var <= floor {
        return None;
    }
    let m4 = e4 - 4.0 * m1 * e3 + 6.0 * m1 * m1 * e2 - 3.0 * m1.powi(4);
    Some(m4 / (var * var) - 3.0)
}

struct Unitary {
    fft: Option<(Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>,
}

impl Unitary {
    fn new(cfg: &SimConfig) -> Self {
        let fft = (cfg.transform == Transform::Fft).then(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(cfg.n), planner.plan_fft_inverse(cfg.n))
        });
        Self { fft }
    }
}

fn unitary_fft(plan: &Arc<dyn Fft<f64>>, v: &[Complex64]) -> Vec<Complex64> {
    let mut buf = v.to_vec();
    plan.process(&mut buf);
    let s = 1.0 / (v.len() as f64).sqrt();
    buf.iter_mut().for_each(|c| *c *= s);
    buf
}

fn run_trial(
    cfg: &SimConfig,
    assign: &[usize],
    q_tx: &Quantizer,
    rx: Option<(&ChannelSpec, &Quantizer)>,
    alpha: Complex64,
    unitary: &Unitary,
    trial: usize,
) -> TrialOut {
    let n = cfg.n;
    let m = cfg.plan.num_bands();
    let mut rng: SimRng = substream(cfg.seed, "montecarlo", trial as u64);
    let powers = cfg.plan.powers();
    let z: Vec<Complex64> = assign.iter().map(|&a| complex_normal(&mut rng, powers[a])).collect();

    enum Op {
        Implicit(HaarAction),
        Dense(nalgebra::DMatrix<Complex64>),
        Fft,
    }
    let (op, u) = match cfg.transform {
        Transform::Haar => {
            let h = HaarAction::draw(&z, &mut rng);
            let u = h.u().to_vec();
            (Op::Implicit(h), u)
        }
        Transform::HaarDense => {
            let v = haar_unitary_from(n, &mut rng);
            let zv = nalgebra::DVector::from_column_slice(&z);
            let u = v.adjoint() * zv;
            (Op::Dense(v), u.as_slice().to_vec())
        }
        Transform::Fft => {
            let (_, inv) = unitary.fft.as_ref().expect("fft planned");
            (Op::Fft, unitary_fft(inv, &z))
        }
    };
    let x = q_tx.apply_slice(&u);
    let s: Option<Vec<Complex64>> = rx.map(|(ch, qrx)| {
        x.iter()
            .map(|&xk| {
                let xi = complex_normal(&mut rng, ch.noise_variance());
                qrx.apply(ch.apply(xk, xi))
            })
            .collect()
    });
    let mut inputs: Vec<&[Complex64]> = vec![&x];
    if let Some(s) = &s {
        inputs.push(s);
    }
    let outs: Vec<Vec<Complex64>> = match &op {
        Op::Implicit(h) => h.apply(&inputs, &mut rng),
        Op::Dense(v) => inputs
            .iter()
            .map(|y| (v * nalgebra::DVector::from_column_slice(y)).as_slice().to_vec())
            .collect(),
        Op::Fft => {
            let (fwd, _) = unitary.fft.as_ref().expect("fft planned");
            inputs.iter().map(|y| unitary_fft(fwd, y)).collect()
        }
    };
    let r = &outs[0];

    let mut s_m = vec![0.0; m];
    for (k, &a) in assign.iter().enumerate() {
        s_m[a] += r[k].norm_sqr();
    }
    s_m.iter_mut().for_each(|v| *v /= n as f64);
    let x_energy = x.iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64;
    let bookkeeping = (s_m.iter().sum::<f64>() - x_energy).abs();
    let zn = haar::norm(&z);
    let unitarity = if zn > 0.0 { (haar::norm(&u) - zn).abs() / zn } else { 0.0 };

    let mut out = TrialOut { s_m, unitarity, bookkeeping, ..Default::default() };
    let mut zw = Complex64::new(0.0, 0.0);
    let mut ww = 0.0;
    for (rk, zk) in r.iter().zip(&z) {
        let w = rk - alpha * zk;
        powers_acc(&mut out.w_re, w.re);
        powers_acc(&mut out.w_im, w.im);
        out.w_reim += w.re * w.im;
        zw += zk.conj() * w;
        ww += w.norm_sqr();
    }
    out.w_count = n as f64;
    out.zw_corr = (ww > 0.0 && zn > 0.0).then(|| zw.norm() / (zn * ww.sqrt()));

    if outs.len() > 1 {
        let zh = &outs[1];
        out.rho = vec![(Complex64::new(0.0, 0.0), 0.0, 0.0); m];
        for (k, &a) in assign.iter().enumerate() {
            let e = &mut out.rho[a];
            e.0 += z[k].conj() * zh[k];
            e.1 += z[k].norm_sqr();
            e.2 += zh[k].norm_sqr();
        }
    }
    out
}

fn simulate(cfg: &SimConfig, with_chain: bool) -> Result<SimReport> {
    let assign = cfg.validate()?;
    let pbar = cfg.plan.pbar();
    let m_tx = tx_moments(&cfg.qtx, pbar, cfg.moment_method)?;
    let q_tx = cfg.qtx.compile()?;
    let chain = if with_chain {
        let c = cfg
            .chain
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("chain simulation needs a channel and receive quantizer".into()))?;
        Some((c.channel.clone(), c.qrx.compile()?, chain_moments(&cfg.qtx, &c.channel, &c.qrx, pbar, cfg.moment_method)?))
    } else {
        None
    };
    let unitary = Unitary::new(cfg);
    let rx = chain.as_ref().map(|(ch, q, _)| (ch, q));
    let outs: Vec<TrialOut> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, &assign, &q_tx, rx, m_tx.alpha, &unitary, t))
        .collect();

    let m = cfg.plan.num_bands();
    let pred = predict_spectrum(&cfg.plan, &m_tx)?;
    let empirical_s_m: Vec<MeanStd> = (0..m)
        .map(|b| MeanStd::of(&outs.iter().map(|o| o.s_m[b]).collect::<Vec<_>>()))
        .collect();
    let empirical_s_tot = MeanStd::of(&outs.iter().map(|o| o.s_m.iter().sum()).collect::<Vec<_>>());
    let empirical_nu_m = empirical_s_m.iter().map(|s| s.mean / empirical_s_tot.mean).collect();
    let relative_errors = empirical_s_m
        .iter()
        .zip(&pred.s_m)
        .map(|(e, p)| relative_error(e.mean, *p))
        .collect();

    let mut w_re = [0.0; 4];
    let mut w_im = [0.0; 4];
    let mut reim = 0.0;
    let mut count = 0.0;
    for o in &outs {
        for i in 0..4 {
            w_re[i] += o.w_re[i];
            w_im[i] += o.w_im[i];
        }
        reim += o.w_reim;
        count += o.w_count;
    }
    let var_re = w_re[1] / count - (w_re[0] / count).powi(2);
    let var_im = w_im[1] / count - (w_im[0] / count).powi(2);
    let cov = reim / count - (w_re[0] / count) * (w_im[0] / count);
    // Round-off from the unitary transforms leaves |w|² near 1e-32 P̄ when Q is exact.
    let floor = 1e-20 * pbar;
    let zw: Vec<f64> = if var_re + var_im > floor { outs.iter().filter_map(|o| o.zw_corr).collect() } else { Vec::new() };
    let noise_diagnostics = NoiseDiagnostics {
        excess_kurtosis_re: excess_kurtosis(&w_re, count, floor),
        excess_kurtosis_im: excess_kurtosis(&w_im, count, floor),
        z_w_correlation: (!zw.is_empty()).then(|| zw.iter().sum::<f64>() / zw.len() as f64),
        iq_correlation: (var_re > floor && var_im > floor).then(|| cov / (var_re * var_im).sqrt()),
        normalized_variance: (w_re[1] + w_im[1]) / count / pbar,
    };

    let (rx_moments, empirical_rho_m, predicted_rho_m) = match &chain {
        Some((_, _, m_rx)) => {
            let mut pooled = vec![(Complex64::new(0.0, 0.0), 0.0, 0.0); m];
            for o in &outs {
                for (p, r) in pooled.iter_mut().zip(&o.rho) {
                    p.0 += r.0;
                    p.1 += r.1;
                    p.2 += r.2;
                }
            }
            let emp = pooled
                .iter()
                .zip(cfg.plan.powers())
                .map(|(p, &pm)| (pm > 0.0 && p.2 > 0.0).then(|| p.0.norm_sqr() / (p.1 * p.2)))
                .collect();
            let a2 = m_rx.alpha_sq();
            let predicted = cfg
                .plan
                .powers()
                .iter()
                .map(|&pm| (pm > 0.0).then(|| a2 * pm / (a2 * pm + m_rx.tau * pbar)))
                .collect();
            (Some(*m_rx), Some(emp), Some(predicted))
        }
        None => (None, None, None),
    };

    Ok(SimReport {
        n: cfg.n,
        trials: cfg.trials,
        transform: cfg.transform,
        seed: cfg.seed,
        tx_moments: m_tx,
        s_tot_relative_error: relative_error(empirical_s_tot.mean, pred.s_tot),
        empirical_s_m,
        empirical_s_tot,
        empirical_nu_m,
        predicted_s_m: pred.s_m,
        predicted_s_tot: pred.s_tot,
        predicted_nu_m: pred.nu_m,
        relative_errors,
        noise_diagnostics,
        rx_moments,
        empirical_rho_m,
        predicted_rho_m,
        max_unitarity_error: outs.iter().map(|o| o.unitarity).fold(0.0, f64::max),
        max_energy_bookkeeping_error: outs.iter().map(|o| o.bookkeeping).fold(0.0, f64::max),
        per_trial: outs
            .into_iter()
            .enumerate()
            .map(|(trial, o)| TrialRecord { trial, s_m: o.s_m })
            .collect(),
    })
}

/// Transmitter-only trials: band energies and distortion diagnostics.
pub fn run_tx_trials(cfg: &SimConfig) -> Result<SimReport> {
    simulate(cfg, false)
}

/// Full-chain trials: additionally the per-band correlation of `z` and `ẑ`.
pub fn run_chain_trials(cfg: &SimConfig) -> Result<SimReport> {
    simulate(cfg, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn contiguous_assignment() {
        let a = subband_assignment(10, &[0.3, 0.7], Layout::Contiguous);
        assert_eq!(a, vec![0, 0, 0, 1, 1, 1, 1, 1, 1, 1]);
        let a = subband_assignment(7, &[0.5, 0.5], Layout::Contiguous);
        assert_eq!(a.iter().filter(|&&x| x == 0).count(), 4);
    }

    #[test]
    fn interleaved_assignment() {
        let a = subband_assignment(6, &[0.5, 0.5], Layout::Interleaved);
        assert_eq!(a, vec![0, 1, 0, 1, 0, 1]);
        let a = subband_assignment(1000, &[0.2, 0.3, 0.5], Layout::Interleaved);
        for (b, d) in [0.2, 0.3, 0.5].iter().enumerate() {
            let c = a.iter().filter(|&&x| x == b).count() as f64 / 1000.0;
            assert!((c - d).abs() <= 1e-3);
        }
    }

    #[test]
    fn identity_quantizer_has_no_distortion() {
        let plan = SubbandPlan::new(vec![0.5, 0.5], vec![2.0, 0.0]).unwrap();
        let mut cfg = SimConfig::new(plan, QuantizerSpec::Identity);
        cfg.n = 256;
        cfg.trials = 4;
        let r = run_tx_trials(&cfg).unwrap();
        assert!(r.noise_diagnostics.normalized_variance < 1e-24);
        assert!(r.noise_diagnostics.excess_kurtosis_re.is_none());
        assert_abs_diff_eq!(r.empirical_s_m[1].mean, 0.0, epsilon = 1e-24);
        assert!(r.max_unitarity_error < 1e-12);
    }

    #[test]
    fn chain_identity_noiseless_is_perfectly_correlated() {
        let plan = SubbandPlan::flat(vec![0.5, 0.5], 1.0).unwrap();
        for transform in [Transform::Haar, Transform::HaarDense, Transform::Fft] {
            let mut cfg = SimConfig::new(plan.clone(), QuantizerSpec::Identity);
            cfg.n = 128;
            cfg.trials = 2;
            cfg.transform = transform;
            cfg.chain = Some(ChainSpec { channel: ChannelSpec::noiseless(), qrx: QuantizerSpec::Identity });
            let r = run_chain_trials(&cfg).unwrap();
            for rho in r.empirical_rho_m.unwrap() {
                assert_abs_diff_eq!(rho.unwrap(), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn bad_configs() {
        let plan = SubbandPlan::flat(vec![1.0], 1.0).unwrap();
        let mut cfg = SimConfig::new(plan, QuantizerSpec::Identity);
        cfg.trials = 0;
        assert!(run_tx_trials(&cfg).is_err());
        cfg.trials = 1;
        cfg.n = 0;
        assert!(run_tx_trials(&cfg).is_err());
        cfg.n = 8;
        assert!(run_chain_trials(&cfg).is_err());
    }
}
