//! Linear-plus-Gaussian decomposition of quantizers and quantized chains.
//!
//! For `U ~ CN(0, pbar)` and a (possibly random) output `S`, the pair
//! `(alpha, tau)` is defined by
//!
//! ```text
//! alpha = E[S U*] / pbar,      tau = E|S - alpha U|² / pbar,
//! ```
//!
//! so that `S - alpha U` is uncorrelated with `U` and
//! `E|S|² = (|alpha|² + tau) pbar`.
//!
//! Expectations are computed either deterministically or by Monte-Carlo.
//! The deterministic path integrates quantizer cells exactly with Gaussian
//! CDF/PDF primitives and only uses Gauss–Hermite nodes along dimensions where
//! the integrand is smooth (an identity transmitter or a custom channel noise).

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::{interval_first_moment, interval_probability, normal_strata, GaussHermite};
use crate::quantizer::{Quantizer, QuantizerSpec};
use crate::rng::{complex_normal, substream};

/// Default Gauss–Hermite nodes per real dimension.
pub const DEFAULT_QUADRATURE_NODES: usize = 129;

/// Gauss–Hermite nodes per real dimension for the inner expectation over a
/// custom channel's noise when the receiver does not quantize.
pub const MAX_INNER_NODES: usize = 32;

/// Channel evaluations allowed for the nested rule when the receiver
/// quantizes; sets the number of noise strata per dimension.
const INNER_EVAL_BUDGET: f64 = 6.0e7;
const MIN_STRATA: usize = 32;
const MAX_STRATA: usize = 512;

const MC_CHUNK: usize = 1 << 16;

/// Scale factor and normalized noise variance of a linear-plus-noise split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgnMoments {
    pub alpha: Complex64,
    pub tau: f64,
    pub pbar: f64,
}

impl AgnMoments {
    pub fn new(alpha: Complex64, tau: f64, pbar: f64) -> Result<Self> {
        if !(pbar.is_finite() && pbar > 0.0) {
            return Err(Error::Contract(format!("pbar must be positive, got {pbar}")));
        }
        if !(alpha.re.is_finite() && alpha.im.is_finite() && tau.is_finite()) {
            return Err(Error::NumericalFailure("non-finite moments".into()));
        }
        if tau < 0.0 {
            return Err(Error::Contract(format!("tau must be nonnegative, got {tau}")));
        }
        Ok(Self { alpha, tau, pbar })
    }

    /// Moments of the identity map.
    pub fn identity(pbar: f64) -> Self {
        Self { alpha: Complex64::new(1.0, 0.0), tau: 0.0, pbar }
    }

    pub fn alpha_sq(&self) -> f64 {
        self.alpha.norm_sqr()
    }

    /// `E|S|² = (|alpha|² + tau) pbar`.
    pub fn output_energy(&self) -> f64 {
        (self.alpha_sq() + self.tau) * self.pbar
    }

    /// Signal-to-distortion ratio `|alpha|² / tau`; infinite when `tau = 0`.
    pub fn sdr(&self) -> f64 {
        self.alpha_sq() / self.tau
    }

    /// The same decomposition with extra independent additive noise of variance `sigma2`.
    pub fn with_added_noise(&self, sigma2: f64) -> Self {
        Self { tau: self.tau + sigma2 / self.pbar, ..*self }
    }
}

/// A noise sample-wise channel `F(x, xi)`.
pub type ChannelFn = Arc<dyn Fn(Complex64, Complex64) -> Complex64 + Send + Sync>;

/// Channel between the transmit and receive quantizers.
#[derive(Clone)]
pub enum ChannelSpec {
    /// `y = x + xi`, `xi ~ CN(0, sigma2)`.
    Awgn { sigma2: f64 },
    /// `y = F(x, xi)`, `xi ~ CN(0, noise_variance)`.
    Custom { map: ChannelFn, noise_variance: f64 },
}

impl ChannelSpec {
    pub fn awgn(sigma2: f64) -> Self {
        ChannelSpec::Awgn { sigma2 }
    }

    pub fn noiseless() -> Self {
        ChannelSpec::Awgn { sigma2: 0.0 }
    }

    pub fn custom<F>(map: F, noise_variance: f64) -> Self
    where
        F: Fn(Complex64, Complex64) -> Complex64 + Send + Sync + 'static,
    {
        ChannelSpec::Custom { map: Arc::new(map), noise_variance }
    }

    pub fn validate(&self) -> Result<()> {
        let v = match self {
            ChannelSpec::Awgn { sigma2 } => *sigma2,
            ChannelSpec::Custom { noise_variance, .. } => *noise_variance,
        };
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::Contract(format!("noise variance must be finite and >= 0, got {v}")));
        }
        Ok(())
    }

    pub fn noise_variance(&self) -> f64 {
        match self {
            ChannelSpec::Awgn { sigma2 } => *sigma2,
            ChannelSpec::Custom { noise_variance, .. } => *noise_variance,
        }
    }

    #[inline]
    pub fn apply(&self, x: Complex64, xi: Complex64) -> Complex64 {
        match self {
            ChannelSpec::Awgn { .. } => x + xi,
            ChannelSpec::Custom { map, .. } => map(x, xi),
        }
    }
}

impl fmt::Debug for ChannelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelSpec::Awgn { sigma2 } => f.debug_struct("Awgn").field("sigma2", sigma2).finish(),
            ChannelSpec::Custom { noise_variance, .. } => f
                .debug_struct("Custom")
                .field("noise_variance", noise_variance)
                .finish_non_exhaustive(),
        }
    }
}

/// How expectations over the Gaussian input are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum MomentMethod {
    Quadrature { nodes: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

impl Default for MomentMethod {
    fn default() -> Self {
        MomentMethod::Quadrature { nodes: DEFAULT_QUADRATURE_NODES }
    }
}

impl MomentMethod {
    fn validate(&self) -> Result<()> {
        match self {
            MomentMethod::Quadrature { nodes: 0 } => {
                Err(Error::Contract("quadrature needs at least one node".into()))
            }
            MomentMethod::MonteCarlo { samples, .. } if *samples < 2 => {
                Err(Error::Contract("Monte-Carlo needs at least two samples".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Moments together with their sampling uncertainty (zero for quadrature).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub moments: AgnMoments,
    pub alpha_stderr: f64,
    pub tau_stderr: f64,
    pub samples: Option<usize>,
}

/// `(alpha, tau)` of the transmit quantizer alone.
pub fn tx_moments(q: &QuantizerSpec, pbar: f64, method: MomentMethod) -> Result<AgnMoments> {
    Ok(tx_moments_estimate(q, pbar, method)?.moments)
}

pub fn tx_moments_estimate(q: &QuantizerSpec, pbar: f64, method: MomentMethod) -> Result<MomentEstimate> {
    chain_moments_estimate(q, &ChannelSpec::noiseless(), &QuantizerSpec::Identity, pbar, method)
}

/// `(alpha, tau)` of `S = Q_rx(F(Q_tx(U), xi))`.
pub fn chain_moments(
    qtx: &QuantizerSpec,
    ch: &ChannelSpec,
    qrx: &QuantizerSpec,
    pbar: f64,
    method: MomentMethod,
) -> Result<AgnMoments> {
    Ok(chain_moments_estimate(qtx, ch, qrx, pbar, method)?.moments)
}

pub fn chain_moments_estimate(
    qtx: &QuantizerSpec,
    ch: &ChannelSpec,
    qrx: &QuantizerSpec,
    pbar: f64,
    method: MomentMethod,
) -> Result<MomentEstimate> {
    if !(pbar.is_finite() && pbar > 0.0) {
        return Err(Error::Contract(format!("pbar must be positive, got {pbar}")));
    }
    method.validate()?;
    ch.validate()?;
    let tx = qtx.compile()?;
    let rx = qrx.compile()?;
    match method {
        MomentMethod::Quadrature { nodes } => {
            let m = match ch {
                ChannelSpec::Awgn { sigma2 } => awgn_chain(&tx, *sigma2, &rx, pbar, nodes)?,
                ChannelSpec::Custom { .. } => general_chain(&tx, ch, &rx, pbar, nodes)?,
            };
            Ok(MomentEstimate { moments: m, alpha_stderr: 0.0, tau_stderr: 0.0, samples: None })
        }
        MomentMethod::MonteCarlo { samples, seed } => monte_carlo(&tx, ch, &rx, pbar, samples, seed),
    }
}

fn finish(alpha: Complex64, second_moment: f64, pbar: f64) -> Result<AgnMoments> {
    let mut tau = second_moment / pbar - alpha.norm_sqr();
    if !(tau.is_finite() && alpha.re.is_finite() && alpha.im.is_finite()) {
        return Err(Error::NumericalFailure("non-finite expectation".into()));
    }
    let scale = second_moment / pbar;
    if tau < 0.0 {
        if tau > -1e-12 * scale.max(1.0) {
            tau = 0.0;
        } else {
            return Err(Error::NumericalFailure(format!("negative distortion variance {tau}")));
        }
    }
    AgnMoments::new(alpha, tau, pbar)
}

/// Point masses of one real dimension of the transmitter output: `(x, P(x), E[U_d 1{x}])`.
fn tx_atoms_1d(tx: &Quantizer, sd: f64, nodes: usize) -> Result<Vec<(f64, f64, f64)>> {
    Ok(match tx.scalar_levels() {
        Some(l) => (0..l.levels().len())
            .map(|k| {
                let (a, b) = l.cell(k);
                (l.levels()[k], interval_probability(a, b, 0.0, sd), interval_first_moment(a, b, sd))
            })
            .collect(),
        None => GaussHermite::new(nodes)?
            .normal_points(sd)
            .into_iter()
            .map(|(x, p)| (x, p, x * p))
            .collect(),
    })
}

/// `(E[S_d], E[S_d²])` for `S_d = Q_rx(x + n)`, `n ~ N(0, sd_n²)`.
fn rx_dim(rx: &Quantizer, x: f64, sd_n: f64) -> (f64, f64) {
    match rx.scalar_levels() {
        None => (x, x * x + sd_n * sd_n),
        Some(_) if sd_n == 0.0 => {
            let y = rx.apply_dim(x);
            (y, y * y)
        }
        Some(l) => {
            let mut m1 = 0.0;
            let mut m2 = 0.0;
            for (k, &lev) in l.levels().iter().enumerate() {
                let (a, b) = l.cell(k);
                let p = interval_probability(a, b, x, sd_n);
                m1 += lev * p;
                m2 += lev * lev * p;
            }
            (m1, m2)
        }
    }
}

/// Componentwise maps and a circular Gaussian channel decouple the real and
/// imaginary parts, so the chain reduces to one real dimension and `alpha` is real.
fn awgn_chain(tx: &Quantizer, sigma2: f64, rx: &Quantizer, pbar: f64, nodes: usize) -> Result<AgnMoments> {
    if let (Quantizer::Identity, Quantizer::Identity) = (tx, rx) {
        return AgnMoments::new(Complex64::new(1.0, 0.0), sigma2 / pbar, pbar);
    }
    let sd = (0.5 * pbar).sqrt();
    let sd_n = (0.5 * sigma2).sqrt();
    let mut cross = 0.0;
    let mut second = 0.0;
    for (x, p, m) in tx_atoms_1d(tx, sd, nodes)? {
        if p == 0.0 && m == 0.0 {
            continue;
        }
        let (g, h) = rx_dim(rx, x, sd_n);
        cross += g * m;
        second += h * p;
    }
    finish(Complex64::new(cross / (sd * sd), 0.0), 2.0 * second, pbar)
}

fn general_chain(tx: &Quantizer, ch: &ChannelSpec, rx: &Quantizer, pbar: f64, nodes: usize) -> Result<AgnMoments> {
    let sd = (0.5 * pbar).sqrt();
    let atoms = tx_atoms_1d(tx, sd, nodes)?;
    let xi_var = ch.noise_variance();
    let xi_points: Vec<(Complex64, f64)> = if xi_var == 0.0 {
        vec![(Complex64::new(0.0, 0.0), 1.0)]
    } else {
        let sd_xi = (0.5 * xi_var).sqrt();
        let pts = match rx {
            Quantizer::Identity => GaussHermite::new(nodes.min(MAX_INNER_NODES))?.normal_points(sd_xi),
            Quantizer::Levels(_) => {
                let pairs = (atoms.len() * atoms.len()) as f64;
                let k = (INNER_EVAL_BUDGET / pairs).sqrt() as usize;
                normal_strata(k.clamp(MIN_STRATA, MAX_STRATA), sd_xi)
            }
        };
        pts.iter()
            .flat_map(|&(a, pa)| pts.iter().map(move |&(b, pb)| (Complex64::new(a, b), pa * pb)))
            .collect()
    };
    // Row-parallel over the real-part atoms; rows are reduced in index order.
    let rows: Vec<(Complex64, f64)> = atoms
        .par_iter()
        .map(|&(xr, pr, mr)| {
            let mut cross = Complex64::new(0.0, 0.0);
            let mut second = 0.0;
            for &(xi_, pi, mi) in &atoms {
                let x = Complex64::new(xr, xi_);
                let p = pr * pi;
                // E[U* 1{atom}] = E[U_r 1] - j E[U_i 1].
                let c = Complex64::new(mr * pi, -pr * mi);
                if p == 0.0 && c == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let mut g = Complex64::new(0.0, 0.0);
                let mut h = 0.0;
                for &(xi, w) in &xi_points {
                    let s = rx.apply(ch.apply(x, xi));
                    g += s * w;
                    h += s.norm_sqr() * w;
                }
                cross += g * c;
                second += h * p;
            }
            (cross, second)
        })
        .collect();
    let (cross, second) = rows
        .into_iter()
        .fold((Complex64::new(0.0, 0.0), 0.0), |(c, s), (a, b)| (c + a, s + b));
    finish(cross / pbar, second, pbar)
}

#[derive(Clone, Copy, Default)]
struct McSums {
    su: Complex64,
    ss: f64,
    uu: f64,
    su_abs2: f64,
}

fn mc_sample(
    tx: &Quantizer,
    ch: &ChannelSpec,
    rx: &Quantizer,
    pbar: f64,
    rng: &mut crate::rng::SimRng,
) -> (Complex64, Complex64) {
    let u = complex_normal(rng, pbar);
    let xi = complex_normal(rng, ch.noise_variance());
    (u, rx.apply(ch.apply(tx.apply(u), xi)))
}

fn chunks(samples: usize) -> Vec<(u64, usize)> {
    (0..samples.div_ceil(MC_CHUNK))
        .map(|i| (i as u64, MC_CHUNK.min(samples - i * MC_CHUNK)))
        .collect()
}

fn monte_carlo(
    tx: &Quantizer,
    ch: &ChannelSpec,
    rx: &Quantizer,
    pbar: f64,
    samples: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    let parts = chunks(samples);
    let first: Vec<McSums> = parts
        .par_iter()
        .map(|&(idx, len)| {
            let mut rng = substream(seed, "moments", idx);
            let mut acc = McSums::default();
            for _ in 0..len {
                let (u, s) = mc_sample(tx, ch, rx, pbar, &mut rng);
                let su = s * u.conj();
                acc.su += su;
                acc.ss += s.norm_sqr();
                acc.uu += u.norm_sqr();
                acc.su_abs2 += su.norm_sqr();
            }
            acc
        })
        .collect();
    let tot = first.iter().fold(McSums::default(), |a, b| McSums {
        su: a.su + b.su,
        ss: a.ss + b.ss,
        uu: a.uu + b.uu,
        su_abs2: a.su_abs2 + b.su_abs2,
    });
    let n = samples as f64;
    let alpha = tot.su / (n * pbar);
    // Second pass over the same streams for the residual energy and its spread.
    let second: Vec<(f64, f64)> = parts
        .par_iter()
        .map(|&(idx, len)| {
            let mut rng = substream(seed, "moments", idx);
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            for _ in 0..len {
                let (u, s) = mc_sample(tx, ch, rx, pbar, &mut rng);
                let e = (s - alpha * u).norm_sqr() / pbar;
                s1 += e;
                s2 += e * e;
            }
            (s1, s2)
        })
        .collect();
    let (r1, r2) = second.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let tau = r1 / n;
    if !(tau.is_finite() && alpha.re.is_finite() && alpha.im.is_finite()) {
        return Err(Error::NumericalFailure("non-finite Monte-Carlo expectation".into()));
    }
    let tau_var = ((r2 / n - tau * tau) * n / (n - 1.0)).max(0.0);
    let mean_su = tot.su / n;
    let su_var = ((tot.su_abs2 / n - mean_su.norm_sqr()) * n / (n - 1.0)).max(0.0);
    Ok(MomentEstimate {
        moments: AgnMoments::new(alpha, tau, pbar)?,
        alpha_stderr: su_var.sqrt() / pbar / n.sqrt(),
        tau_stderr: tau_var.sqrt() / n.sqrt(),
        samples: Some(samples),
    })
}
