//! Componentwise I/Q quantizers used to model DACs and ADCs.
//!
//! A quantizer acts on a complex sample by applying the same scalar map to
//! the real and imaginary parts. Bounded quantizers map each part to the
//! nearest level of a finite, sorted level set; samples that fall exactly on
//! a decision threshold round toward +∞.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported resolution for uniform quantizers.
pub const MAX_BITS: u32 = 16;

/// Description of a componentwise scalar quantizer.
///
/// Serialized as `{"kind":"uniform_midrise","bits":3,"clip":2.6}`,
/// `{"kind":"identity"}` or `{"kind":"custom_levels","levels":[...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum QuantizerSpec {
    /// No quantization (infinite resolution).
    Identity,
    /// `2^bits` uniformly spaced midrise levels per dimension with outermost
    /// level at `±clip`.
    UniformMidrise { bits: u32, clip: f64 },
    /// Arbitrary strictly increasing levels per dimension.
    CustomLevels { levels: Vec<f64> },
}

impl QuantizerSpec {
    pub fn uniform(bits: u32, clip: f64) -> Self {
        QuantizerSpec::UniformMidrise { bits, clip }
    }

    /// Uniform quantizer whose clip level is `kappa` standard deviations of
    /// one real dimension of a `CN(0, pbar)` input.
    pub fn uniform_loaded(bits: u32, kappa: f64, pbar: f64) -> Self {
        QuantizerSpec::UniformMidrise { bits, clip: kappa * (0.5 * pbar).sqrt() }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            QuantizerSpec::Identity => Ok(()),
            QuantizerSpec::UniformMidrise { bits, clip } => {
                if *bits == 0 || *bits > MAX_BITS {
                    return Err(Error::InvalidQuantizer(format!(
                        "bits must lie in 1..={MAX_BITS}, got {bits}"
                    )));
                }
                if !(clip.is_finite() && *clip > 0.0) {
                    return Err(Error::InvalidQuantizer(format!(
                        "clip level must be finite and positive, got {clip}"
                    )));
                }
                Ok(())
            }
            QuantizerSpec::CustomLevels { levels } => {
                if levels.is_empty() {
                    return Err(Error::InvalidQuantizer("custom level set is empty".into()));
                }
                if levels.iter().any(|l| !l.is_finite()) {
                    return Err(Error::InvalidQuantizer("custom levels must be finite".into()));
                }
                if levels.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidQuantizer(
                        "custom levels must be strictly increasing".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, QuantizerSpec::Identity)
    }

    /// Per-dimension output levels, ascending. `None` for the identity map.
    pub fn levels(&self) -> Option<Vec<f64>> {
        match self {
            QuantizerSpec::Identity => None,
            QuantizerSpec::UniformMidrise { bits, clip } => Some(midrise_levels(*bits, *clip)),
            QuantizerSpec::CustomLevels { levels } => Some(levels.clone()),
        }
    }

    /// Precomputes levels and thresholds for repeated use.
    pub fn compile(&self) -> Result<Quantizer> {
        self.validate()?;
        Ok(match self.levels() {
            None => Quantizer::Identity,
            Some(levels) => Quantizer::Levels(ScalarLevels::new(levels)),
        })
    }

    /// Output constellation: the Cartesian product of the per-dimension levels.
    pub fn constellation(&self) -> Result<Constellation> {
        constellation_of(self)
    }
}

impl fmt::Display for QuantizerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuantizerSpec::Identity => write!(f, "identity"),
            QuantizerSpec::UniformMidrise { bits, clip } => write!(f, "{bits}-bit midrise (clip {clip})"),
            QuantizerSpec::CustomLevels { levels } => write!(f, "custom ({} levels)", levels.len()),
        }
    }
}

/// Midrise levels `c·(2k+1−2^b)/(2^b−1)`, `k = 0..2^b`; `±c` for one bit.
pub fn midrise_levels(bits: u32, clip: f64) -> Vec<f64> {
    if bits == 1 {
        return vec![-clip, clip];
    }
    let n = 1u64 << bits;
    let denom = (n - 1) as f64;
    (0..n)
        .map(|k| clip * (2.0 * k as f64 + 1.0 - n as f64) / denom)
        .collect()
}

/// A sorted level set with its midpoint decision thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarLevels {
    levels: Vec<f64>,
    thresholds: Vec<f64>,
}

impl ScalarLevels {
    fn new(levels: Vec<f64>) -> Self {
        let thresholds = levels.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Self { levels, thresholds }
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Decision thresholds between consecutive levels (`levels.len() - 1` entries).
    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Cell `k` is `[thresholds[k-1], thresholds[k])` with infinite outer edges.
    pub fn cell(&self, k: usize) -> (f64, f64) {
        let lo = if k == 0 { f64::NEG_INFINITY } else { self.thresholds[k - 1] };
        let hi = self.thresholds.get(k).copied().unwrap_or(f64::INFINITY);
        (lo, hi)
    }

    #[inline]
    pub fn index(&self, v: f64) -> usize {
        // Ties go to the upper cell.
        self.thresholds.partition_point(|&t| t <= v)
    }

    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        self.levels[self.index(v)]
    }
}

/// A compiled quantizer ready for per-sample application.
#[derive(Debug, Clone, PartialEq)]
pub enum Quantizer {
    Identity,
    Levels(ScalarLevels),
}

impl Quantizer {
    #[inline]
    pub fn apply(&self, u: Complex64) -> Complex64 {
        match self {
            Quantizer::Identity => u,
            Quantizer::Levels(l) => Complex64::new(l.apply(u.re), l.apply(u.im)),
        }
    }

    #[inline]
    pub fn apply_dim(&self, v: f64) -> f64 {
        match self {
            Quantizer::Identity => v,
            Quantizer::Levels(l) => l.apply(v),
        }
    }

    pub fn apply_slice(&self, u: &[Complex64]) -> Vec<Complex64> {
        u.iter().map(|&x| self.apply(x)).collect()
    }

    pub fn scalar_levels(&self) -> Option<&ScalarLevels> {
        match self {
            Quantizer::Identity => None,
            Quantizer::Levels(l) => Some(l),
        }
    }

    /// Largest output magnitude per dimension, if bounded.
    pub fn clip_level(&self) -> Option<f64> {
        self.scalar_levels()
            .map(|l| l.levels[0].abs().max(l.levels[l.levels.len() - 1].abs()))
    }
}

/// `Q(u) = Q_dim(Re u) + j·Q_dim(Im u)`.
pub fn quantize(spec: &QuantizerSpec, u: Complex64) -> Result<Complex64> {
    Ok(spec.compile()?.apply(u))
}

/// A finite set of complex output points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constellation {
    points: Vec<Complex64>,
}

impl Constellation {
    pub fn new(points: Vec<Complex64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidConstellation("constellation is empty".into()));
        }
        if points.iter().any(|p| !(p.re.is_finite() && p.im.is_finite())) {
            return Err(Error::InvalidConstellation("points must be finite".into()));
        }
        let mut sorted = points.clone();
        sorted.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConstellation("duplicate points".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.norm_sqr()).collect()
    }

    pub fn e_min(&self) -> f64 {
        self.energies().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn e_max(&self) -> f64 {
        self.energies().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Mean energy under the uniform law on the points.
    pub fn e_mean(&self) -> f64 {
        self.energies().iter().sum::<f64>() / self.len() as f64
    }
}

/// Cartesian product of the per-dimension level sets of `spec`.
pub fn constellation_of(spec: &QuantizerSpec) -> Result<Constellation> {
    spec.validate()?;
    let levels = spec.levels().ok_or(Error::UnboundedConstellation)?;
    let points = levels
        .iter()
        .flat_map(|&re| levels.iter().map(move |&im| Complex64::new(re, im)))
        .collect();
    Constellation::new(points)
}
