//! Versioned JSON experiment configuration.
//!
//! A config file looks like
//!
//! ```json
//! {
//!   "version": 1,
//!   "experiment": "sweep-snr",
//!   "seed": 7,
//!   "output": { "format": "csv", "path": "results/sweep-snr" },
//!   "params": { "bits": [1, 2, 3, 4, "inf"] }
//! }
//! ```
//!
//! Every field of `params` has a default, so `"params": {}` is valid. Unknown
//! keys are rejected at every level.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::montecarlo::{Layout, Transform};
use crate::moments::{ChannelSpec, MomentMethod, DEFAULT_QUADRATURE_NODES};
use crate::quantizer::QuantizerSpec;
use crate::waveform::{InterpolationParams, WaveformConfig, WelchParams};

pub const CONFIG_VERSION: u32 = 1;

/// Clip level in units of the per-dimension input RMS, `c = κ √(P̄/2)`.
pub const DEFAULT_KAPPA: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::InvalidConfig(format!("unknown output format {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default = "default_output_path")]
    pub path: String,
}

fn default_output_path() -> String {
    "results".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { format: OutputFormat::default(), path: default_output_path() }
    }
}

/// A quantizer as written in a config. Uniform quantizers take either an
/// absolute `clip` or a loading factor `kappa` relative to the input power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum QuantizerConfig {
    Identity,
    Uniform {
        bits: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        clip: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kappa: Option<f64>,
    },
    CustomLevels {
        levels: Vec<f64>,
    },
}

impl QuantizerConfig {
    pub fn uniform(bits: u32) -> Self {
        QuantizerConfig::Uniform { bits, clip: None, kappa: Some(DEFAULT_KAPPA) }
    }

    /// Fills in the default loading factor.
    pub fn resolve(&mut self) -> Result<()> {
        if let QuantizerConfig::Uniform { clip, kappa, .. } = self {
            match (clip.is_some(), kappa.is_some()) {
                (true, true) => {
                    return Err(Error::InvalidConfig("give either clip or kappa, not both".into()));
                }
                (false, false) => *kappa = Some(DEFAULT_KAPPA),
                _ => {}
            }
            if let Some(k) = kappa {
                if !(k.is_finite() && *k > 0.0) {
                    return Err(Error::InvalidConfig(format!("kappa must be positive, got {k}")));
                }
            }
        }
        Ok(())
    }

    /// The quantizer for inputs of mean power `pbar`.
    pub fn spec(&self, pbar: f64) -> Result<QuantizerSpec> {
        let q = match self {
            QuantizerConfig::Identity => QuantizerSpec::Identity,
            QuantizerConfig::Uniform { bits, clip: Some(c), .. } => QuantizerSpec::uniform(*bits, *c),
            QuantizerConfig::Uniform { bits, clip: None, kappa } => {
                QuantizerSpec::uniform_loaded(*bits, kappa.unwrap_or(DEFAULT_KAPPA), pbar)
            }
            QuantizerConfig::CustomLevels { levels } => QuantizerSpec::CustomLevels { levels: levels.clone() },
        };
        q.validate()?;
        Ok(q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelConfig {
    Noiseless,
    Awgn { sigma2: f64 },
}

impl ChannelConfig {
    pub fn spec(&self) -> ChannelSpec {
        match self {
            ChannelConfig::Noiseless => ChannelSpec::noiseless(),
            ChannelConfig::Awgn { sigma2 } => ChannelSpec::awgn(*sigma2),
        }
    }
}

/// Moment evaluation; Monte-Carlo sampling draws from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodConfig {
    Quadrature {
        #[serde(default = "default_nodes")]
        nodes: usize,
    },
    MonteCarlo {
        samples: usize,
    },
}

fn default_nodes() -> usize {
    DEFAULT_QUADRATURE_NODES
}

impl Default for MethodConfig {
    fn default() -> Self {
        MethodConfig::Quadrature { nodes: DEFAULT_QUADRATURE_NODES }
    }
}

impl MethodConfig {
    pub fn method(&self, seed: u64) -> MomentMethod {
        match *self {
            MethodConfig::Quadrature { nodes } => MomentMethod::Quadrature { nodes },
            MethodConfig::MonteCarlo { samples } => MomentMethod::MonteCarlo { samples, seed },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    pub deltas: Vec<f64>,
    pub powers: Vec<f64>,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self { deltas: vec![0.5, 0.5], powers: vec![2.0, 0.0] }
    }
}

/// Number of bits of a sweep point; `"inf"` stands for an ideal converter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bits {
    Finite(u32),
    Infinite,
}

impl Bits {
    pub fn quantizer(self, kappa: f64) -> QuantizerConfig {
        match self {
            Bits::Finite(b) => QuantizerConfig::Uniform { bits: b, clip: None, kappa: Some(kappa) },
            Bits::Infinite => QuantizerConfig::Identity,
        }
    }

    pub fn label(self) -> String {
        match self {
            Bits::Finite(b) => b.to_string(),
            Bits::Infinite => "inf".into(),
        }
    }
}

impl Serialize for Bits {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Bits::Finite(b) => s.serialize_u32(*b),
            Bits::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Bits {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(u32),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(b) => Ok(Bits::Finite(b)),
            Raw::S(s) if s == "inf" => Ok(Bits::Infinite),
            Raw::S(s) => Err(serde::de::Error::custom(format!("expected a bit count or \"inf\", got {s:?}"))),
        }
    }
}

/// Inclusive linear grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step.is_finite() && self.step > 0.0 && self.start.is_finite() && self.stop >= self.start) {
            return Err(Error::InvalidConfig(format!("bad grid {self:?}")));
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        if n > 1_000_000 {
            return Err(Error::InvalidConfig("grid has more than a million points".into()));
        }
        Ok((0..=n).map(|i| self.start + i as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentsParams {
    pub transmitter: QuantizerConfig,
    pub channel: ChannelConfig,
    pub receiver: QuantizerConfig,
    pub pbar: f64,
    pub method: MethodConfig,
}

impl Default for MomentsParams {
    fn default() -> Self {
        Self {
            transmitter: QuantizerConfig::Uniform { bits: 1, clip: Some(1.0), kappa: None },
            channel: ChannelConfig::Noiseless,
            receiver: QuantizerConfig::Identity,
            pbar: 1.0,
            method: MethodConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumParams {
    pub transmitter: QuantizerConfig,
    pub plan: PlanConfig,
    pub method: MethodConfig,
}

impl Default for SpectrumParams {
    fn default() -> Self {
        Self { transmitter: QuantizerConfig::uniform(1), plan: PlanConfig::default(), method: MethodConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateParams {
    pub transmitter: QuantizerConfig,
    pub plan: PlanConfig,
    /// AWGN variance; the rate is the noise-free one when zero.
    pub sigma2: f64,
    pub receiver: QuantizerConfig,
    pub method: MethodConfig,
}

impl Default for RateParams {
    fn default() -> Self {
        Self {
            transmitter: QuantizerConfig::uniform(3),
            plan: PlanConfig { deltas: vec![1.0], powers: vec![1.0] },
            sigma2: 0.1,
            receiver: QuantizerConfig::Identity,
            method: MethodConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UpperBoundParams {
    pub transmitter: QuantizerConfig,
    pub pbar: f64,
    pub deltas: Vec<f64>,
    /// Target output power fractions; the total output energy is the
    /// transmitter's `(|α|² + τ) P̄`.
    pub nu: Vec<f64>,
    pub method: MethodConfig,
}

impl Default for UpperBoundParams {
    fn default() -> Self {
        Self {
            transmitter: QuantizerConfig::uniform(1),
            pbar: 1.0,
            deltas: vec![0.5, 0.5],
            nu: vec![0.5, 0.5],
            method: MethodConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSnrParams {
    pub deltas: Vec<f64>,
    /// Relative band powers, rescaled so that `P̄ = 1`.
    pub power_weights: Vec<f64>,
    pub bits: Vec<Bits>,
    pub kappa: f64,
    pub snr_db: Grid,
    pub method: MethodConfig,
}

impl Default for SweepSnrParams {
    fn default() -> Self {
        Self {
            deltas: vec![0.5, 0.5],
            power_weights: vec![1.0, 0.0],
            bits: vec![Bits::Finite(1), Bits::Finite(2), Bits::Finite(3), Bits::Finite(4), Bits::Infinite],
            kappa: DEFAULT_KAPPA,
            snr_db: Grid { start: -10.0, stop: 30.0, step: 1.0 },
            method: MethodConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAclrParams {
    pub transmitter: QuantizerConfig,
    pub pbar: f64,
    /// In-band and adjacent-band fractions.
    pub deltas: Vec<f64>,
    /// Adjacent-band power fraction, swept from `nu_adj_max` down to `nu_adj_min`.
    pub nu_adj_max: f64,
    pub nu_adj_min: f64,
    pub points: usize,
    pub method: MethodConfig,
}

impl Default for SweepAclrParams {
    fn default() -> Self {
        Self {
            transmitter: QuantizerConfig::uniform(1),
            pbar: 1.0,
            deltas: vec![0.5, 0.5],
            nu_adj_max: 0.5,
            nu_adj_min: 0.02,
            points: 49,
            method: MethodConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub channel: ChannelConfig,
    pub receiver: QuantizerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloParams {
    pub transmitter: QuantizerConfig,
    pub plan: PlanConfig,
    pub n: usize,
    pub trials: usize,
    pub transform: Transform,
    pub layout: Layout,
    pub chain: Option<ChainConfig>,
    pub method: MethodConfig,
}

impl Default for MonteCarloParams {
    fn default() -> Self {
        Self {
            transmitter: QuantizerConfig::Uniform { bits: 1, clip: Some(1.0), kappa: None },
            plan: PlanConfig::default(),
            n: 2048,
            trials: 20,
            transform: Transform::Haar,
            layout: Layout::Contiguous,
            chain: None,
            method: MethodConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveformParams {
    pub bits: Vec<Bits>,
    pub kappa: f64,
    pub occupied_bandwidth: f64,
    pub sample_rate: f64,
    pub guard_band: f64,
    pub fft_size: usize,
    pub num_subcarriers: Option<usize>,
    pub num_symbols: usize,
    pub interpolation: InterpolationParams,
    pub zoh: bool,
    pub psd: WelchParams,
    /// Also emit the PSD of every run.
    pub emit_psd: bool,
}

impl Default for WaveformParams {
    fn default() -> Self {
        let w = WaveformConfig::default();
        Self {
            bits: (3..=8).map(Bits::Finite).collect(),
            kappa: DEFAULT_KAPPA,
            occupied_bandwidth: w.occupied_bandwidth,
            sample_rate: w.sample_rate,
            guard_band: w.guard_band,
            fft_size: w.fft_size,
            num_subcarriers: w.num_subcarriers,
            num_symbols: w.num_symbols,
            interpolation: w.interpolation,
            zoh: w.zoh,
            psd: w.psd,
            emit_psd: false,
        }
    }
}

impl WaveformParams {
    /// Simulator config for one DAC resolution. The stream has unit power.
    pub fn waveform_config(&self, bits: Bits, seed: u64) -> Result<WaveformConfig> {
        Ok(WaveformConfig {
            occupied_bandwidth: self.occupied_bandwidth,
            sample_rate: self.sample_rate,
            guard_band: self.guard_band,
            fft_size: self.fft_size,
            num_subcarriers: self.num_subcarriers,
            num_symbols: self.num_symbols,
            interpolation: self.interpolation,
            dac: bits.quantizer(self.kappa).spec(1.0)?,
            zoh: self.zoh,
            psd: self.psd,
            seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", content = "params", rename_all = "kebab-case")]
pub enum Experiment {
    Moments(MomentsParams),
    Spectrum(SpectrumParams),
    Rate(RateParams),
    UpperBound(UpperBoundParams),
    SweepSnr(SweepSnrParams),
    SweepAclr(SweepAclrParams),
    Montecarlo(MonteCarloParams),
    Waveform(WaveformParams),
}

pub const EXPERIMENT_NAMES: [&str; 8] =
    ["moments", "spectrum", "rate", "upper-bound", "sweep-snr", "sweep-aclr", "montecarlo", "waveform"];

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Moments(_) => "moments",
            Experiment::Spectrum(_) => "spectrum",
            Experiment::Rate(_) => "rate",
            Experiment::UpperBound(_) => "upper-bound",
            Experiment::SweepSnr(_) => "sweep-snr",
            Experiment::SweepAclr(_) => "sweep-aclr",
            Experiment::Montecarlo(_) => "montecarlo",
            Experiment::Waveform(_) => "waveform",
        }
    }

    /// The experiment with all-default parameters.
    pub fn default_for(name: &str) -> Result<Self> {
        Self::from_parts(name, Value::Object(Default::default()))
    }

    fn from_parts(name: &str, params: Value) -> Result<Self> {
        if !EXPERIMENT_NAMES.contains(&name) {
            return Err(Error::InvalidConfig(format!(
                "unknown experiment {name:?}; expected one of {}",
                EXPERIMENT_NAMES.join(", ")
            )));
        }
        let v = serde_json::json!({ "experiment": name, "params": params });
        serde_json::from_value(v).map_err(|e| Error::InvalidConfig(format!("params of {name}: {e}")))
    }

    fn quantizers_mut(&mut self) -> Vec<&mut QuantizerConfig> {
        match self {
            Experiment::Moments(p) => vec![&mut p.transmitter, &mut p.receiver],
            Experiment::Spectrum(p) => vec![&mut p.transmitter],
            Experiment::Rate(p) => vec![&mut p.transmitter, &mut p.receiver],
            Experiment::UpperBound(p) => vec![&mut p.transmitter],
            Experiment::Montecarlo(p) => {
                let mut v = vec![&mut p.transmitter];
                if let Some(c) = &mut p.chain {
                    v.push(&mut c.receiver);
                }
                v
            }
            Experiment::SweepSnr(_) | Experiment::SweepAclr(_) | Experiment::Waveform(_) => vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub version: u32,
    pub seed: u64,
    pub output: OutputConfig,
    pub experiment: Experiment,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    version: u32,
    experiment: String,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    output: OutputConfig,
    #[serde(default = "empty_object")]
    params: Value,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self { version: CONFIG_VERSION, seed: 0, output: OutputConfig::default(), experiment }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if raw.version != CONFIG_VERSION {
            return Err(Error::InvalidConfig(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                raw.version
            )));
        }
        let mut cfg = Self {
            version: raw.version,
            seed: raw.seed,
            output: raw.output,
            experiment: Experiment::from_parts(&raw.experiment, raw.params)?,
        };
        cfg.resolve()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Fills in defaults that depend on other fields.
    pub fn resolve(&mut self) -> Result<()> {
        for q in self.experiment.quantizers_mut() {
            q.resolve()?;
        }
        Ok(())
    }

    /// The config with every default written out.
    pub fn to_json_value(&self) -> Value {
        let exp = serde_json::to_value(&self.experiment).expect("experiment params serialize");
        serde_json::json!({
            "version": self.version,
            "experiment": exp["experiment"],
            "seed": self.seed,
            "output": self.output,
            "params": exp["params"],
        })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("config serializes") + "\n"
    }
}

/// Every built-in default, as a JSON document.
pub fn defaults_document() -> Value {
    let mut experiments = serde_json::Map::new();
    for name in EXPERIMENT_NAMES {
        let e = Experiment::default_for(name).expect("defaults parse");
        let mut cfg = ExperimentConfig::new(e);
        cfg.resolve().expect("defaults resolve");
        experiments.insert(name.to_string(), cfg.to_json_value()["params"].clone());
    }
    serde_json::json!({
        "config_version": CONFIG_VERSION,
        "seed": 0,
        "output": OutputConfig::default(),
        "quadrature_nodes": DEFAULT_QUADRATURE_NODES,
        "custom_channel_inner_nodes": crate::moments::MAX_INNER_NODES,
        "clip_kappa": DEFAULT_KAPPA,
        "max_bits": crate::quantizer::MAX_BITS,
        "welch": WelchParams::default(),
        "experiments": Value::Object(experiments),
    })
}

/// Flattens a JSON document into sorted `key,value` pairs with dotted keys.
pub fn flatten(v: &Value) -> Vec<(String, String)> {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, x, out);
                }
            }
            Value::Array(a) => {
                for (i, x) in a.iter().enumerate() {
                    walk(&format!("{prefix}.{i}"), x, out);
                }
            }
            Value::String(s) => out.push((prefix.to_string(), s.clone())),
            Value::Null => out.push((prefix.to_string(), String::new())),
            other => out.push((prefix.to_string(), other.to_string())),
        }
    }
    let mut out = Vec::new();
    walk("", v, &mut out);
    out
}
