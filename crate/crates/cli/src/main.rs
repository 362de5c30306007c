use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use quantcap_core::experiment::{
    defaults_document, exit_code, flatten, run_and_write, Experiment, ExperimentConfig, OutputFormat,
};
use quantcap_core::Error;

#[derive(Parser)]
#[command(name = "quantcap", version, about = "Spectrum, rate and capacity-bound experiments for quantized transceivers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Linear-plus-Gaussian moments of a quantizer or a DAC/channel/ADC chain.
    Moments(RunArgs),
    /// Predicted per-band output energies and the linear feasibility floor.
    Spectrum(RunArgs),
    /// Linear-receiver achievable rate for a sub-band plan.
    Rate(RunArgs),
    /// DAC-constrained capacity upper bound.
    UpperBound(RunArgs),
    /// Rate versus SNR for several DAC resolutions.
    SweepSnr(RunArgs),
    /// Linear rate and upper bound versus adjacent-channel leakage.
    SweepAclr(RunArgs),
    /// Random-unitary simulation of the quantized chain.
    Montecarlo(RunArgs),
    /// Oversampled OFDM transmitter with a b-bit DAC and ACLR measurement.
    Waveform(RunArgs),
    /// Print every built-in default.
    Defaults(DefaultsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Versioned JSON experiment config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Result format (overrides the config).
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct DefaultsArgs {
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

fn load(name: &str, args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => {
            let cfg = ExperimentConfig::from_path(path)?;
            if cfg.experiment.name() != name {
                return Err(Error::InvalidConfig(format!(
                    "{} holds a {:?} experiment, not {name:?}",
                    path.display(),
                    cfg.experiment.name()
                )));
            }
            cfg
        }
        None => {
            let mut cfg = ExperimentConfig::new(Experiment::default_for(name)?);
            cfg.output.path = format!("results/{name}");
            cfg.resolve()?;
            cfg
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output.path = out.to_string_lossy().into_owned();
    }
    if let Some(f) = args.format {
        cfg.output.format = f.into();
    }
    Ok(cfg)
}

fn execute(name: &str, args: &RunArgs) -> Result<(), Error> {
    let cfg = load(name, args)?;
    for p in run_and_write(&cfg)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn print_defaults(format: Format) {
    let doc = defaults_document();
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&doc).expect("defaults serialize")),
        Format::Csv => {
            println!("key,value");
            for (k, v) in flatten(&doc) {
                println!("{k},{v}");
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Defaults(d) => {
            print_defaults(d.format);
            return ExitCode::SUCCESS;
        }
        Command::Moments(a) => ("moments", a),
        Command::Spectrum(a) => ("spectrum", a),
        Command::Rate(a) => ("rate", a),
        Command::UpperBound(a) => ("upper-bound", a),
        Command::SweepSnr(a) => ("sweep-snr", a),
        Command::SweepAclr(a) => ("sweep-aclr", a),
        Command::Montecarlo(a) => ("montecarlo", a),
        Command::Waveform(a) => ("waveform", a),
    };
    match execute(name, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("quantcap {name}: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
