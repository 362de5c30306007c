use num_complex::Complex64;

use super::config::*;
use super::{Cell, Outcome, Table};
use crate::analysis::{
    aclr_db, awgn_linear_rate, feasible_fractions, linear_rate, max_linear_aclr_db, noise_free_rate, noise_floor,
    predict_spectrum, validate_deltas, SubbandPlan,
};
use crate::bounds::{rate_upper_bound, rate_upper_bound_with_gap};
use crate::error::{Error, Result};
use crate::montecarlo::{run_chain_trials, run_tx_trials, ChainSpec, SimConfig};
use crate::moments::{chain_moments, chain_moments_estimate, tx_moments, ChannelSpec};
use crate::quantizer::constellation_of;
use crate::waveform::{apply_dac_and_measure, synthesize_baseband};

pub(super) fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let seed = cfg.seed;
    let (tables, details) = match &cfg.experiment {
        Experiment::Moments(p) => moments(p, seed)?,
        Experiment::Spectrum(p) => spectrum(p, seed)?,
        Experiment::Rate(p) => rate(p, seed)?,
        Experiment::UpperBound(p) => upper_bound(p, seed)?,
        Experiment::SweepSnr(p) => sweep_snr(p, seed)?,
        Experiment::SweepAclr(p) => sweep_aclr(p, seed)?,
        Experiment::Montecarlo(p) => montecarlo(p, seed)?,
        Experiment::Waveform(p) => waveform(p, seed)?,
    };
    Ok(Outcome { experiment: cfg.experiment.name().into(), seed, tables, details })
}

type Produced = (Vec<Table>, Option<serde_json::Value>);

fn plan_of(p: &PlanConfig) -> Result<SubbandPlan> {
    SubbandPlan::new(p.deltas.clone(), p.powers.clone())
}

fn to_value<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn moments(p: &MomentsParams, seed: u64) -> Result<Produced> {
    let qtx = p.transmitter.spec(p.pbar)?;
    let ch = p.channel.spec();
    // A loaded receiver sees the transmit power plus the channel noise.
    let rx_power = if p.receiver == QuantizerConfig::Identity {
        p.pbar
    } else {
        tx_moments(&qtx, p.pbar, p.method.method(seed))?.output_energy() + ch.noise_variance()
    };
    let qrx = p.receiver.spec(rx_power)?;
    let e = chain_moments_estimate(&qtx, &ch, &qrx, p.pbar, p.method.method(seed))?;
    let m = e.moments;
    let mut t = Table::new(
        "results",
        &["alpha_re", "alpha_im", "alpha_sq", "tau", "sdr", "alpha_stderr", "tau_stderr", "samples"],
    );
    t.push(vec![
        m.alpha.re.into(),
        m.alpha.im.into(),
        m.alpha_sq().into(),
        m.tau.into(),
        m.sdr().into(),
        e.alpha_stderr.into(),
        e.tau_stderr.into(),
        e.samples.map_or(Cell::Null, Cell::from),
    ]);
    Ok((vec![t], Some(to_value(&e))))
}

fn spectrum(p: &SpectrumParams, seed: u64) -> Result<Produced> {
    let plan = plan_of(&p.plan)?;
    let q = p.transmitter.spec(plan.pbar())?;
    let m = tx_moments(&q, plan.pbar(), p.method.method(seed))?;
    let r = predict_spectrum(&plan, &m)?;
    let mut t = Table::new("results", &["band", "delta", "power", "s_m", "nu_m", "nu_min_m", "s_tot"]);
    for b in 0..plan.num_bands() {
        t.push(vec![
            b.into(),
            plan.deltas()[b].into(),
            plan.powers()[b].into(),
            r.s_m[b].into(),
            r.nu_m[b].into(),
            r.nu_min_m[b].into(),
            r.s_tot.into(),
        ]);
    }
    Ok((vec![t], Some(serde_json::json!({ "moments": m, "spectrum": r }))))
}

fn rate(p: &RateParams, seed: u64) -> Result<Produced> {
    let plan = plan_of(&p.plan)?;
    let pbar = plan.pbar();
    let qtx = p.transmitter.spec(pbar)?;
    let method = p.method.method(seed);
    let m_tx = tx_moments(&qtx, pbar, method)?;
    let report = if p.receiver == QuantizerConfig::Identity {
        awgn_linear_rate(&plan, &m_tx, p.sigma2)?
    } else {
        let qrx = p.receiver.spec(m_tx.output_energy() + p.sigma2)?;
        let m_rx = chain_moments(&qtx, &ChannelSpec::awgn(p.sigma2), &qrx, pbar, method)?;
        linear_rate(&plan, &m_rx)?
    };
    let mut t = Table::new("results", &["band", "delta", "power", "rate_term"]);
    for b in 0..plan.num_bands() {
        t.push(vec![
            b.into(),
            plan.deltas()[b].into(),
            plan.powers()[b].into(),
            report.per_band_terms[b].into(),
        ]);
    }
    t.push(vec!["total".into(), 1.0.into(), pbar.into(), report.r_lin.into()]);
    Ok((vec![t], Some(serde_json::json!({ "tx_moments": m_tx, "rate": report }))))
}

fn upper_bound(p: &UpperBoundParams, seed: u64) -> Result<Produced> {
    let q = p.transmitter.spec(p.pbar)?;
    let cset = constellation_of(&q)?;
    let m = tx_moments(&q, p.pbar, p.method.method(seed))?;
    validate_deltas(&p.deltas)?;
    let s_tot = m.output_energy();
    let s_m: Vec<f64> = p.nu.iter().map(|v| v * s_tot).collect();
    let r = rate_upper_bound_with_gap(&cset, &s_m, &p.deltas, &m)?;
    let feasible = feasible_fractions(&p.deltas, &m, &p.nu)?;
    let r_lin = if feasible { Some(noise_free_rate(&p.deltas, &m, &p.nu)?.r_lin) } else { None };
    let mut t = Table::new(
        "results",
        &["s_tot", "h_max", "kl_term", "r_upper", "theta_star", "gap_vs_linear", "feasible", "r_lin_noise_free"],
    );
    t.push(vec![
        r.s_tot.into(),
        r.h_max.into(),
        r.kl_term.into(),
        r.r_upper.into(),
        r.theta_star.into(),
        r.gap_vs_linear.into(),
        feasible.into(),
        r_lin.into(),
    ]);
    Ok((vec![t], Some(serde_json::json!({ "tx_moments": m, "upper_bound": r }))))
}

fn sweep_snr(p: &SweepSnrParams, seed: u64) -> Result<Produced> {
    validate_deltas(&p.deltas)?;
    if p.power_weights.len() != p.deltas.len() {
        return Err(Error::InvalidConfig("one power weight per band is required".into()));
    }
    let mean: f64 = p.deltas.iter().zip(&p.power_weights).map(|(d, w)| d * w).sum();
    if !(mean.is_finite() && mean > 0.0) {
        return Err(Error::InvalidConfig("power weights must carry positive mean power".into()));
    }
    let plan = SubbandPlan::new(p.deltas.clone(), p.power_weights.iter().map(|w| w / mean).collect())?;
    let snrs = p.snr_db.points()?;
    let mut t = Table::new("results", &["snr_db", "bits", "rate_bps"]);
    for &bits in &p.bits {
        let q = bits.quantizer(p.kappa).spec(1.0)?;
        let m = tx_moments(&q, 1.0, p.method.method(seed))?;
        for &snr_db in &snrs {
            // SNR is referred to the power leaving the DAC.
            let sigma2 = m.output_energy() / 10f64.powf(snr_db / 10.0);
            let r = awgn_linear_rate(&plan, &m, sigma2)?;
            t.push(vec![snr_db.into(), bits.label().into(), r.r_lin.into()]);
        }
    }
    Ok((vec![t], None))
}

/// Adjacent-band fractions from `hi` down to `lo`, with the feasibility floor
/// inserted when it falls inside the range.
fn aclr_grid(hi: f64, lo: f64, points: usize, floor: f64) -> Result<Vec<f64>> {
    if !(0.0 < lo && lo < hi && hi < 1.0) || points < 2 {
        return Err(Error::InvalidConfig(format!(
            "need 0 < nu_adj_min < nu_adj_max < 1 and at least two points, got [{lo}, {hi}] with {points}"
        )));
    }
    let mut g: Vec<f64> = (0..points).map(|i| hi + (lo - hi) * i as f64 / (points - 1) as f64).collect();
    if floor > lo && floor < hi && !g.iter().any(|&v| v == floor) {
        g.push(floor);
        g.sort_by(|a, b| b.total_cmp(a));
    }
    Ok(g)
}

fn sweep_aclr(p: &SweepAclrParams, seed: u64) -> Result<Produced> {
    validate_deltas(&p.deltas)?;
    if p.deltas.len() != 2 {
        return Err(Error::InvalidConfig("sweep-aclr needs exactly two bands".into()));
    }
    let q = p.transmitter.spec(p.pbar)?;
    let cset = constellation_of(&q)?;
    let m = tx_moments(&q, p.pbar, p.method.method(seed))?;
    let floor = noise_floor(&p.deltas, &m)[1];
    let max_aclr = max_linear_aclr_db(&p.deltas, &m)?;
    let s_tot = m.output_energy();
    let mut t = Table::new("results", &["nu_adj", "aclr_db", "feasible", "r_lin", "r_upper"]);
    for nu_adj in aclr_grid(p.nu_adj_max, p.nu_adj_min, p.points, floor)? {
        let nu = [1.0 - nu_adj, nu_adj];
        let r_lin = match noise_free_rate(&p.deltas, &m, &nu) {
            Ok(r) => Some(r.r_lin),
            Err(Error::Infeasible { .. }) => None,
            Err(e) => return Err(e),
        };
        let s_m = [nu[0] * s_tot, nu[1] * s_tot];
        let r_upper = rate_upper_bound(&cset, &s_m, &p.deltas)?.r_upper;
        t.push(vec![
            nu_adj.into(),
            aclr_db(nu[0], nu[1]).into(),
            r_lin.is_some().into(),
            r_lin.into(),
            r_upper.into(),
        ]);
    }
    let details = serde_json::json!({
        "tx_moments": m,
        "nu_adj_floor": floor,
        "max_linear_aclr_db": max_aclr,
    });
    Ok((vec![t], Some(details)))
}

fn montecarlo(p: &MonteCarloParams, seed: u64) -> Result<Produced> {
    let plan = plan_of(&p.plan)?;
    let pbar = plan.pbar();
    let qtx = p.transmitter.spec(pbar)?;
    let mut sim = SimConfig::new(plan.clone(), qtx.clone());
    sim.n = p.n;
    sim.trials = p.trials;
    sim.transform = p.transform;
    sim.layout = p.layout;
    sim.seed = seed;
    sim.moment_method = p.method.method(seed);
    if let Some(c) = &p.chain {
        let ch = c.channel.spec();
        let rx_power = if c.receiver == QuantizerConfig::Identity {
            pbar
        } else {
            tx_moments(&qtx, pbar, sim.moment_method)?.output_energy() + ch.noise_variance()
        };
        sim.chain = Some(ChainSpec { channel: ch, qrx: c.receiver.spec(rx_power)? });
    }
    let r = if sim.chain.is_some() { run_chain_trials(&sim)? } else { run_tx_trials(&sim)? };
    let mut t = Table::new(
        "results",
        &[
            "band",
            "delta",
            "power",
            "predicted_s_m",
            "empirical_s_m",
            "stderr_s_m",
            "relative_error",
            "predicted_nu_m",
            "empirical_nu_m",
            "predicted_rho_m",
            "empirical_rho_m",
        ],
    );
    let rho = |v: &Option<Vec<Option<f64>>>, b: usize| -> Cell { v.as_ref().and_then(|x| x[b]).into() };
    for b in 0..plan.num_bands() {
        t.push(vec![
            b.into(),
            plan.deltas()[b].into(),
            plan.powers()[b].into(),
            r.predicted_s_m[b].into(),
            r.empirical_s_m[b].mean.into(),
            r.empirical_s_m[b].stderr.into(),
            r.relative_errors[b].into(),
            r.predicted_nu_m[b].into(),
            r.empirical_nu_m[b].into(),
            rho(&r.predicted_rho_m, b),
            rho(&r.empirical_rho_m, b),
        ]);
    }
    Ok((vec![t], Some(to_value(&r))))
}

fn waveform(p: &WaveformParams, seed: u64) -> Result<Produced> {
    if p.bits.is_empty() {
        return Err(Error::InvalidConfig("at least one DAC resolution is required".into()));
    }
    // Every resolution quantizes the same stream.
    let base = p.waveform_config(p.bits[0], seed)?;
    base.validate()?;
    let stream: Vec<Complex64> = synthesize_baseband(&base, base.num_symbols, seed)?;
    let mut t = Table::new(
        "results",
        &[
            "bits",
            "aclr_db",
            "agn_predicted_aclr_db",
            "error_db",
            "pre_dac_aclr_db",
            "saturation_fraction",
            "adjacent_flatness_db",
        ],
    );
    let mut psd = Table::new("psd", &["bits", "freq_hz", "psd_db"]);
    let mut reports = Vec::new();
    for &bits in &p.bits {
        let cfg = p.waveform_config(bits, seed)?;
        let mut r = apply_dac_and_measure(&cfg, &stream)?;
        t.push(vec![
            bits.label().into(),
            r.aclr_db.into(),
            r.agn_predicted_aclr_db.into(),
            r.agn_predicted_aclr_db.map(|a| r.aclr_db - a).into(),
            r.pre_dac_aclr_db.into(),
            r.saturation_fraction.into(),
            r.adjacent_flatness_db.into(),
        ]);
        if p.emit_psd {
            for &(f, d) in &r.psd_curve {
                psd.push(vec![bits.label().into(), f.into(), d.into()]);
            }
        }
        r.psd_curve.clear();
        reports.push(serde_json::json!({ "bits": bits, "report": r }));
    }
    let mut tables = vec![t];
    if p.emit_psd {
        tables.push(psd);
    }
    Ok((tables, Some(serde_json::Value::Array(reports))))
}
