//! Python bindings. Quantizers are given as `bits` (None for an ideal
//! converter) with either an absolute `clip` or a loading factor `kappa`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use quantcap_core::analysis::{awgn_linear_rate, max_linear_aclr_db, noise_free_rate, predict_spectrum, SubbandPlan};
use quantcap_core::bounds::rate_upper_bound_with_gap;
use quantcap_core::experiment::{defaults_document, render, run, ExperimentConfig};
use quantcap_core::moments::{tx_moments, MomentMethod};
use quantcap_core::quantizer::{constellation_of, QuantizerSpec};
use quantcap_core::{AgnMoments, Error};

fn py_err(e: Error) -> PyErr {
    if e.is_input_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

pub fn quantizer(bits: Option<u32>, clip: Option<f64>, kappa: f64, pbar: f64) -> Result<QuantizerSpec, Error> {
    let q = match (bits, clip) {
        (None, _) => QuantizerSpec::Identity,
        (Some(b), Some(c)) => QuantizerSpec::uniform(b, c),
        (Some(b), None) => QuantizerSpec::uniform_loaded(b, kappa, pbar),
    };
    q.validate()?;
    Ok(q)
}

fn moments_for(q: &QuantizerSpec, pbar: f64) -> Result<AgnMoments, Error> {
    tx_moments(q, pbar, MomentMethod::default())
}

/// Results of a config run, as the JSON document the CLI would write.
pub fn run_config_json(text: &str) -> Result<String, Error> {
    let mut cfg = ExperimentConfig::from_json_str(text)?;
    cfg.output.format = quantcap_core::experiment::OutputFormat::Json;
    let out = run(&cfg)?;
    let files = render(&cfg, &out)?;
    let (_, bytes) = files.into_iter().find(|(n, _)| n == "results.json").expect("JSON output is rendered");
    Ok(String::from_utf8(bytes).expect("JSON is UTF-8"))
}

#[pyfunction]
#[pyo3(name = "tx_moments", signature = (bits=None, clip=None, kappa=3.0, pbar=1.0))]
fn tx_moments_py(py: Python<'_>, bits: Option<u32>, clip: Option<f64>, kappa: f64, pbar: f64) -> PyResult<Py<PyDict>> {
    let q = quantizer(bits, clip, kappa, pbar).map_err(py_err)?;
    let m = moments_for(&q, pbar).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("alpha", (m.alpha.re, m.alpha.im))?;
    d.set_item("tau", m.tau)?;
    d.set_item("sdr", m.sdr())?;
    Ok(d.into())
}

#[pyfunction]
#[pyo3(signature = (deltas, powers, bits, clip=None, kappa=3.0))]
fn spectrum(
    py: Python<'_>,
    deltas: Vec<f64>,
    powers: Vec<f64>,
    bits: Option<u32>,
    clip: Option<f64>,
    kappa: f64,
) -> PyResult<Py<PyDict>> {
    let plan = SubbandPlan::new(deltas, powers).map_err(py_err)?;
    let q = quantizer(bits, clip, kappa, plan.pbar()).map_err(py_err)?;
    let m = moments_for(&q, plan.pbar()).map_err(py_err)?;
    let r = predict_spectrum(&plan, &m).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("s_m", r.s_m)?;
    d.set_item("s_tot", r.s_tot)?;
    d.set_item("nu_m", r.nu_m)?;
    d.set_item("nu_min_m", r.nu_min_m)?;
    Ok(d.into())
}

#[pyfunction]
#[pyo3(signature = (deltas, powers, bits, sigma2, clip=None, kappa=3.0))]
fn awgn_rate(
    deltas: Vec<f64>,
    powers: Vec<f64>,
    bits: Option<u32>,
    sigma2: f64,
    clip: Option<f64>,
    kappa: f64,
) -> PyResult<f64> {
    let plan = SubbandPlan::new(deltas, powers).map_err(py_err)?;
    let q = quantizer(bits, clip, kappa, plan.pbar()).map_err(py_err)?;
    let m = moments_for(&q, plan.pbar()).map_err(py_err)?;
    Ok(awgn_linear_rate(&plan, &m, sigma2).map_err(py_err)?.r_lin)
}

#[pyfunction]
#[pyo3(signature = (deltas, nu, bits, clip=None, kappa=3.0, pbar=1.0))]
fn bounds(
    py: Python<'_>,
    deltas: Vec<f64>,
    nu: Vec<f64>,
    bits: u32,
    clip: Option<f64>,
    kappa: f64,
    pbar: f64,
) -> PyResult<Py<PyDict>> {
    let q = quantizer(Some(bits), clip, kappa, pbar).map_err(py_err)?;
    let m = moments_for(&q, pbar).map_err(py_err)?;
    let s_tot = m.output_energy();
    let s_m: Vec<f64> = nu.iter().map(|v| v * s_tot).collect();
    let cset = constellation_of(&q).map_err(py_err)?;
    let ub = rate_upper_bound_with_gap(&cset, &s_m, &deltas, &m).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("r_upper", ub.r_upper)?;
    d.set_item("h_max", ub.h_max)?;
    d.set_item("kl_term", ub.kl_term)?;
    d.set_item("gap_vs_linear", ub.gap_vs_linear)?;
    match noise_free_rate(&deltas, &m, &nu) {
        Ok(r) => d.set_item("r_lin", r.r_lin)?,
        Err(Error::Infeasible { .. }) => d.set_item("r_lin", py.None())?,
        Err(e) => return Err(py_err(e)),
    }
    if deltas.len() == 2 {
        d.set_item("max_linear_aclr_db", max_linear_aclr_db(&deltas, &m).map_err(py_err)?)?;
    }
    Ok(d.into())
}

/// Runs a versioned JSON experiment config and returns the results as JSON.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let text = config_json.to_owned();
    py.allow_threads(move || run_config_json(&text)).map_err(py_err)
}

#[pyfunction]
fn defaults() -> String {
    serde_json::to_string_pretty(&defaults_document()).expect("defaults serialize")
}

#[pymodule]
fn quantcap(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", quantcap_core::VERSION)?;
    m.add_function(wrap_pyfunction!(tx_moments_py, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(awgn_rate, m)?)?;
    m.add_function(wrap_pyfunction!(bounds, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(defaults, m)?)?;
    Ok(())
}
