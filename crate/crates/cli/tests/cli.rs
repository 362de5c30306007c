use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn quantcap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quantcap")).args(args).output().expect("binary runs")
}

fn presets_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn defaults_as_json_and_csv() {
    let o = quantcap(&["defaults"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["quadrature_nodes"], 129);
    assert_eq!(v["clip_kappa"], 3.0);
    assert_eq!(v["welch"]["segment_length"], 4096);

    let o = quantcap(&["defaults", "--format", "csv"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("key,value\n"));
    assert!(text.lines().any(|l| l == "quadrature_nodes,129"));
    assert!(text.lines().all(|l| l.split(',').count() == 2));
}

#[test]
fn sweep_snr_writes_results_and_resolved_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("snr");
    let o = quantcap(&["sweep-snr", "--out", out.to_str().unwrap(), "--seed", "9"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.starts_with("snr_db,bits,rate_bps,seed,version\n"));
    assert!(csv.lines().skip(1).all(|l| l.contains(",9,")));
    let resolved: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("resolved_config.json")).unwrap()).unwrap();
    assert_eq!(resolved["seed"], 9);
    assert_eq!(resolved["experiment"], "sweep-snr");
}

#[test]
fn resolved_config_reruns_byte_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let cfg = presets_dir().join("montecarlo_one_bit_haar.json");
    let o = quantcap(&["montecarlo", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let resolved = a.join("resolved_config.json");
    let o = quantcap(&["montecarlo", "--config", resolved.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(o.status.success());
    for f in ["results.csv", "details.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn malformed_config_exits_2_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    let out = tmp.path().join("out");
    for text in [
        "{ not json",
        r#"{"version":1,"experiment":"rate","params":{"unknown":1}}"#,
        r#"{"version":1,"experiment":"sweep-snr"}"#,
    ] {
        fs::write(&cfg, text).unwrap();
        let o = quantcap(&["rate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        assert!(!out.exists());
    }
    let o = quantcap(&["rate", "--config", tmp.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = quantcap(&["rate", "--format", "xml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("noiseless.json");
    let out = tmp.path().join("out");
    fs::write(&cfg, r#"{"version":1,"experiment":"rate","params":{"transmitter":{"kind":"identity"},"sigma2":0}}"#)
        .unwrap();
    let o = quantcap(&["rate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!out.exists());
}

#[test]
fn every_preset_is_valid() {
    let mut n = 0;
    for e in fs::read_dir(presets_dir()).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "json") {
            quantcap_core::experiment::ExperimentConfig::from_path(&p)
                .unwrap_or_else(|err| panic!("{}: {err}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 8);
}

#[test]
fn json_format_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = presets_dir().join("aclr_tradeoff_one_bit.json");
    let o = quantcap(&[
        "sweep-aclr",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("results.json")).unwrap()).unwrap();
    assert_eq!(v["experiment"], "sweep-aclr");
    assert!(v["tables"]["results"].as_array().unwrap().len() >= 50);
}
