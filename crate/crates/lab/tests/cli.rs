use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use catenoid_lab::config::{ExperimentConfig, OUTPUT_DIR_ENV};
use serde_json::Value;

fn lab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catenoid-lab"))
        .args(args)
        .env(OUTPUT_DIR_ENV, out)
        .output()
        .unwrap()
}

/// A short, small-grid config written next to the outputs.
fn small_config(dir: &Path) -> PathBuf {
    let mut cfg = ExperimentConfig::default();
    cfg.grid.rho_max = 30.0;
    cfg.grid.n_points = 601;
    cfg.evolution.t_final = 6.0;
    cfg.evolution.record_every = 10;
    cfg.shooting.t_final = 12.0;
    cfg.shooting.families = 1;
    let path = dir.join("small.toml");
    std::fs::write(&path, cfg.to_toml()).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn profile_has_one_row_per_node() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&["profile"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "rho,f,z,weight,flux,V,nu0,phi_odd,phi_even");
    assert_eq!(lines.count(), ExperimentConfig::default().grid.n_points);
    let manifest = read_json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["subcommand"], "profile");
    assert_eq!(manifest["outputs"][0], "profile.csv");
}

#[test]
fn radial_spectrum_has_one_positive_eigenvalue() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&["spectrum", "--ell", "0"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = read_json(&dir.path().join("spectrum.json"));
    let positive = rep["eigenvalues"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|v| v.as_f64().unwrap() > 1e-6)
        .count();
    assert_eq!(positive, 1);
    assert!(rep["mu2"].as_f64().unwrap() > 1.3);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let cfg = cfg.to_str().unwrap();
    let runs: [&[&str]; 6] = [
        &["profile", "--config", cfg],
        &["spectrum", "--ell", "1", "--config", cfg],
        &["darboux-check", "--config", cfg],
        &["evolve", "--track-modulation", "--config", cfg],
        &["tails", "--a", "4", "--b", "2.5", "--config", cfg],
        &["shoot", "--config", cfg],
    ];
    for args in runs {
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        for d in [&a, &b] {
            let out = lab(args, d);
            assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        }
        let mut ma = read_json(&a.join("manifest.json"));
        let mut mb = read_json(&b.join("manifest.json"));
        let outputs: Vec<String> = serde_json::from_value(ma["outputs"].clone()).unwrap();
        assert!(!outputs.is_empty());
        for f in &outputs {
            let x = std::fs::read(a.join(f)).unwrap();
            let y = std::fs::read(b.join(f)).unwrap();
            assert!(x == y, "{args:?}: {f} differs");
        }
        ma["timings"] = Value::Null;
        mb["timings"] = Value::Null;
        assert_eq!(ma, mb);
        std::fs::remove_dir_all(&a).unwrap();
        std::fs::remove_dir_all(&b).unwrap();
    }
}

#[test]
fn evolve_writes_monitors_and_modulation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = lab(
        &["evolve", "--track-modulation", "--rctf", "8", "--config", cfg.to_str().unwrap()],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["norms.csv", "probes.csv", "modulation.csv"] {
        let text = std::fs::read_to_string(dir.path().join(f)).unwrap();
        assert!(text.lines().count() > 2, "{f}");
    }
    let modulation = std::fs::read_to_string(dir.path().join("modulation.csv")).unwrap();
    let first: Vec<f64> = modulation.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    // projected data starts with a_± removed
    assert!(first[1].abs() < 1e-9 && first[2].abs() < 1e-9, "{first:?}");
}

#[test]
fn tails_footer_carries_the_fits() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&["tails", "--a", "3", "--b", "3"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("tails.csv")).unwrap();
    let footer = text.lines().last().unwrap().strip_prefix("# ").unwrap();
    let summary: Value = serde_json::from_str(footer).unwrap();
    let e = summary["fits"][0]["exponent"].as_f64().unwrap();
    assert!((e + 2.0).abs() < 0.15, "{e}");
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let base = ExperimentConfig::default().to_toml();

    let unknown = dir.path().join("unknown.toml");
    std::fs::write(&unknown, base.clone() + "\nsurprise = 1\n").unwrap();
    let out = lab(&["profile", "--config", unknown.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));

    let mut cfg = ExperimentConfig::default();
    cfg.evolution.alpha = -1.0;
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, cfg.to_toml()).unwrap();
    let out = lab(&["profile", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("evolution.alpha"));

    let out = lab(&["profile", "--config", "/nonexistent/lab.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));

    let out = lab(&["evolve", "--rctf", "2"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}
