//! The `arraycav` binary end to end: outputs, manifests, the kernel cache and
//! exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn arraycav(args: &[&str], cache: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_arraycav"));
    cmd.args(args).env_remove("ARRAYCAV_CACHE_DIR");
    if let Some(dir) = cache {
        cmd.env("ARRAYCAV_CACHE_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SMALL: &str = r#"
[physical]
lambda = 1.0
gamma = 1.0
dipole = "circular"

[lattice]
a = 0.5
n_side = 16

[cavity]
w = 2.0
l_fsr = 100.0
kappa_c = 1.0
z0 = 0.125

[trap]
omega_m = 0.01
eta = 0.1

[drive]
Omega = 0.01
delta_c = 0.0
delta_minus_shift = 100.0
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn help_lists_every_flag() {
    let out = arraycav(&["dispersion", "--help"], None);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    for flag in ["--config", "--path", "--samples", "--method", "--radius", "--tolerance", "--out", "--threads"] {
        assert!(text.contains(flag), "{flag} missing from help");
    }
    let top = String::from_utf8_lossy(&arraycav(&["--help"], None).stdout).into_owned();
    for sub in ["dispersion", "spectrum", "omparams", "dynamics", "validate", "kernel"] {
        assert!(top.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn usage_and_config_errors_exit_2() {
    assert_eq!(code(&arraycav(&["validate", "--bogus"], None)), 2);
    assert_eq!(code(&arraycav(&["validate", "--config", "/nonexistent/config.toml"], None)), 2);
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.toml", &SMALL.replace("w = 2.0", "w = 1.0"));
    let out = arraycav(&["validate", "--config", &bad], None);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("config key `w`: w = 1 below paraxial bound"), "{}", stderr(&out));
}

#[test]
fn unconverged_sums_exit_3() {
    let cfg = configs().join("default.toml");
    let out = arraycav(
        &["dispersion", "--config", cfg.to_str().unwrap(), "--method", "real-space", "--samples", "2", "--tolerance", "1e-14"],
        None,
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn regime_failures_exit_4() {
    let ok = arraycav(&["validate", "--config", configs().join("default.toml").to_str().unwrap()], None);
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    let report: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert!(report["checks"].as_array().is_some_and(|c| !c.is_empty()));
    let dark = arraycav(&["validate", "--config", configs().join("dark_state.toml").to_str().unwrap()], None);
    assert_eq!(code(&dark), 4);
}

#[test]
fn dispersion_csv_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("default.toml");
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let args = ["--threads", threads, "dispersion", "--config", cfg.to_str().unwrap(), "--samples", "6", "--out", out.to_str().unwrap()];
        let res = arraycav(&args, None);
        assert_eq!(code(&res), 0, "{}", stderr(&res));
        out
    };
    let first = run("a.csv", "1");
    let second = run("b.csv", "4");
    let text = std::fs::read_to_string(&first).unwrap();
    assert_eq!(text.lines().next().unwrap(), "k_x/q,k_y/q,gamma_k/gamma,delta_k/gamma,method");
    assert_eq!(text.lines().count(), 7);
    assert_eq!(text, std::fs::read_to_string(&second).unwrap());

    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "dispersion");
    assert!(manifest["config_sha256"].as_str().is_some_and(|h| h.len() == 64));
    let keys: Vec<&String> = manifest.as_object().unwrap().keys().collect();
    assert_eq!(keys[..2], [&"command".to_string(), &"version".to_string()]);
}

#[test]
fn kernels_come_from_the_cache_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let run = |name: &str| {
        let out = dir.path().join(name);
        let res = arraycav(&["kernel", "--config", &cfg, "--out", out.to_str().unwrap()], Some(&cache));
        assert_eq!(code(&res), 0, "{}", stderr(&res));
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(format!("{name}.manifest.json"))).unwrap()).unwrap();
        let hits: Vec<bool> = manifest["kernels"].as_array().unwrap().iter().map(|k| k["cache"][1].as_bool().unwrap()).collect();
        (std::fs::read(&out).unwrap(), hits)
    };
    let (first, miss) = run("k1.csv");
    let (second, hit) = run("k2.csv");
    assert!(!miss.is_empty() && miss.iter().all(|h| !h));
    assert!(hit.iter().all(|&h| h));
    assert_eq!(first, second);
    assert!(std::fs::read_dir(&cache).unwrap().count() > 0);
}

#[test]
fn omparams_json_is_stable() {
    let cfg = configs().join("default.toml");
    let a = arraycav(&["omparams", "--config", cfg.to_str().unwrap()], None);
    let b = arraycav(&["omparams", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert!(v.is_object());
}

#[test]
fn spectrum_scan_has_one_row_per_sample() {
    let cfg = configs().join("default.toml");
    let out = arraycav(&["spectrum", "--config", cfg.to_str().unwrap(), "--dc-min", "-2", "--dc-max", "2", "--samples", "11"], None);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 12);
    for row in text.lines().skip(1) {
        for cell in row.split(',') {
            assert!(cell.parse::<f64>().is_ok(), "{cell}");
        }
    }
}
