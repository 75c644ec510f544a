use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use wavepart_cli::config::{validate_config, Experiment, RunConfig};
use wavepart_core::io::read_field_dump;

fn wavepart(dir: &Path, args: &[&str], config: Option<&str>, env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wavepart"));
    cmd.args(args).arg("--output").arg(dir.join("out")).env_remove("WAVEPART_WORKERS");
    if let Some(text) = config {
        let path = dir.join("run.toml");
        fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn manifest(dir: &Path, exp: &str) -> Value {
    let text = fs::read_to_string(dir.join("out").join(exp).join("manifest.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// First positive root of `tan x = x`.
fn tan_root() -> f64 {
    let mut x: f64 = 4.49;
    for _ in 0..50 {
        let f = x.sin() - x * x.cos();
        let df = x * x.sin();
        x -= f / df;
    }
    x
}

#[test]
fn default_config_is_valid_for_every_experiment() {
    let cfg = RunConfig::default();
    for exp in Experiment::ALL {
        assert!(validate_config(&cfg, exp).is_empty(), "{}: {:?}", exp.name(), validate_config(&cfg, exp));
    }
}

#[test]
fn validation_names_each_violation() {
    let cfg = RunConfig::from_toml("dynamics.sigma = 0.5\ngrid.N = 100\ndynamics.dt = -1.0").unwrap();
    let v = validate_config(&cfg, Experiment::NonlinearDecay);
    assert!(v.iter().any(|m| m.contains("sigma must exceed 1")), "{v:?}");
    assert!(v.iter().any(|m| m.contains("power of two")), "{v:?}");
    assert!(v.iter().any(|m| m.contains("dt")), "{v:?}");
    let cfg = RunConfig::from_toml("dynamics.d0 = -0.1").unwrap();
    assert_eq!(validate_config(&cfg, Experiment::LinearDecay).len(), 1);
    assert!(RunConfig::from_toml("grid.M = 3").is_err());
    let cfg = RunConfig::from_toml("charge.amplitude = 1.0\ncharge.total_charge = 2.0").unwrap();
    assert_eq!(validate_config(&cfg, Experiment::WienerScan).len(), 1);
}

#[test]
fn dotted_keys_reach_every_section() {
    let text = "seed = 7\ngrid.N = 32\ngrid.L = 12.0\ncharge.kind = \"uniform-ball\"\n\
                potential.omega0 = 2.0\ndynamics.scheme = \"suzuki4\"\ndata.center = [0.0, 0.0, 0.0]\n\
                wiener.k_max = 3.0\nstability.samples = 11\nscattering.checkpoints = [1.0]";
    let cfg = RunConfig::from_toml(text).unwrap();
    assert_eq!(cfg.seed, 7);
    assert_eq!(cfg.grid_for(Experiment::FreeDecay), (32, 12.0));
    assert_eq!(cfg.charge.kind, "uniform-ball");
    assert_eq!(cfg.potential.omega0, 2.0);
    assert_eq!(cfg.dynamics.scheme, "suzuki4");
    assert_eq!(cfg.data_extent(), 2.0);
    assert_eq!(cfg.wiener.k_max, 3.0);
    assert_eq!(cfg.stability.samples, 11);
    assert_eq!(cfg.scattering.checkpoints, vec![1.0]);
    assert_eq!(RunConfig::default().grid_for(Experiment::Scattering), (128, 32.0));
}

#[test]
fn uniform_ball_fails_wiener_scan_at_first_zero() {
    let dir = TempDir::new().unwrap();
    let o = wavepart(dir.path(), &["wiener-scan"], Some("charge.kind = \"uniform-ball\""), &[]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stdout(&o).contains("FAIL wiener-scan: wiener condition"), "{}", stdout(&o));
    let m = manifest(dir.path(), "wiener-scan");
    assert_eq!(m["status"], "fail");
    let k = m["results"]["first_zero"].as_f64().unwrap();
    assert!((k - tan_root()).abs() < 1e-8, "{k} vs {}", tan_root());
}

#[test]
fn default_bump_passes_wiener_scan() {
    let dir = TempDir::new().unwrap();
    let o = wavepart(dir.path(), &["wiener-scan"], None, &[]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("out/wiener-scan/wiener_scan.csv")).unwrap();
    assert!(csv.starts_with("k,rho_hat\n"));
    assert_eq!(csv.lines().count(), 2002);
}

#[test]
fn nonlinear_decay_defaults_pass() {
    let dir = TempDir::new().unwrap();
    let o = wavepart(dir.path(), &["nonlinear-decay"], None, &[]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let m = manifest(dir.path(), "nonlinear-decay");
    let sigma = m["config"]["dynamics"]["sigma"].as_f64().unwrap();
    assert!(m["results"]["exponent"].as_f64().unwrap() <= -0.8 * sigma);
    assert_eq!(m["grid"]["N"], 64);
    assert_eq!(m["integrator"]["scheme"], "strang");
    assert_eq!(m["files"][0], "nonlinear_trajectory.csv");
}

#[test]
fn schedule_beyond_window_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let o = wavepart(dir.path(), &["free-decay"], Some("dynamics.t_final = 40.0"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("T_window"), "{}", stderr(&o));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn invalid_values_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let o = wavepart(dir.path(), &["linear-decay"], Some("dynamics.sigma = 0.5"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sigma must exceed 1"));
    let o = wavepart(dir.path(), &["stability-scan"], Some("grid.N = 100"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = wavepart(dir.path(), &["stability-scan"], Some("grid.nodes = 64"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = wavepart(dir.path(), &["stability-scan"], None, &[("WAVEPART_WORKERS", "0")]);
    assert_eq!(o.status.code(), Some(2));
    let o = wavepart(dir.path(), &["bogus"], None, &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn anisotropic_critical_point_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let text = "potential.kind = \"user-polynomial\"\npotential.lower_bound = 0.0\n\
                potential.terms = [[0.5, 2, 0, 0], [1.0, 0, 2, 0], [2.0, 0, 0, 2]]";
    let o = wavepart(dir.path(), &["stability-scan"], Some(text), &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("isotropic"), "{}", stderr(&o));
}

#[test]
fn stability_scan_emits_csv() {
    let dir = TempDir::new().unwrap();
    let o = wavepart(dir.path(), &["stability-scan"], Some("stability.samples = 81"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = fs::read_to_string(dir.path().join("out/stability-scan/stability_scan.csv")).unwrap();
    assert!(csv.starts_with("nu,Re_b,Im_b,abs_b\n"));
    assert_eq!(csv.lines().count(), 82);
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("PASS")).count(), 3);
}

const SMALL: &str = "grid.N = 32\ngrid.L = 12.0\ndynamics.sample_every = 10";

#[test]
fn identical_config_and_seed_give_identical_outputs() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let oa = wavepart(a.path(), &["linear-decay", "--seed", "3"], Some(SMALL), &[("WAVEPART_WORKERS", "1")]);
    let ob = wavepart(b.path(), &["linear-decay", "--seed", "3"], Some(SMALL), &[("WAVEPART_WORKERS", "2")]);
    assert_eq!(oa.status.code(), ob.status.code());
    for file in ["linear_trajectory.csv"] {
        let x = fs::read(a.path().join("out/linear-decay").join(file)).unwrap();
        let y = fs::read(b.path().join("out/linear-decay").join(file)).unwrap();
        assert!(x == y, "{file} differs");
    }
    let (ma, mb) = (manifest(a.path(), "linear-decay"), manifest(b.path(), "linear-decay"));
    assert_eq!(ma["results"], mb["results"]);
    assert_eq!(ma["seed"], 3);
    assert_eq!(ma["config_text"], SMALL);

    let c = TempDir::new().unwrap();
    wavepart(c.path(), &["linear-decay", "--seed", "4"], Some(SMALL), &[]);
    let x = fs::read(a.path().join("out/linear-decay/linear_trajectory.csv")).unwrap();
    let z = fs::read(c.path().join("out/linear-decay/linear_trajectory.csv")).unwrap();
    assert_ne!(x, z);
}

#[test]
fn scattering_writes_phi_plus_dump() {
    let dir = TempDir::new().unwrap();
    let text = "grid.N = 32\ngrid.L = 24.0\ndynamics.sample_every = 10\nscattering.checkpoints = [2.0, 4.0, 8.0]";
    let o = wavepart(dir.path(), &["scattering"], Some(text), &[]);
    assert!(matches!(o.status.code(), Some(0) | Some(1)), "{}", stderr(&o));
    let base = dir.path().join("out/scattering");
    let (grid, _) = read_field_dump(fs::File::open(base.join("phi_plus.bin")).unwrap()).unwrap();
    assert_eq!((grid.n(), grid.half_length()), (32, 24.0));
    let rem = fs::read_to_string(base.join("remainder.csv")).unwrap();
    assert!(rem.starts_with("t,remainder_norm\n"));
    let tail = fs::read_to_string(base.join("scattering_tail.csv")).unwrap();
    assert!(tail.starts_with("s,source_norm,tail_norm\n"));
    let m = manifest(dir.path(), "scattering");
    assert_eq!(m["results"]["cauchy_differences"].as_array().unwrap().len(), 2);
    assert_eq!(m["criteria"].as_array().unwrap().len(), 3);
}
