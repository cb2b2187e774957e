use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn nvmap(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nvmap")).args(args).current_dir(cwd).output().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn report(path: &Path) -> toml::Table {
    std::fs::read_to_string(path).unwrap().parse().unwrap()
}

fn num(t: &toml::Table, k: &str) -> f64 {
    match &t[k] {
        toml::Value::Float(f) => *f,
        toml::Value::Integer(i) => *i as f64,
        v => panic!("{k}: {v:?}"),
    }
}

const SMALL_BULK: &str = r#"
seed = 3
out = "bulk"
[nv]
drive = "lower_line"
[camera]
sensor = [64, 64]
fov = [4.2e-6, 4.2e-6]
[pipeline]
field = "uniform"
tau_step = 50e-9
tau_count = 200
decay = 6e-6
"#;

#[test]
fn validate_accepts_and_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), "good.toml", SMALL_BULK);
    let out = nvmap(&["validate", "--config", good.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("config ok sha256="));
    let bad = write_config(dir.path(), "bad.toml", "[camera]\nbin = 5\n");
    assert_eq!(nvmap(&["validate", "--config", bad.to_str().unwrap()], dir.path()).status.code(), Some(2));
    let typo = write_config(dir.path(), "typo.toml", "sed = 1\n");
    assert_eq!(nvmap(&["validate", "--config", typo.to_str().unwrap()], dir.path()).status.code(), Some(2));
}

#[test]
fn bulk_pipeline_reads_calibrated_frequency() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bulk.toml", SMALL_BULK);
    let out = nvmap(&["pipeline", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&dir.path().join("bulk/pipeline.txt"));
    assert!((num(&r, "map_mean_hz") - 1.22e6).abs() <= num(&r, "resolution_hz"));
    assert_eq!(num(&r, "flagged"), 0.0);
    for f in ["rabi_map.nvr", "rabi_map.csv", "hwhm_map.csv", "rabi_map.pgm", "ideal_rabi.csv", "mean_trace.csv"] {
        assert!(dir.path().join("bulk").join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(dir.path().join("bulk/rabi_map.csv")).unwrap();
    assert!(csv.starts_with("# config_sha256="));
}

#[test]
fn identical_config_and_seed_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bulk.toml", SMALL_BULK);
    let c = cfg.to_str().unwrap();
    assert!(nvmap(&["pipeline", "--config", c, "--out", "a", "--threads", "1"], dir.path()).status.success());
    assert!(nvmap(&["pipeline", "--config", c, "--out", "b", "--threads", "3"], dir.path()).status.success());
    assert!(nvmap(&["pipeline", "--config", c, "--out", "c", "--seed", "4"], dir.path()).status.success());
    for f in ["rabi_map.nvr", "rabi_map.csv", "rabi_map.pgm", "pipeline.txt", "mean_trace.csv"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    let a = std::fs::read(dir.path().join("a/mean_trace.csv")).unwrap();
    let c = std::fs::read(dir.path().join("c/mean_trace.csv")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn missing_field_map_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "p.toml", "[pipeline]\nfield = \"file\"\n");
    let out = nvmap(&["pipeline", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("simulate"));
}

const EMPTY_SCENE: &str = r#"
out = "empty"
[scene.pattern]
kind = "empty"
size = 4e-6
[scene.grid]
cell = 0.5e-6
[solver]
window = [4e-6, 4e-6]
ramp_cycles = 2
dft_cycles = 2
max_cycles = 8
"#;

#[test]
fn empty_scene_simulates_to_incident_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "e.toml", EMPTY_SCENE);
    let out = nvmap(&["simulate", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("converged"));
    let (map, h) = nvmap_core::ComplexFieldMap::read_binary(&dir.path().join("empty/field.nvf")).unwrap();
    assert_eq!(h.get("config_sha256").unwrap().len(), 64);
    for b in &map.data {
        assert!((b[2].re / 1e-4 - 1.0).abs() < 1e-3);
        assert!(b[0].norm() < 1e-7 && b[1].norm() < 1e-7);
    }
}

#[test]
fn probe_plane_outside_the_core_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "pml.toml",
        "[scene.grid]\ncell = 0.5e-6\nz_max = 2e-6\npadding = 0.0\n[solver]\nwindow = [4e-6, 4e-6]\n",
    );
    assert_eq!(nvmap(&["simulate", "--config", cfg.to_str().unwrap()], dir.path()).status.code(), Some(2));
}

#[test]
fn sweep_needs_three_powers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", "[sweep]\npowers_dbm = [20.0, 30.0, 30.0]\ninject = true\n");
    assert_eq!(nvmap(&["sweep", "--config", cfg.to_str().unwrap()], dir.path()).status.code(), Some(2));
}

#[test]
fn injected_sweep_is_exactly_linear() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", "out = \"s\"\n[sweep]\npowers_dbm = [11.3, 17.3, 23.3, 29.3, 37.3]\ninject = true\n");
    let out = nvmap(&["sweep", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&dir.path().join("s/sweep.txt"));
    assert!((num(&r, "r_squared") - 1.0).abs() < 1e-12);
    assert!((num(&r, "ratio_top_to_reference") - 2.5119).abs() < 1e-3);
    assert_eq!(r["monotone"].as_bool(), Some(true));
}

fn oracle_rows(dir: &Path, args: &[&str]) -> Vec<Vec<f64>> {
    let mut all = vec!["oracle", "--out", "o"];
    all.extend_from_slice(args);
    let out = nvmap(&all, dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::read_to_string(dir.join("o/oracle.csv"))
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn oracle_loop_on_axis() {
    let dir = tempfile::tempdir().unwrap();
    let rows = oracle_rows(dir.path(), &["--kind", "loop", "--radius", "1e-6", "--current", "1e-3", "--points", "21"]);
    let mu0 = nvmap_core::constants::MU0;
    for r in rows {
        let (a, z) = (1e-6f64, r[2]);
        let expect = mu0 * 1e-3 * a * a / (2.0 * (a * a + z * z).powf(1.5));
        assert!((r[7] / expect - 1.0).abs() < 1e-9, "z {z}: {} vs {expect}", r[7]);
    }
}

#[test]
fn oracle_dipole_near_zone_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let rows = oracle_rows(dir.path(), &["--kind", "dipole", "--start", "1e-4,0,0", "--stop", "1e-3,0,0", "--points", "30", "--log"]);
    let slope = |col: usize| {
        let x: Vec<f64> = rows.iter().map(|r| r[0].ln()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[col].ln()).collect();
        let n = x.len() as f64;
        let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
        x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / x.iter().map(|a| (a - mx).powi(2)).sum::<f64>()
    };
    // |E| of the current element falls as 1/r^3 in the near zone, |B| as 1/r^2.
    assert!((slope(16) + 3.0).abs() < 0.05, "E slope {}", slope(16));
    assert!((slope(9) + 2.0).abs() < 0.05, "B slope {}", slope(9));
}

#[test]
fn oracle_uniform_rows_are_constant() {
    let dir = tempfile::tempdir().unwrap();
    let rows = oracle_rows(dir.path(), &["--kind", "uniform", "--field", "2e-4", "--points", "5"]);
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r[7] == 2e-4 && r[3] == 0.0));
}

#[test]
fn unknown_oracle_kind_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(nvmap(&["oracle", "--kind", "quadrupole"], dir.path()).status.code(), Some(2));
}
