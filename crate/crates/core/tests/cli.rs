use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use broadkin::params::{derive_dispersion, PhysicalParams};
use broadkin::spectrum::{RadialGrid, RadialSpectrum};

fn broadkin(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_broadkin"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

const SMALL_GRID: &str = "[grid]\nn = 32\nk_max = 4.0\n";

#[test]
fn run_from_zero_stays_zero() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), format!("{SMALL_GRID}[run]\nhorizon = 0.3\n")).unwrap();
    let o = broadkin(&["run", "--config", "c.toml", "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("out/trajectory.csv"));
    assert_eq!(header, ["t", "dt", "min_f", "M_0", "M_2", "M_5", "gronwall_margin", "omega_margin"]);
    assert!(rows.len() > 1);
    for row in &rows {
        for v in &row[2..6] {
            assert_eq!(v.parse::<f64>().unwrap(), 0.0);
        }
    }
    let (_, last) = read_csv(&dir.path().join("out/snapshot_0001.csv"));
    assert!(last.iter().all(|r| r[1].parse::<f64>().unwrap() == 0.0));
}

#[test]
fn dt_above_bound_is_rejected_at_startup() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{SMALL_GRID}[run]\ndt = 0.5\n[initial]\nkind = \"lognormal\"\n");
    std::fs::write(dir.path().join("c.toml"), cfg).unwrap();
    let o = broadkin(&["run", "--config", "c.toml", "--out", "out"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("h_R/2"), "{}", stderr(&o));
}

#[test]
fn manifest_step_bound_matches_its_constants() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{SMALL_GRID}[run]\nhorizon = 1.0\n[initial]\nkind = \"lognormal\"\namplitude = 1e-6\n");
    std::fs::write(dir.path().join("c.toml"), cfg).unwrap();
    let o = broadkin(&["run", "--config", "c.toml", "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("out/manifest.toml")).unwrap();
    let m: toml::Table = toml::from_str(&text).unwrap();
    let get = |section: &str, key: &str| m[section][key].as_float().unwrap();
    let c = &m["constants"];
    for key in ["gain_constant", "gronwall_ctilde", "theta_star", "loss_a1", "loss_a2", "varsigma", "mass_bound"] {
        assert!(c.get(key).is_some(), "manifest lacks {key}");
    }
    let r = get("run", "truncation_radius");
    let nu = m["config"]["physics"]["viscosity_nu"].as_float().unwrap();
    let gamma = m["config"]["physics"]["damping_exponent_gamma"].as_float().unwrap();
    let (a1, a2) = (get("constants", "loss_a1"), get("constants", "loss_a2"));
    let (ct, t) = (get("constants", "gronwall_ctilde"), get("constants", "horizon"));
    let expected = 0.5 / ((a1 * r * r + a2) * (ct * t).exp() + 2.0 * nu * r.powf(gamma));
    let recorded = get("run", "step_size_bound");
    assert!((recorded - expected).abs() <= 1e-14 * expected, "{recorded} vs {expected}");
    assert!(get("run", "step") <= recorded);
}

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[grid]\nn = 32\nk_mux = 4.0\n").unwrap();
    let o = broadkin(&["run", "--config", "c.toml"], dir.path());
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("k_mux") && err.contains("line 3"), "{err}");
}

#[test]
fn run_restarts_from_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let first = format!("{SMALL_GRID}[run]\nhorizon = 0.1\n[initial]\nkind = \"random\"\n");
    std::fs::write(dir.path().join("a.toml"), first).unwrap();
    assert!(broadkin(&["run", "--config", "a.toml", "--out", "a"], dir.path()).status.success());
    let second = format!("{SMALL_GRID}[run]\nhorizon = 0.1\n[initial]\nkind = \"snapshot\"\npath = \"a/snapshot_0001.csv\"\n");
    std::fs::write(dir.path().join("b.toml"), second).unwrap();
    let o = broadkin(&["run", "--config", "b.toml", "--out", "b"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let a = std::fs::read(dir.path().join("a/snapshot_0001.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/snapshot_0000.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn moments_of_zero_and_unit_box() {
    let dir = tempfile::tempdir().unwrap();
    let zero = RadialSpectrum::zeros(Arc::new(RadialGrid::uniform(16, 0.0, 2.0).unwrap()));
    broadkin::io::write_snapshot(&dir.path().join("zero.csv"), &zero).unwrap();
    let o = broadkin(&["moments", "--snapshot", "zero.csv", "--orders", "0,1,2"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "order,moment");
    assert!(lines[1..].iter().all(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap() == 0.0));

    let unit = RadialSpectrum::from_fn(Arc::new(RadialGrid::uniform(2001, 0.0, 1.0).unwrap()), |_| 1.0).unwrap();
    broadkin::io::write_snapshot(&dir.path().join("unit.csv"), &unit).unwrap();
    let o = broadkin(&["moments", "--snapshot", "unit.csv", "--orders", "1"], dir.path());
    let m1: f64 = stdout(&o).lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((m1 - std::f64::consts::PI).abs() < 1e-5, "{m1}");
}

#[test]
fn moments_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[physics]\ncoriolis_f = 1.0\n").unwrap();
    let grid = Arc::new(RadialGrid::logarithmic(40, 1e-2, 5.0).unwrap());
    let f = RadialSpectrum::from_fn(grid, |k| (k * 1.3).sin().abs() * (-k).exp()).unwrap();
    broadkin::io::write_snapshot(&dir.path().join("s.csv"), &f).unwrap();
    let o = broadkin(&["moments", "--snapshot", "s.csv", "--orders", "0,2.5,5", "--config", "c.toml"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let params = PhysicalParams { coriolis_f: 1.0, ..PhysicalParams::default() };
    let disp = derive_dispersion(&params);
    let back = broadkin::io::read_snapshot(&dir.path().join("s.csv")).unwrap();
    for (line, order) in stdout(&o).lines().skip(1).zip([0.0, 2.5, 5.0]) {
        let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v, back.moment(order, &disp, 3).unwrap());
        assert_eq!(v, f.moment(order, &disp, 3).unwrap());
    }
}

#[test]
fn malformed_snapshot_fails() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.csv"), "k,f\n0,1\nx,2\n").unwrap();
    let o = broadkin(&["moments", "--snapshot", "s.csv", "--orders", "0"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("parse error"), "{}", stderr(&o));
}

#[test]
fn verify_catches_doubled_quadrature_weights() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[grid]\nn = 64\n[verify]\ntrials = 5\ngain_trials = 20\nholder_pairs = 3\nmc_samples = 100000\nmc_spectra = 1\nmc_nodes = 4\n";
    std::fs::write(dir.path().join("ok.toml"), cfg).unwrap();
    std::fs::write(dir.path().join("bad.toml"), format!("{cfg}quadrature_weight_scale = 2.0\n")).unwrap();

    let ok = broadkin(&["verify", "--config", "ok.toml", "--out", "ok"], dir.path());
    assert!(ok.status.success(), "{}", stdout(&ok));

    let bad = broadkin(&["verify", "--config", "bad.toml", "--out", "bad"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("FAIL  mc_oracle"), "{}", stdout(&bad));
    let (header, rows) = read_csv(&dir.path().join("bad/verify_report.csv"));
    assert_eq!(header, ["check_name", "trials", "worst_ratio", "bound_used", "passed", "seed", "skipped"]);
    let mc = rows.iter().find(|r| r[0] == "mc_oracle").unwrap();
    assert_eq!(mc[4], "false");
    let (mc_header, _) = read_csv(&dir.path().join("bad/mc_oracle.csv"));
    assert_eq!(&mc_header[..4], ["k", "deterministic", "mc_mean", "mc_stderr"]);
}

#[test]
fn verify_overrides_and_default_suite() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "").unwrap();
    let o = broadkin(&["verify", "--config", "c.toml", "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("11 of 11 checks passed"), "{}", stdout(&o));
    let (_, rows) = read_csv(&dir.path().join("out/verify_report.csv"));
    assert!(rows.iter().all(|r| r[5] == "20240601"));

    std::fs::write(dir.path().join("s.toml"), "[grid]\nn = 24\n[verify]\nmc_samples = 20000\nmc_spectra = 1\nmc_nodes = 2\ngain_trials = 5\nholder_pairs = 2\n").unwrap();
    let o = broadkin(&["verify", "--config", "s.toml", "--trials", "3", "--seed", "11", "--out", "s"], dir.path());
    let (_, rows) = read_csv(&dir.path().join("s/verify_report.csv"));
    assert!(rows.iter().all(|r| r[5] == "11"), "{}", stdout(&o));
    assert_eq!(rows.iter().find(|r| r[0] == "loss_bound").unwrap()[1], "3");
}
