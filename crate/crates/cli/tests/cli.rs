use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uavcollect"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("binary runs")
}

fn generate(dir: &Path, name: &str, seed: u64) {
    let seed = seed.to_string();
    let out = run(
        &["generate", "--sensors", "1000", "--size", "8000", "--seed", &seed, "-o", name],
        dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn report(dir: &Path, file: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(file)).unwrap()).unwrap()
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "a.json", 7);
    generate(dir.path(), "b.json", 7);
    let a = fs::read(dir.path().join("a.json")).unwrap();
    let b = fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(a, b);
    let s = uavcollect::model::load_scenario(dir.path().join("a.json")).unwrap();
    assert_eq!(s.sensors.len(), 1000);
    assert_eq!(s.region_width_m, 8000.0);
    assert_eq!(s.rng_seed, 7);
}

#[test]
fn missing_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["generate", "--size", "8000", "--seed", "1", "-o", "x.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--sensors"));
    assert!(!dir.path().join("x.json").exists());
}

#[test]
fn unknown_algorithm_lists_choices() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "s.json", 1);
    let out = run(&["plan", "--algo", "bogus", "s.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for name in ["pmtp", "ttp", "cstp"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn plan_writes_outputs_and_pmtp_beats_ttp() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "s.json", 7);
    let out = run(&["plan", "--algo", "pmtp", "s.json"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["plan", "--algo", "ttp", "s.json", "-o", "res/run"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let pmtp = report(dir.path(), "s.pmtp.report.json");
    let ttp = report(dir.path(), "res/run.ttp.report.json");
    for r in [&pmtp, &ttp] {
        assert!(r["completion_s"].as_f64().unwrap() > 0.0);
        assert!(r["completion_s"].as_f64().unwrap() >= r["lower_bound_s"].as_f64().unwrap() - 1e-6);
        let checks = r["checks"].as_array().unwrap();
        assert_eq!(checks.len(), 6);
        assert!(checks.iter().all(|c| c["passed"] == Value::Bool(true)));
    }
    assert!(pmtp["completion_s"].as_f64().unwrap() < ttp["completion_s"].as_f64().unwrap());
    assert_eq!(pmtp["uavs"], 3);

    let plan = fs::read_to_string(dir.path().join("s.pmtp.plan.csv")).unwrap();
    let mut lines = plan.lines();
    assert_eq!(lines.next().unwrap(), "step,uav,x_m,y_m,duty,hover_s,flight_s");
    assert_eq!(lines.count() % 3, 0);
    let cps = fs::read_to_string(dir.path().join("s.pmtp.cps.csv")).unwrap();
    assert_eq!(cps.lines().count() as u64, 1 + pmtp["clusters"].as_u64().unwrap());
    let members = fs::read_to_string(dir.path().join("s.pmtp.clusters.csv")).unwrap();
    assert_eq!(members.lines().count(), 1001);
}

#[test]
fn config_overrides_channel_parameters() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "s.json", 2);
    fs::write(dir.path().join("cfg.json"), r#"{"snr_th_u2b_db": 16.0}"#).unwrap();
    let out = run(&["plan", "--algo", "cstp", "s.json", "--config", "cfg.json"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path(), "s.cstp.report.json");
    let base = uavcollect::channel::coverage_radii(&Default::default(), 20.0).unwrap();
    assert!(r["radii"]["r_u2b_m"].as_f64().unwrap() < base.r_u2b_m);

    fs::write(dir.path().join("bad.json"), r#"{"beta": 1.0}"#).unwrap();
    let out = run(&["plan", "--algo", "pmtp", "s.json", "--config", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreachable_threshold_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "s.json", 3);
    fs::write(dir.path().join("cfg.json"), r#"{"snr_th_g2u_db": 80.0}"#).unwrap();
    let out = run(&["plan", "--algo", "pmtp", "s.json", "--config", "cfg.json"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
}

#[test]
fn sweep_shape_and_worker_independence() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "sweep", "--axis", "sensors", "--values", "600,800,1000,1200", "--seeds", "10", "-o", "curve.csv",
    ];
    let out = bin()
        .args(args)
        .current_dir(dir.path())
        .env("UAVCOLLECT_WORKERS", "4")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "axis_value,seed,algo,completion_s,lower_bound_s,flight_s,hover_s"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4 * 10 * 3);
    assert_eq!(rows[0][..3], ["600.0", "0", "pmtp"]);
    assert_eq!(rows[119][..3], ["1200.0", "9", "cstp"]);
    for r in &rows {
        let c: f64 = r[3].parse().unwrap();
        let lb: f64 = r[4].parse().unwrap();
        assert!(c >= lb - 1e-6);
    }

    let out = bin()
        .args(args)
        .current_dir(dir.path())
        .env("UAVCOLLECT_WORKERS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(dir.path().join("curve.csv")).unwrap(), text);
}

#[test]
fn sweep_rejects_unknown_axis() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["sweep", "--axis", "speed", "--values", "1", "--seeds", "1", "-o", "c.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("snr-g2u-db"));
}
