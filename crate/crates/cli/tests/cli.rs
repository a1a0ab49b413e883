use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const CONFIG: &str = r#"{"profile": "google", "d": 3, "tau_ns": [0, 1000],
    "policies": ["passive", "active"], "shots": 3000, "seed": 11}"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_latticelock"));
    c.env_remove("LATTICELOCK_THREADS");
    c
}

fn run(c: &mut Command) -> Output {
    c.output().expect("binary runs")
}

fn sweep_with_threads(dir: &Path, config: &Path, name: &str, threads: &str) -> (String, String) {
    let out = dir.join(name);
    let o = run(bin()
        .env("LATTICELOCK_THREADS", threads)
        .args(["sweep", "--config"])
        .arg(config)
        .arg("--out")
        .arg(&out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ratios = out.with_file_name(format!("{}_ratios.csv", name.trim_end_matches(".csv")));
    (fs::read_to_string(&out).unwrap(), fs::read_to_string(ratios).unwrap())
}

#[test]
fn sweep_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.json");
    fs::write(&config, CONFIG).unwrap();
    let one = sweep_with_threads(dir.path(), &config, "one.csv", "1");
    let four = sweep_with_threads(dir.path(), &config, "four.csv", "4");
    let again = sweep_with_threads(dir.path(), &config, "again.csv", "4");
    assert_eq!(one, four);
    assert_eq!(four, again);
    let lines: Vec<&str> = one.0.lines().collect();
    assert_eq!(lines[0], "d,basis,policy,tau_ns,profile,observable,shots,failures,ler,ci_low,ci_high,seed");
    assert_eq!(lines.len(), 5);
    assert_eq!(one.1.lines().count(), 3);
    assert!(!dir.path().join("one_errors.csv").exists());
}

#[test]
fn partial_failure_exits_two_and_keeps_good_rows() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.json");
    // hybrid has nothing to solve when both cycles are equal
    fs::write(
        &config,
        r#"{"profile": "google", "d": 3, "tau_ns": [500], "policies": ["passive", "hybrid"], "shots": 500}"#,
    )
    .unwrap();
    let out = dir.path().join("rows.csv");
    let o = run(bin().args(["sweep", "--config"]).arg(&config).arg("--out").arg(&out));
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 2);
    let errors = fs::read_to_string(dir.path().join("rows_errors.csv")).unwrap();
    assert!(errors.contains("hybrid"));
}

#[test]
fn bad_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    fs::write(&config, r#"{"profile": "google", "d": 3, "tau_ns": [0], "policies": ["passive"], "shots": 5, "shot": 1}"#)
        .unwrap();
    let o = run(bin().args(["sweep", "--config"]).arg(&config));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
    let o = run(bin().env("LATTICELOCK_THREADS", "many").args(["uarch", "--k", "2"]));
    assert_eq!(o.status.code(), Some(1));
}

fn json_stdout(o: &Output) -> Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

#[test]
fn policy_solve_reports_both_solvers() {
    let v = json_stdout(&run(bin().args(["policy", "solve", "--t-p", "1000", "--t-p2", "1325", "--tau", "1000"])));
    assert_eq!(v["extra_rounds"]["m"], 52);
    assert_eq!(v["hybrid"]["z"], 4);
    assert_eq!(v["hybrid"]["residual_idle"], 300);
}

#[test]
fn simulate_prints_one_report_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sim.json");
    fs::write(&config, CONFIG).unwrap();
    let v = json_stdout(&run(bin().args(["simulate", "--shots", "200", "--config"]).arg(&config)));
    let points = v.as_array().unwrap();
    assert_eq!(points.len(), 4);
    assert!(points.iter().all(|p| p["report"].is_object()));
}

#[test]
fn case_studies_and_benchmarks_run() {
    let dir = tempfile::tempdir().unwrap();
    let q = run(bin().args(["case", "qldpc", "--t-surface", "1100", "--t-qldpc", "1226", "--max-rounds", "10"]));
    assert!(q.status.success());
    assert_eq!(String::from_utf8_lossy(&q.stdout).lines().count(), 12);

    let hist = dir.path().join("hist.csv");
    let v = json_stdout(&run(bin()
        .args(["case", "cultivation", "--samples", "2000", "--seed", "3", "--out"])
        .arg(&hist)));
    assert!(v["mean_ns"].as_f64().unwrap() < 1100.0);
    assert!(fs::read_to_string(&hist).unwrap().lines().count() > 1);

    let l = run(bin().args(["latency", "--d", "5", "--hit-passive", "0.5", "--hit-active", "0.9"]));
    assert!(l.status.success());
    let text = String::from_utf8_lossy(&l.stdout).into_owned();
    let mut lines = text.lines();
    let col = lines.next().unwrap().split(',').position(|h| h == "speedup").unwrap();
    let speedup: f64 = lines.next().unwrap().split(',').nth(col).unwrap().parse().unwrap();
    assert!(speedup > 1.0);

    let u = run(bin().args(["uarch", "--k", "2,4", "--repetitions", "5"]));
    assert!(u.status.success());
    assert_eq!(String::from_utf8_lossy(&u.stdout).lines().count(), 3);
}
