use std::fs;
use std::process::{Command, Output};

use aoi_tandem::config::{load_config, table2};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aoi-tandem"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env("AOI_TANDEM_THREADS", "1").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn preset_round_trips_through_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t2.json");
    let o = run(&["preset", "--preset", "table2", "--lambda-b", "0.07", "--out", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cfg = load_config(&path).unwrap();
    assert_eq!(cfg, table2(5e6, 0.07).unwrap());
    let again = run(&["preset", "--config", path.to_str().unwrap()]);
    assert_eq!(stdout(&again), fs::read_to_string(&path).unwrap());
}

#[test]
fn analytic_rows_ordered_by_priority() {
    let o = run(&["analytic", "--preset", "table2", "--lambda-b", "0.1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sensor,lambda,inter_arrival,processing_service,processing_wait,transmission_service,transmission_wait,total"
    );
    let totals: Vec<f64> = lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(totals.len(), 3);
    assert!(totals[0] <= totals[1] && totals[1] <= totals[2]);
}

#[test]
fn infeasible_rates_exit_two_naming_the_constraint() {
    let o = run(&["analytic", "--preset", "table2", "--rates", "0.5,0.2,0.1"]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("processing-stage stability constraint"), "{msg}");
    assert!(msg.contains("excess"), "{msg}");
}

#[test]
fn malformed_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\"sensors\": []}").unwrap();
    let o = run(&["analytic", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["analytic", "--config", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn single_sensor_reduces_to_md1() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.json");
    // 1 s processing; 1e-12 Mbit processed keeps transmission negligible
    fs::write(
        &path,
        r#"{"sensors":[{"lambda":0.5,"raw_mbits":5,"processed_mbits":1e-12,"cycles_per_bit":1}],
            "processor":{"cpu_hz":5e6},
            "channel":{"power_mw":100,"bandwidth_hz":1e5,"distance_m":300,"alpha":3,"noise_dbm_hz":-174}}"#,
    )
    .unwrap();
    let o = run(&["analytic", "--config", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(row.len(), 8);
    assert!((row[4] - 0.5).abs() < 1e-9, "processing wait {}", row[4]);
}

#[test]
fn empty_validation_grid_gives_header_only() {
    let o = run(&["validate", "--preset", "table2", "--sweep", "lambda_b:0.02:0.1:0", "--seeds", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn validation_flags_infeasible_points() {
    let o = run(&[
        "validate", "--preset", "table2", "--sweep", "lambda_b:0.05:0.5:2", "--seeds", "1", "--packets", "2000",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows[..3].iter().all(|r| r.ends_with("true,false")));
    assert!(rows[3..].iter().all(|r| r.contains("inf") && r.ends_with("false,false")));
}

#[test]
fn sweep_over_cpu_speed() {
    let o = run(&["sweep", "--preset", "table2", "--sweep", "cpu_hz:5e6:25e6:3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 1 + 9);
    let bad = run(&["sweep", "--preset", "table2", "--sweep", "bogus:1:2:3"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn optimize_writes_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("opt");
    let o = run(&[
        "optimize", "--preset", "sec5c", "--sensors", "3", "--seeds", "4", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["trace_seed_4.csv", "gap_runs.csv", "ppt.csv", "summary.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let traces = fs::read_dir(&out).unwrap().filter(|e| {
        e.as_ref().unwrap().file_name().to_string_lossy().starts_with("trace_")
    });
    assert_eq!(traces.count(), 1);
    let ppt = fs::read_to_string(out.join("ppt.csv")).unwrap();
    assert_eq!(ppt.lines().count(), 5);
}

#[test]
fn simulate_is_reproducible() {
    let args = ["simulate", "--preset", "table2", "--lambda-b", "0.05", "--seed", "3", "--packets", "5000"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
}
