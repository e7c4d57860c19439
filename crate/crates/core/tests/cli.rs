use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn tonelli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tonelli"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report(dir: &Path, command: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{command}.json"))).unwrap()).unwrap()
}

#[test]
fn alpha_table_for_free_motion() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tonelli(tmp.path(), &["alpha", "--system", "free", "--dim", "1", "--c-grid", "-1:1:0.5", "--N", "256"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("alpha.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("c1,alpha"));
    let alphas: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    for (a, want) in alphas.iter().zip([0.5, 0.125, 0.0, 0.125, 0.5]) {
        assert!((a - want).abs() <= 1e-2, "{alphas:?}");
    }
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("alpha[c=")).count(), 5);
}

#[test]
fn verdicts_set_the_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tonelli(tmp.path(), &["check", "--system", "pendulum", "--integrals", "H"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let out = stdout(&o);
    let verdict = out.lines().find(|l| l.starts_with("verdict ")).unwrap();
    assert!(verdict.contains("pass=FAIL") && verdict.contains("independence_rank"), "{verdict}");

    let o = tonelli(
        tmp.path(),
        &["check", "--system", "free", "--dim", "2", "--integrals", "p1,p2", "--N", "16", "--h", "0.25", "--vmax", "1", "--c", "0,0"],
    );
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).lines().any(|l| l == "verdict pass=PASS failing="), "{}", stdout(&o));
}

#[test]
fn configuration_errors_exit_two_and_name_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tonelli(tmp.path(), &["alpha", "--system", "rotor"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("system"), "{}", stderr(&o));

    fs::write(tmp.path().join("bad.cfg"), "system = free\nwidth = 3\n").unwrap();
    let o = tonelli(tmp.path(), &["--config", "bad.cfg", "alpha"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("width"), "{}", stderr(&o));

    let o = tonelli(tmp.path(), &["alpha", "--set", "n=many"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains('n'), "{}", stderr(&o));

    let o = tonelli(tmp.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_three() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tonelli(tmp.path(), &["alpha", "--system", "pendulum", "--c", "2", "--N", "64", "--max-iter", "3"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error: alpha:"), "{}", stderr(&o));
}

#[test]
fn file_keys_are_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("run.cfg"), "# free particle\nsystem = free\ndim = 1\nN = 64\nc = 0.5\nseed = 9\n").unwrap();
    let o = tonelli(tmp.path(), &["--config", "run.cfg", "alpha", "--c", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(tmp.path(), "alpha");
    assert_eq!(r["config"]["c"], "1");
    assert_eq!(r["config"]["n"], "64");
    assert_eq!(r["seed"], 9);
    let alpha = r["results"]["rows"][0]["alpha"].as_f64().unwrap();
    assert!((alpha - 0.5).abs() <= 1e-2, "{alpha}");
}

#[test]
fn json_summaries_parse_line_by_line() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tonelli(tmp.path(), &["--json", "rigidbody", "--t", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let lines: Vec<Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(lines.iter().all(|v| v["check"].is_string()));
    assert!(lines.iter().any(|v| v["check"] == "report"));
}

#[test]
fn reports_carry_hash_seed_and_tolerances() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        vec!["bracket", "--system", "pendulum", "--f", "H", "--g", "sin1", "--seed", "3"],
        vec!["flow", "--system", "pendulum", "--x0", "0.25", "--p0", "0.1"],
        vec!["weakkam", "--system", "pendulum", "--c", "2", "--N", "64"],
        vec!["aubry", "--system", "pendulum", "--c", "0", "--N", "64"],
        vec!["beta", "--system", "free", "--c-grid", "-2:2:0.25", "--h-grid", "-0.8:0.8:0.4", "--N", "64"],
        vec!["rigidbody", "--t", "1"],
    ] {
        let o = tonelli(tmp.path(), &args);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
        let r = report(tmp.path(), args[0]);
        assert_eq!(r["config_hash"].as_str().unwrap().len(), 64, "{args:?}");
        assert!(r["seed"].is_u64(), "{args:?}");
        assert!(r["tolerances"].is_object(), "{args:?}");
        let summary = stdout(&o);
        assert!(summary.contains(r["config_hash"].as_str().unwrap()), "{args:?}");
    }
}

#[test]
fn outputs_do_not_depend_on_the_worker_count() {
    let runs: Vec<_> = ["1", "4"]
        .iter()
        .map(|workers| {
            let tmp = tempfile::tempdir().unwrap();
            let args = ["check", "--system", "pendulum", "--integrals", "H", "--N", "64", "--seed", "5"];
            let o = Command::new(env!("CARGO_BIN_EXE_tonelli"))
                .current_dir(tmp.path())
                .env("TONELLI_WORKERS", workers)
                .args(args)
                .output()
                .unwrap();
            assert_eq!(o.status.code(), Some(1));
            let o2 = Command::new(env!("CARGO_BIN_EXE_tonelli"))
                .current_dir(tmp.path())
                .env("TONELLI_WORKERS", workers)
                .args(["alpha", "--system", "mech2d", "--eps", "0.1", "--c-grid", "0,0; 0.25,0; 0.5,0.25", "--N", "16"])
                .output()
                .unwrap();
            assert_eq!(o2.status.code(), Some(0), "{}", stderr(&o2));
            let files: Vec<Vec<u8>> = ["check.json", "alpha.csv", "alpha.json"]
                .iter()
                .map(|f| fs::read(tmp.path().join(f)).unwrap())
                .collect();
            (o.stdout, o2.stdout, files)
        })
        .collect();
    assert!(runs[0] == runs[1]);
}

#[test]
fn bad_worker_count_is_a_configuration_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_tonelli"))
        .current_dir(tmp.path())
        .env("TONELLI_WORKERS", "lots")
        .args(["keys"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("TONELLI_WORKERS"));
}
