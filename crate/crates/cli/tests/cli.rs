use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_varexp"))
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Files {
    one: PathBuf,
    zero: PathBuf,
    one_halves: PathBuf,
    p2: PathBuf,
    p24: PathBuf,
}

fn files() -> Files {
    Files {
        one: scratch("one.json", r#"{"partition":[0.0,1.0],"values":[1.0]}"#),
        zero: scratch("zero.json", r#"{"partition":[0.0,0.5,1.0],"values":[0.0,0.0]}"#),
        one_halves: scratch("one_halves.json", r#"{"partition":[0.0,0.5,1.0],"values":[1.0,1.0]}"#),
        p2: scratch("p2.json", r#"{"partition":[0.0,1.0],"values":[2.0]}"#),
        p24: scratch("p24.json", r#"{"partition":[0.0,0.5,1.0],"values":[2.0,4.0]}"#),
    }
}

#[test]
fn norm_reports_value_and_convergence() {
    let f = files();
    let out = run(&["norm", "--f", path_str(&f.one), "--p", path_str(&f.p2)]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert!((v["norm"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert_eq!(v["converged"], Value::Bool(true));

    let v = json_of(&run(&["norm", "--f", path_str(&f.one), "--p", path_str(&f.p24)]));
    assert!((v["norm"].as_f64().unwrap() - 0.930_604_859_1).abs() < 1e-10);
}

#[test]
fn validation_errors_exit_2() {
    let f = files();
    let bad = scratch("bad.json", "{\"partition\": [0.0, 1.0], ");
    let out = run(&["norm", "--f", path_str(&bad), "--p", path_str(&f.p2)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid input"));

    let low = scratch("low.json", r#"{"partition":[0.0,1.0],"values":[0.5]}"#);
    assert_eq!(run(&["norm", "--f", path_str(&f.one), "--p", path_str(&low)]).status.code(), Some(2));
    assert_eq!(run(&["norm", "--f", "/nonexistent.json", "--p", path_str(&f.p2)]).status.code(), Some(2));
    assert_eq!(run(&["norm", "--tol", "-1", "--f", path_str(&f.one), "--p", path_str(&f.p2)]).status.code(), Some(2));
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
}

#[test]
fn non_convergence_exits_3() {
    let f = files();
    let out = run(&["norm", "--tol", "1e-300", "--f", path_str(&f.one), "--p", path_str(&f.p2)]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json_of(&out)["converged"], Value::Bool(false));
}

#[test]
fn curve_rows() {
    let f = files();
    let out = run(&["curve", "--f", path_str(&f.one_halves), "--p", path_str(&f.p2)]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<f64>> =
        text.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(text.lines().next(), Some("t,phi"));
    let expected = [(0.0, 0.0), (0.5, std::f64::consts::FRAC_1_SQRT_2), (1.0, 1.0)];
    for (row, (t, phi)) in rows.iter().zip(expected) {
        assert_eq!(row[0], t);
        assert!((row[1] - phi).abs() < 1e-10);
    }

    let text = String::from_utf8(run(&["curve", "--f", path_str(&f.zero), "--p", path_str(&f.p2)]).stdout).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(",0.0")));

    let text = String::from_utf8(run(&["curve", "--f", path_str(&f.one), "--p", path_str(&f.p24)]).stdout).unwrap();
    let last: f64 = text.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((last - 0.930_604_859_1).abs() < 1e-10);
}

#[test]
fn scalar_commands() {
    let f = files();
    let v = json_of(&run(&["nakano", "--f", path_str(&f.one), "--p", path_str(&f.p2)]));
    assert!((v["lambda"].as_f64().unwrap() - 0.5f64.sqrt()).abs() < 1e-11);
    let v = json_of(&run(&["nakano", "--kind", "plain", "--f", path_str(&f.one), "--p", path_str(&f.p2)]));
    assert!((v["lambda"].as_f64().unwrap() - 1.0).abs() < 1e-11);
    assert_eq!(
        run(&["nakano", "--kind", "other", "--f", path_str(&f.one), "--p", path_str(&f.p2)]).status.code(),
        Some(2)
    );

    let v = json_of(&run(&["holder", "--f", path_str(&f.one), "--g", path_str(&f.one), "--p", path_str(&f.p2)]));
    assert!(v["slack"].as_f64().unwrap().abs() < 1e-10);

    let v = json_of(&run(&["pair", "--x", path_str(&f.one), "--p", path_str(&f.p24)]));
    assert!((v["pointwise"]["pairing"].as_f64().unwrap() - 1.0).abs() < 1e-15);
    assert!(v["witness"]["defect"].as_f64().unwrap() < 1e-10);

    let seq = scratch("seq.json", r#"{"values":[1,1,1],"exponents":[1,2],"orientation":"right"}"#);
    let v = json_of(&run(&["seqnorm", "--input", path_str(&seq)]));
    assert!((v["norm"].as_f64().unwrap() - (1.0 + 2f64.sqrt())).abs() < 1e-12);
    let seq = scratch("seq_left.json", r#"{"values":[3,4],"exponents":[2]}"#);
    let v = json_of(&run(&["seqnorm", "--input", path_str(&seq)]));
    assert_eq!(v["norm"].as_f64().unwrap(), 5.0);

    let m = scratch("m.json", "[[1, 0], [0, 1]]");
    let v = json_of(&run(&["mixed", "--matrix", path_str(&m), "--p", "1", "--r", "2"]));
    assert!((v["norm"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-15);
    assert!(v["transpose"]["slack"].as_f64().unwrap() >= 0.0);
    let neg = scratch("neg.json", "[[1, -1]]");
    assert_eq!(run(&["mixed", "--matrix", path_str(&neg), "--p", "1", "--r", "2"]).status.code(), Some(2));

    let v = json_of(&run(&["variation", "--g-prime", path_str(&f.one), "--p", path_str(&f.p2)]));
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((v["oracle_value"].as_f64().unwrap() - 1.0).abs() < 1e-10);

    let v = json_of(&run(&["extnorm", "--f", path_str(&f.one), "--p", path_str(&f.p24)]));
    assert!((v["value"].as_f64().unwrap() - 0.930_604_859_1).abs() < 1e-10);

    let w = scratch("w2.json", r#"{"partition":[0.0,1.0],"values":[2.0]}"#);
    let v = json_of(&run(&["weighted", "--f", path_str(&f.one), "--p", path_str(&f.p2), "--w", path_str(&w)]));
    assert!((v["weighted_norm"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-10);
    assert!(v["isometry"]["defect"].as_f64().unwrap() < 1e-10);
}

#[test]
fn embed_demo_reports_pieces_and_defect() {
    let out = run(&["embed-demo", "--grid", "512"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["pieces"].as_array().unwrap().len(), 1);
    assert!(v["report"]["defect"].as_f64().unwrap() < 1e-6);
    assert!(v["report"]["max_residual"].as_f64().unwrap() <= 1e-10);
    assert_eq!(out.stdout, run(&["embed-demo", "--grid", "512"]).stdout);
    assert_eq!(run(&["embed-demo", "--exponent", "cubic"]).status.code(), Some(2));
}

#[test]
fn verify_suites() {
    let out = run(&["verify", "--suite", "holder", "--seed", "11", "--cases", "1000"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["cases"], 1000);
    assert!(v["failures"].as_array().unwrap().is_empty());

    let v = json_of(&run(&["verify", "--suite", "nakano-band", "--seed", "11", "--cases", "300"]));
    let ratio = &v["stats"]["nakano-band.ratio"];
    assert!(ratio["min"].as_f64().unwrap() >= 0.5 - 1e-9 && ratio["max"].as_f64().unwrap() <= 2.0 + 1e-9);

    assert_eq!(run(&["verify", "--suite", "unknown"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--cases", "0"]).status.code(), Some(2));
}

#[test]
fn verify_output_is_byte_identical() {
    let args = ["verify", "--suite", "all", "--seed", "5", "--cases", "60"];
    let a = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, run(&args).stdout);
    assert_ne!(a.stdout, run(&["verify", "--suite", "all", "--seed", "6", "--cases", "60"]).stdout);
}

#[test]
fn failures_replay() {
    // a loose ladder tolerance makes the tighter property checks fail
    let out = run(&["verify", "--suite", "pairing", "--tol", "1e-3", "--seed", "2", "--cases", "40"]);
    assert_eq!(out.status.code(), Some(1));
    let report = json_of(&out);
    let failures = report["failures"].as_array().unwrap().len();
    assert!(failures > 0);
    let saved = scratch("report.json", &String::from_utf8(out.stdout).unwrap());

    let again = run(&["verify", "--tol", "1e-3", "--replay", path_str(&saved)]);
    assert_eq!(again.status.code(), Some(1));
    let v = json_of(&again);
    assert_eq!(v["replayed"], failures);
    assert_eq!(v["reproduced"], failures);

    let fixed = run(&["verify", "--replay", path_str(&saved)]);
    assert_eq!(fixed.status.code(), Some(0));
    assert_eq!(json_of(&fixed)["reproduced"], 0);

    let f = files();
    let misuse = run(&["norm", "--replay", path_str(&saved), "--f", path_str(&f.one), "--p", path_str(&f.p2)]);
    assert_eq!(misuse.status.code(), Some(2));
}
