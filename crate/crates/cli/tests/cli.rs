use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clt-spectra"))
        .args(args)
        .env("CLT_SPECTRA_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid json")
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["theta", "--help"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["theta"]).status.code(), Some(1));
    assert_eq!(
        run(&["theta", "--spec", "gaussian:sigma=1", "--format", "xml"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn computation_errors_exit_one() {
    let bad_spec = run(&["theta", "--spec", "gamma:beta=-1"]);
    assert_eq!(bad_spec.status.code(), Some(1));
    assert!(!bad_spec.stderr.is_empty());
    let continuous_exact = run(&["theta", "--spec", "gaussian:sigma=1", "--exact"]);
    assert_eq!(continuous_exact.status.code(), Some(1));
}

#[test]
fn two_point_theta_is_infinite() {
    let out = run(&["theta", "--spec", "discrete:-1=0.5,1=0.5", "--n", "2", "--exact"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert_eq!(json(&out)["theta"]["theta"], "inf");
}

#[test]
fn gaussian_theta2_is_one() {
    let out = run(&["theta", "--spec", "gaussian:sigma=1", "--nodes", "256"]);
    let t = json(&out)["theta"]["theta"].as_f64().unwrap();
    assert!((t - 1.0).abs() < 1e-6, "{t}");
}

#[test]
fn exact_uniform_spectrum() {
    let out = run(&[
        "spectrum",
        "--spec",
        "discrete:0=0.3333333333333333,1=0.3333333333333333,2=0.3333333333333334",
        "--exact",
    ]);
    let ev = json(&out)["spectrum"]["eigenvalues"].clone();
    let got: Vec<f64> = ev
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    for (g, w) in got.iter().zip([1.0, 0.5, 1.0 / 6.0]) {
        assert!((g - w).abs() < 1e-12, "{got:?}");
    }
}

#[test]
fn density_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gamma.txt");
    let path_s = path.to_str().unwrap();
    let w = run(&[
        "density",
        "--spec",
        "gamma:beta=4",
        "--format",
        "csv",
        "--output",
        path_s,
    ]);
    assert!(w.status.success(), "{}", String::from_utf8_lossy(&w.stderr));
    assert!(w.stdout.is_empty());

    let direct = json(&run(&["density", "--spec", "gamma:beta=4"]));
    let spec = format!("file:{path_s}");
    let reread = json(&run(&["density", "--spec", &spec]));
    let a = direct["fisher"]["jst"].as_f64().unwrap();
    let b = reread["fisher"]["jst"].as_f64().unwrap();
    assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    assert!((a - 1.0).abs() < 1e-2);
}

#[test]
fn bounds_csv_header_and_rows() {
    let out = run(&[
        "bounds",
        "--spec",
        "gamma:beta=4",
        "--n",
        "3",
        "--nodes",
        "512",
        "--format",
        "csv",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("name,n,m,lhs,rhs,slack,pass"));
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() >= 4);
    assert!(rows.iter().all(|r| r.ends_with(",true")), "{text}");
}

#[test]
fn exact_bounds_json_schema() {
    let v = json(&run(&[
        "bounds",
        "--spec",
        "discrete:0=0.2,1=0.5,2=0.3",
        "--n",
        "3",
        "--exact",
    ]));
    assert_eq!(v["schema"], "clt-spectra/1");
    assert!(v["reports"].as_array().unwrap().iter().all(|r| r["pass"] == true));
}

#[test]
fn output_is_deterministic() {
    let args = [
        "monotonicity",
        "--spec",
        "gamma:beta=4",
        "--n-max",
        "3",
        "--nodes",
        "256",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn efron_stein_two_level_holds() {
    let v = json(&run(&[
        "efron-stein",
        "--spec",
        "discrete:0=0.3,1=0.7",
        "--k",
        "4",
        "--h",
        "0,-1,0.5,1",
        "--l",
        "2",
    ]));
    assert_eq!(v["two_level"]["pass"], true);
    let total = v["decomposition"]["total_variance"].as_f64().unwrap();
    assert!(total > 0.0);
}

#[test]
fn verify_all_passes_and_is_reproducible() {
    let args = [
        "verify-all",
        "--spec",
        "gaussian:sigma=1",
        "--n-max",
        "3",
        "--nodes",
        "256",
        "--seed",
        "7",
    ];
    let a = run(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["all_pass"], true);
    assert_eq!(v["negative_control"]["pass"], false);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
}
