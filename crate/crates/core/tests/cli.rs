use std::process::{Command, Output};

use serde_json::Value;

fn supersle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_supersle"))
        .args(args)
        .env_remove("SUPER_SLE_SEED")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn verify_passes_and_reports_parameters() {
    let out = supersle(&["verify", "--kappa", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["result"]["status"], "PASS");
    assert_eq!(v["result"]["ns"]["c"], "0");
    assert_eq!(v["result"]["ns"]["delta"], "0");
    assert_eq!(v["config"]["kappa"], "2");

    let third = stdout_json(&supersle(&["verify", "--kappa", "8/3"]));
    assert_eq!(third["result"]["virasoro"]["c"], "0");

    let one = stdout_json(&supersle(&["verify", "--kappa", "1"]));
    assert_eq!((one["result"]["ns"]["c"].as_str(), one["result"]["ns"]["delta"].as_str()), (Some("3/2"), Some("1/2")));
    let four = stdout_json(&supersle(&["verify", "--kappa", "4"]));
    assert_eq!(four["result"]["status"], "PASS");
    assert_eq!((four["result"]["virasoro"]["c"].as_str(), four["result"]["virasoro"]["delta"].as_str()), (Some("1"), Some("1/4")));
}

#[test]
fn bad_kappa_is_a_usage_error() {
    for k in ["0", "-1", "abc", "1/0"] {
        assert_eq!(supersle(&["verify", "--kappa", k]).status.code(), Some(2), "κ = {k}");
    }
}

#[test]
fn sde_csv_starts_at_initial_point() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("path.csv");
    let p = path.to_str().unwrap();
    let out = supersle(&["sde", "--spec", "32", "--T", "0.01", "--dt", "1e-3", "--seed", "5", "--out", p]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config: "));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&header[..4], &["t", "status", "z_1_re", "z_1_im"]);
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&first[..4], &["0", "ok", "2", "0"]);
    let theta3 = header.iter().position(|h| *h == "theta_p3_re").unwrap();
    assert_eq!(first[theta3], "1");
    assert_eq!(lines.count(), 10);

    let again = dir.path().join("again.csv");
    supersle(&["sde", "--spec", "32", "--T", "0.01", "--dt", "1e-3", "--seed", "5", "--out", again.to_str().unwrap()]);
    assert_eq!(std::fs::read_to_string(&again).unwrap().lines().skip(1).collect::<Vec<_>>(), text.lines().skip(1).collect::<Vec<_>>());
}

#[test]
fn seed_from_environment() {
    let run = |env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_supersle"));
        cmd.args(["sde", "--spec", "32alt", "--T", "0.01", "--dt", "1e-3"]).env_remove("SUPER_SLE_SEED");
        if let Some(s) = env {
            cmd.env("SUPER_SLE_SEED", s);
        }
        cmd.output().unwrap().stdout
    };
    let with_env = String::from_utf8(run(Some("9"))).unwrap();
    assert!(with_env.contains("\"seed\":9"));
    let flag = supersle(&["sde", "--spec", "32alt", "--T", "0.01", "--dt", "1e-3", "--seed", "9"]).stdout;
    assert_eq!(with_env.as_bytes(), flag.as_slice());
    assert_ne!(run(None), flag);
}

#[test]
fn grid_mismatch_and_bad_spec_rejected() {
    assert_eq!(supersle(&["sde", "--dt", "0.3", "--T", "1", "--steps", "3"]).status.code(), Some(2));
    assert_eq!(supersle(&["sde", "--spec", "99"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let arg = format!("file:{}", bad.display());
    assert_eq!(supersle(&["sde", "--spec", &arg]).status.code(), Some(2));
    assert_eq!(supersle(&["martingale", "--paths", "0"]).status.code(), Some(2));
    assert_eq!(supersle(&["trace", "--grid", "0"]).status.code(), Some(2));
}

#[test]
fn spec_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("walk.json");
    std::fs::write(
        &file,
        r#"{"generators": 2, "b": 1,
            "alpha0": {"-2": {"eta": "-1*p0"}},
            "beta": [{"-1": {"y": "2", "eta": "p0"}}],
            "init": {"z": "3", "theta": "p1"}}"#,
    )
    .unwrap();
    let arg = format!("file:{}", file.display());
    let out = supersle(&["sde", "--spec", &arg, "--T", "0.01", "--dt", "1e-3", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    let path = v["result"]["path"].as_array().unwrap();
    assert_eq!(path.len(), 11);
    assert_eq!(path[0]["t"], 0.0);

    let wrong_parity = dir.path().join("parity.json");
    std::fs::write(&wrong_parity, r#"{"generators": 2, "beta": [{"-1": {"eta": "p0p1"}}]}"#).unwrap();
    let arg = format!("file:{}", wrong_parity.display());
    assert_eq!(supersle(&["sde", "--spec", &arg]).status.code(), Some(2));
}

#[test]
fn convergence_json_decreases() {
    let out = supersle(&["sde", "--spec", "32alt", "--convergence", "--paths", "20", "--T", "0.5", "--dt", "1e-3", "--kappa", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["result"]["strictly_decreasing"], true);
    assert_eq!(v["result"]["study"]["dts"].as_array().unwrap().len(), 3);
}

#[test]
fn martingale_expectations_set_exit_code() {
    let base = ["martingale", "--paths", "400", "--T", "0.1", "--dt", "1e-3", "--seed", "3"];
    let ok = supersle(&[&base[..], &["--expect-martingale"]].concat());
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let v = stdout_json(&ok);
    assert_eq!(v["config"]["paths"], 400);
    assert_eq!(v["result"]["all_within_3se"], true);

    let drift = supersle(&[&base[..], &["--delta-shift", "1/2", "--expect-drift"]].concat());
    assert_eq!(drift.status.code(), Some(0));
    let wrong = supersle(&[&base[..], &["--delta-shift", "0.5", "--expect-martingale"]].concat());
    assert_eq!(wrong.status.code(), Some(1));
}

#[test]
fn threads_do_not_change_results() {
    let base = ["martingale", "--paths", "300", "--T", "0.05", "--dt", "1e-3", "--seed", "4"];
    let one = supersle(&[&base[..], &["--threads", "1"]].concat()).stdout;
    let three = supersle(&[&base[..], &["--threads", "3"]].concat()).stdout;
    let strip = |b: &[u8]| {
        let mut v: Value = serde_json::from_slice(b).unwrap();
        v["config"] = Value::Null;
        v
    };
    assert_eq!(strip(&one), strip(&three));
}

#[test]
fn trace_writes_hull_and_polyline() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("run");
    let out = supersle(&["trace", "--mode", "supertrace", "--kappa", "2", "--T", "1", "--seed", "1", "--grid", "41", "--out", base.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["result"]["trace_start"], serde_json::json!([0.0, 0.0]));
    let poly = std::fs::read_to_string(dir.path().join("run_trace.csv")).unwrap();
    assert_eq!(poly.lines().nth(1), Some("t,re,im"));
    assert_eq!(poly.lines().nth(2), Some("0,0,0"));
    let hull = std::fs::read_to_string(dir.path().join("run_hull.csv")).unwrap();
    assert_eq!(hull.lines().filter(|l| !l.starts_with('#')).count(), 41);

    let pgm = dir.path().join("img");
    let out = supersle(&["trace", "--mode", "loewner", "--kappa", "0", "--T", "0.5", "--grid", "21", "--format", "json", "--out", pgm.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let img = std::fs::read_to_string(dir.path().join("img_hull.pgm")).unwrap();
    assert!(img.starts_with("P2"));
    assert!(dir.path().join("img_points.csv").exists());
}

#[test]
fn help_documents_csv_columns() {
    let out = supersle(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for word in ["verify", "sde", "martingale", "trace", "CSV columns", "SUPER_SLE_SEED"] {
        assert!(text.contains(word), "missing {word}");
    }
}
