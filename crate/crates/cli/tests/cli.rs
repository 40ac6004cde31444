use std::process::{Command, Output};

use serde_json::Value;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lvr-lab")).args(args).env_remove("LVR_LAB_SEED").output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn fc_eval_at_the_branch_point_and_past_it() {
    let out = lab(&["fc", "eval", "--p", "2", "--z", "0.25"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schema"], "lvr-lab/1");
    assert_eq!(v["result"]["value"][0].as_f64(), Some(2.0));

    let out = lab(&["fc", "eval", "--p", "2", "--z", "0.3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cut"));

    let out = lab(&["fc", "eval", "--p", "3", "--z", "-1,0"]);
    let t = json(&out)["result"]["value"][0].as_f64().unwrap();
    assert!((t - 0.682_327_803_828_019_3).abs() < 1e-13);
}

#[test]
fn fc_numbers_csv() {
    let out = lab(&["fc", "numbers", "--p", "3", "--n-max", "10", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "p,n,value");
    assert_eq!(lines.len(), 12);
    assert_eq!(lines[3], "3,2,3");
    assert_eq!(lines[11], "3,10,1430715");
}

#[test]
fn fc_bounds_and_moments() {
    let out = lab(&["fc", "bounds", "--p", "2", "--samples", "200"]);
    assert_eq!(out.status.code(), Some(0));
    let k = json(&out)["result"]["k"].as_f64().unwrap();
    assert!(k.is_finite() && k >= 1.0);
    let out = lab(&["fc", "moments", "--n-max", "10"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["result"]["rows"][10]["catalan"], "16796");
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        &["fc", "eval", "--p", "1", "--z", "0"][..],
        &["fc", "eval", "--p", "2", "--z", "nope"],
        &["verify", "oracle", "--lambda", "0.1,0,3"],
        &["verify", "oracle", "--lambda", "0.05,135"],
        &["verify", "action", "--p", "2"],
        &["verify", "nothing"],
        &["fc", "moments", "--n-max", "21"],
    ] {
        let out = lab(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(lab(&["--help"]).status.code(), Some(0));
}

#[test]
fn oracle_point_check() {
    let out = lab(&["verify", "oracle", "--p", "2", "--N", "2", "--lambda", "0.1,0", "--no-timestamp"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v.get("timestamp_unix").is_none());
    let rec = &v["result"]["criteria"][0]["records"][0];
    assert_eq!(rec["pass"], true);
    assert!(rec["got"].as_f64().unwrap() <= 1e-6);
    let cart = lab(&["verify", "oracle", "--N", "1", "--lambda", "0.05,0.05", "--lambda-form", "cartesian"]);
    assert_eq!(json(&cart)["result"]["criteria"][0]["records"][0]["params"]["lambda"][1].as_f64(), Some(0.05));
}

#[test]
fn perturb_suite_passes() {
    let out = lab(&["verify", "perturb", "--p-max", "6"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let ids: Vec<u64> = v["result"]["criteria"].as_array().unwrap().iter().map(|c| c["id"].as_u64().unwrap()).collect();
    assert_eq!(ids, [6, 7, 8]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("3/3 criteria passed"));
}

#[test]
fn reports_are_deterministic() {
    let args = ["verify", "bkar", "--seed", "7", "--no-timestamp"];
    let a = lab(&args);
    let b = lab(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = lab(&["verify", "bkar", "--seed", "7", "--no-timestamp", "--workers", "2"]);
    let c: Value = json(&c);
    let mut a: Value = json(&a);
    a["result"]["options"]["workers"] = Value::from(2);
    assert_eq!(a, c);

    let env = Command::new(env!("CARGO_BIN_EXE_lvr-lab"))
        .args(["verify", "bkar", "--no-timestamp"])
        .env("LVR_LAB_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(env.stdout, b.stdout);
}

#[test]
fn timing_is_redacted_and_csv_has_header() {
    let out = lab(&["verify", "fc", "--no-timestamp", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("criterion,check,params,expected,got,tol,pass\n"));
    let runtime = text.lines().find(|l| l.contains("runtime seconds")).unwrap();
    assert!(runtime.contains(",null,"));

    let dir = std::env::temp_dir().join(format!("lvr-lab-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("fc.json");
    let out = lab(&["verify", "fc", "--output", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(v["pass"], true);
    assert!(v["timestamp_unix"].as_u64().unwrap() > 0);
    std::fs::remove_dir_all(&dir).unwrap();
}
