use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn lab(args: &[&str], cfg: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loewner-lab"))
        .args(args)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).expect("stderr is one JSON object")
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn trace_of_zero_driver_ends_near_2i() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "trace.json",
        r#"{"kind": "trace", "params": {"driver": {"type": "zero"}, "steps": 10000}}"#,
    );
    let out = dir.path().join("out");
    let o = lab(&["trace"], &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&out.join("curve.csv"));
    assert_eq!(rows[0], ["t", "re", "im"]);
    assert_eq!(rows.len(), 10_002);
    let last = rows.last().unwrap();
    let (re, im): (f64, f64) = (last[1].parse().unwrap(), last[2].parse().unwrap());
    assert!(re.abs() <= 1e-3 && (im - 2.0).abs() <= 1e-3);
    assert_eq!(read_csv(&out.join("driver.csv"))[0], ["t", "lambda"]);
}

#[test]
fn malformed_json_exits_1_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", r#"{"kind": "trace", "params": {"#);
    let out = dir.path().join("out");
    let o = lab(&["trace"], &cfg, &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
    let err = stderr_json(&o);
    assert!(err["error"].is_string() && err["message"].is_string(), "{err}");
}

#[test]
fn validation_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("unknown field", "trace", r#"{"kind": "trace", "params": {"driver": {"type": "zero"}, "stepz": 10}}"#),
        ("kind mismatch", "energy", r#"{"kind": "trace", "params": {"driver": {"type": "zero"}}}"#),
        (
            "tube without 0 < delta <= 1",
            "mc",
            r#"{"kind": "mc", "params": {"task": "event", "event": {"type": "oscillation", "delta": 2.0, "r": 1.0},
                "kappa": 1.0, "replicas": 10}}"#,
        ),
        (
            "unsorted kappas",
            "ldp-slope",
            r#"{"kind": "ldp-slope", "params": {"event": {"type": "driver-sup", "level": 1.0},
                "kappas": [0.1, 0.2], "replicas": 10}}"#,
        ),
    ];
    for (i, (what, kind, text)) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("c{i}.json"), text);
        let out = dir.path().join(format!("out{i}"));
        let o = lab(&[kind], &cfg, &out);
        assert_eq!(o.status.code(), Some(1), "{what}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!out.exists(), "{what}");
        stderr_json(&o);
    }
}

#[test]
fn infeasible_optimization_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    // a disk covering the start of every curve cannot be avoided
    let cfg = write_config(
        dir.path(),
        "opt.json",
        r#"{"kind": "optimize", "params": {"constraint": {"type": "avoid-disk", "center": [0.0, 0.0], "radius": 3.0},
            "m": 4, "assert_feasible": true, "options": {"rounds": 2, "max_inner": 20, "perturbations": 0}}}"#,
    );
    let out = dir.path().join("out");
    let o = lab(&["optimize"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn usage_errors_and_help() {
    let bin = env!("CARGO_BIN_EXE_loewner-lab");
    let o = Command::new(bin).arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    stderr_json(&o);
    let o = Command::new(bin).arg("--help").output().unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("ldp-slope"));
}

#[test]
fn manifest_lists_every_file_with_hash() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"kind": "mc", "seed": 3, "params": {"task": "chi-square", "kappas": [1.0, 4.0], "m": 5, "replicas": 500}}"#;
    let cfg = write_config(dir.path(), "mc.json", text);
    let out = dir.path().join("out");
    let o = lab(&["mc", "--seed", "9"], &cfg, &out);
    assert!(o.status.success());
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["kind"], "mc");
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["config_sha256"], hex::encode(Sha256::digest(text.as_bytes())));
    assert!(manifest["version"].is_string() && manifest["created_unix"].is_u64());
    let mut listed: Vec<String> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| {
            let name = f["name"].as_str().unwrap().to_string();
            let bytes = std::fs::read(out.join(&name)).unwrap();
            assert_eq!(f["sha256"], hex::encode(Sha256::digest(&bytes)));
            name
        })
        .collect();
    listed.push("manifest.json".into());
    listed.sort();
    let mut present: Vec<String> =
        std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    present.sort();
    assert_eq!(listed, present);
    assert_eq!(present, ["chi_square.csv", "chi_square_ks.json", "manifest.json"]);
}

#[test]
fn schilder_ldp_slope_has_one_row_per_kappa() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "ldp.json",
        r#"{"kind": "ldp-slope", "seed": 1, "params": {"event": {"type": "driver-sup", "level": 1.0},
            "kappas": [0.4, 0.2, 0.1], "replicas": 20000, "steps": 256}}"#,
    );
    let out = dir.path().join("out");
    assert!(lab(&["ldp-slope"], &cfg, &out).status.success());
    let rows = read_csv(&out.join("ldp.csv"));
    assert_eq!(rows[0].join(","), loewner_lab::montecarlo::LDP_HEADER);
    assert_eq!(rows.len(), 4);
    let kappas: Vec<&str> = rows[1..].iter().map(|r| r[1].as_str()).collect();
    assert_eq!(kappas, ["0.4", "0.2", "0.1"]);
    for r in &rows[1..] {
        assert_eq!(r[0], "driver-sup:a=1");
        let klp: f64 = r[6].parse().unwrap();
        assert!(klp < 0.0 && klp > -1.0);
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "mc.json",
        r#"{"kind": "mc", "seed": 77, "params": {"task": "moment", "kappas": [2.0], "ys": [0.1, 0.5],
            "replicas": 300, "steps": 256}}"#,
    );
    let mut payloads = Vec::new();
    for threads in ["1", "8"] {
        let out = dir.path().join(format!("t{threads}"));
        assert!(lab(&["mc", "--threads", threads], &cfg, &out).status.success());
        payloads.push(std::fs::read(out.join("moment.csv")).unwrap());
    }
    assert_eq!(payloads[0], payloads[1]);
}

#[test]
fn zip_of_traced_curve_recovers_driver() {
    let dir = tempfile::tempdir().unwrap();
    let trace_cfg = write_config(
        dir.path(),
        "trace.json",
        r#"{"kind": "trace", "params": {"driver": {"type": "sine", "amplitude": 0.5, "frequency": 1.0}, "steps": 400}}"#,
    );
    let traced = dir.path().join("traced");
    assert!(lab(&["trace"], &trace_cfg, &traced).status.success());
    let curve = traced.join("curve.csv");
    let zip_cfg = write_config(
        dir.path(),
        "zip.json",
        &serde_json::json!({"kind": "zip", "params": {"curve": curve}}).to_string(),
    );
    let zipped = dir.path().join("zipped");
    let o = lab(&["zip"], &zip_cfg, &zipped);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let original = read_csv(&traced.join("driver.csv"));
    let recovered = read_csv(&zipped.join("zip_driver.csv"));
    assert_eq!(original.len(), recovered.len());
    let err = original[1..]
        .iter()
        .zip(&recovered[1..])
        .map(|(a, b)| (a[1].parse::<f64>().unwrap() - b[1].parse::<f64>().unwrap()).abs())
        .fold(0.0, f64::max);
    assert!(err <= 5e-2, "{err}");

    let drv_cfg = write_config(
        dir.path(),
        "zipd.json",
        r#"{"kind": "zip", "params": {"driver": {"type": "sine", "amplitude": 0.5, "frequency": 1.0}, "steps": 400}}"#,
    );
    let from_driver = dir.path().join("from_driver");
    assert!(lab(&["zip"], &drv_cfg, &from_driver).status.success());
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(from_driver.join("summary.json")).unwrap()).unwrap();
    let reported = summary["roundtrip_error"].as_f64().unwrap();
    assert!((reported - err).abs() <= 1e-12, "{reported} vs {err}");
}
