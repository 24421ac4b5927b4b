//! Output files read by the plotting scripts: headers, column types, row counts.

use std::path::Path;
use std::process::Command;

use loewner_lab::forward::trace;
use loewner_lab::drivers::sine_driver;
use loewner_lab::io::{curve_from_csv, curve_to_csv, CURVE_HEADER, DRIVER_HEADER};
use loewner_lab::montecarlo::{CONVERGENCE_HEADER, LDP_HEADER, MC_HEADER};
use serde_json::Value;

fn run(dir: &Path, kind: &str, config: Value) -> std::path::PathBuf {
    let cfg = dir.join(format!("{kind}.json"));
    std::fs::write(&cfg, config.to_string()).unwrap();
    let out = dir.join(kind);
    let o = Command::new(env!("CARGO_BIN_EXE_loewner-lab"))
        .arg(kind)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{kind}: {}", String::from_utf8_lossy(&o.stderr));
    out
}

/// Header line plus numeric body; `text_cols` are allowed to be non-numeric.
fn check_csv(path: &Path, header: &str, rows: usize, text_cols: &[usize]) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.ends_with('\n'));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(header), "{}", path.display());
    let width = header.split(',').count();
    let body: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    assert_eq!(body.len(), rows, "{}", path.display());
    for row in &body {
        assert_eq!(row.len(), width);
        for (i, cell) in row.iter().enumerate() {
            if !text_cols.contains(&i) {
                let ok = cell.parse::<f64>().is_ok() || cell == "true" || cell == "false";
                assert!(ok, "{}: column {i} = {cell}", path.display());
            }
        }
    }
    body
}

#[test]
fn curve_csv_round_trips_bit_exactly() {
    let curve = trace(&sine_driver(1.3, 2.7, 1.0, 300)).unwrap();
    let text = curve_to_csv(&curve);
    assert!(text.starts_with(CURVE_HEADER));
    let back = curve_from_csv(&text, Path::new("mem")).unwrap();
    assert_eq!(back.points(), curve.points());
    assert_eq!(back.times(), curve.times());
}

#[test]
fn plotted_outputs_have_stable_schemas() {
    let dir = tempfile::tempdir().unwrap();

    let out = run(dir.path(), "trace", serde_json::json!({"kind": "trace", "params": {"driver": {"type": "zero"}, "steps": 50}}));
    check_csv(&out.join("curve.csv"), CURVE_HEADER, 51, &[]);
    let drv = check_csv(&out.join("driver.csv"), DRIVER_HEADER, 51, &[]);
    assert_eq!(drv[0], ["0", "0"]);

    let out = run(
        dir.path(),
        "ldp-slope",
        serde_json::json!({"kind": "ldp-slope", "params": {"event": {"type": "driver-sup", "level": 1.0},
            "kappas": [0.4, 0.2, 0.1], "replicas": 1000, "steps": 64}}),
    );
    let rows = check_csv(&out.join("ldp.csv"), LDP_HEADER, 3, &[0]);
    assert!(rows.iter().all(|r| r[9] == "true" || r[9] == "false"));

    let out = run(
        dir.path(),
        "mc",
        serde_json::json!({"kind": "mc", "params": {"task": "event", "event": {"type": "driver-sup", "level": 1.0},
            "kappa": 1.0, "replicas": 100, "steps": 64}}),
    );
    check_csv(&out.join("mc.csv"), MC_HEADER, 1, &[0]);

    let out = run(
        dir.path(),
        "approx-converge",
        serde_json::json!({"kind": "approx-converge", "params": {"kappa": 1.0, "n_list": [4, 8], "beta": 0.5,
            "zeta": 0.05, "replicas": 10, "fine_steps": 64}}),
    );
    check_csv(&out.join("convergence.csv"), CONVERGENCE_HEADER, 2, &[]);

    let out = run(
        dir.path(),
        "verify-bounds",
        serde_json::json!({"kind": "verify-bounds", "params": {"checks": ["continuity", "koebe"], "instances": 3}}),
    );
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out.join("bounds.json")).unwrap()).unwrap();
    assert!(v["all_pass"].is_boolean());
    let reports = v["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 2);
    for r in reports {
        for key in ["bound_id", "points", "worst_ratio", "witness", "pass", "tolerance"] {
            assert!(!r[key].is_null(), "missing {key}");
        }
    }
}
