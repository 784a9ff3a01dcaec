//! Runs the binary on a small household: every JSON report must match its
//! schema, and failures must map to the documented exit codes.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = "\
seed = 7
data.source_period = 60
data.target_period = 60
synth.days = 14
model.width_scale = 0.125
model.epochs = 2
threshold.methods = MP, VS, AT
loss.w = 0, 0.5, 1
";

fn nilm(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.conf");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_nilm"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(o: Output) {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn schema(name: &str) -> Value {
    let p = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(format!("{name}.schema.json"));
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn reports_match_schemas() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["synth", "threshold", "train", "evaluate"] {
        ok(nilm(dir.path(), SMALL, &[cmd]));
    }
    for name in ["synth", "thresholds", "reconstruction", "train", "metrics"] {
        let text = std::fs::read_to_string(dir.path().join(format!("{name}.json"))).unwrap();
        let instance: Value = serde_json::from_str(&text).unwrap();
        let validator = jsonschema::validator_for(&schema(name)).unwrap();
        let errors: Vec<String> = validator
            .iter_errors(&instance)
            .map(|e| format!("{} at {}", e, e.instance_path()))
            .collect();
        assert!(errors.is_empty(), "{name}.json: {errors:#?}");
    }
}

#[test]
fn sweep_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let config =
        format!("{SMALL}data.appliances = fridge\nsweep.w = 0, 1\nsweep.repetitions = 2\n");
    ok(nilm(dir.path(), &config, &["synth"]));
    ok(nilm(dir.path(), &config, &["sweep"]));
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4, "{text}");
    assert!(rows.iter().all(|r| r.split(',').count() == header.len()));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // missing input data
    assert_eq!(
        nilm(dir.path(), SMALL, &["threshold"]).status.code(),
        Some(3)
    );
    // invalid configuration
    assert_eq!(
        nilm(dir.path(), "loss.w = 1.5\n", &["synth"]).status.code(),
        Some(2)
    );
    assert_eq!(
        nilm(dir.path(), "no.such.key = 1\n", &["synth"])
            .status
            .code(),
        Some(2)
    );
}
