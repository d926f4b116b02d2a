use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jsonschema::{Draft, JSONSchema};
use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).to_path_buf()
}

fn bellpoly(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bellpoly")).args(args).output().expect("binary runs")
}

fn schema(name: &str) -> JSONSchema {
    let text = fs::read_to_string(root().join("schemas").join(name)).unwrap();
    let value: Value = serde_json::from_str(&text).unwrap();
    JSONSchema::options().with_draft(Draft::Draft7).compile(&value).expect("schema compiles")
}

fn scenarios() -> Vec<(PathBuf, String)> {
    let mut out: Vec<(PathBuf, String)> = fs::read_dir(root().join("scenarios"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .map(|p| {
            let v: Value = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
            let mode = v["mode"].as_str().unwrap().to_string();
            (p, mode)
        })
        .collect();
    out.sort();
    out
}

fn assert_valid(schema: &JSONSchema, doc: &Value, what: &str) {
    if let Err(errors) = schema.validate(doc) {
        let msgs: Vec<String> = errors.map(|e| format!("{} at {}", e, e.instance_path)).take(5).collect();
        panic!("{what}: {}", msgs.join("; "));
    }
}

fn write_temp(name: &str, body: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bellpoly-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn scenario_files_match_their_schema() {
    let s = schema("scenario.schema.json");
    for (path, _) in scenarios() {
        let v: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_valid(&s, &v, &path.display().to_string());
    }
}

#[test]
fn every_scenario_report_matches_the_report_schema() {
    let s = schema("report.schema.json");
    for (path, mode) in scenarios() {
        // Keep the heavy simulations short; the schema does not depend on sample size.
        let trials = if mode == "fine" || mode == "ldm" { vec!["--trials", "20000"] } else { vec![] };
        let mut args = vec![mode.as_str(), path.to_str().unwrap(), "--format", "json"];
        args.extend(trials);
        let out = bellpoly(&args);
        assert_eq!(out.status.code(), Some(0), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
        let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_valid(&s, &doc, &path.display().to_string());
        assert!(doc["generated_at"].is_u64());
        for format in ["text", "csv"] {
            let mut args = vec![mode.as_str(), path.to_str().unwrap(), "--format", format, "--trials", "20000"];
            if mode == "record" {
                args.truncate(4);
            }
            let out = bellpoly(&args);
            assert_eq!(out.status.code(), Some(0), "{} as {format}", path.display());
            assert!(!out.stdout.is_empty(), "{} as {format}", path.display());
        }
    }
}

#[test]
fn quantum_text_reports_the_eighth() {
    let p = root().join("scenarios/quantum_violating.json");
    let out = bellpoly(&["quantum", p.to_str().unwrap(), "--format", "text"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("VIOLATED, margin 0.125000"), "{text}");
}

#[test]
fn exact_check_reports_one_eighth_and_a_certificate() {
    let p = root().join("scenarios/check_quantum.json");
    let out = bellpoly(&["check", p.to_str().unwrap(), "--reproducible"]);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["result"]["verdict"]["member"], false);
    assert_eq!(doc["result"]["verdict"]["certificate"]["gap"], "1/8");
    assert_eq!(doc["result"]["agreement"], "agree");
    assert!(doc.get("generated_at").is_none());
}

#[test]
fn reproducible_runs_are_byte_identical() {
    for name in ["fine_violating.json", "ldm_random.json", "record_random.json"] {
        let p = root().join("scenarios").join(name);
        let mode = name.split('_').next().unwrap();
        let args = [mode, p.to_str().unwrap(), "--trials", "50000", "--reproducible"];
        let a = bellpoly(&args);
        let b = bellpoly(&args);
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, b.stdout, "{name}");
    }
}

#[test]
fn seed_flag_changes_simulations() {
    let p = root().join("scenarios/fine_violating.json");
    let run = |seed: &str| bellpoly(&["fine", p.to_str().unwrap(), "--trials", "20000", "--seed", seed, "--reproducible"]).stdout;
    assert_ne!(run("1"), run("2"));
}

#[test]
fn usage_errors_exit_two() {
    let p = root().join("scenarios/quantum_violating.json");
    let p = p.to_str().unwrap();
    let missing = root().join("scenarios/does-not-exist.json");
    let unknown_field = write_temp("unknown.json", r#"{"mode": "quantum", "geometry": {"a": [0, 0], "b": [0, 0]}, "colour": 1}"#);
    let no_vector = write_temp("novector.json", r#"{"mode": "check"}"#);
    let too_big = write_temp(
        "toobig.json",
        r#"{"mode": "check", "exact": true, "vector": {"n": 9, "S": [], "p": [0,0,0,0,0,0,0,0,0], "p_pair": []}}"#,
    );
    let cases: Vec<Vec<&str>> = vec![
        vec![],
        vec!["quantum", p, "--bogus"],
        vec!["quantum", p, "--format", "xml"],
        vec!["check", p],
        vec!["quantum", p, "--trials", "0"],
        vec!["quantum", p, "--exact"],
        vec!["quantum", missing.to_str().unwrap()],
        vec!["quantum", unknown_field.to_str().unwrap()],
        vec!["check", no_vector.to_str().unwrap()],
        vec!["check", too_big.to_str().unwrap()],
    ];
    for args in cases {
        let out = bellpoly(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn malformed_data_exits_three() {
    let bad_json = write_temp("bad.json", "{\"mode\": \"quantum\", ");
    let bad_csv = write_temp("bad.csv", "run,X1,X2,X3,X4,X13,X14,X23,X24\n1,1,0,1,0,0,0,0,0\n");
    let record = write_temp("record.json", &format!(r#"{{"mode": "record", "record": {:?}}}"#, bad_csv.to_str().unwrap()));
    let bad_model = write_temp("model.json", r#"{"mode": "ldm", "model": {"mu": [1], "lambda": [1], "nu": [1]}}"#);
    for (mode, p) in [("quantum", &bad_json), ("record", &record), ("ldm", &bad_model)] {
        let out = bellpoly(&[mode, p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(3), "{mode}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(bellpoly(&["--help"]).status.code(), Some(0));
    assert_eq!(bellpoly(&["--version"]).status.code(), Some(0));
}
