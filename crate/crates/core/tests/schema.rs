//! Every emitted report and every shipped config validates against the
//! published JSON schemas.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;
use turnpike::cli::{parse_config, run_classify, run_probe, run_solve, run_sweep, RunOptions};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = root().join("schemas").join(format!("{name}.schema.json"));
    let value: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&value).unwrap()
}

fn check(validator: &jsonschema::Validator, instance: &Value, what: &str) {
    let errors: Vec<String> = validator
        .iter_errors(instance)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect();
    assert!(errors.is_empty(), "{what}: {errors:#?}");
}

fn check_file(name: &str, path: &Path) {
    let value: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    check(&schema(name), &value, &path.display().to_string());
}

const BASE: &str = r#"
schema_version = 1
seed = 3

[system]
form = "integrator"

[problem]
y0 = [1.0]
horizons = [10.0]

[solver]
tolerance = 1e-6
restarts = 1
"#;

fn opts(dir: &Path) -> RunOptions {
    RunOptions {
        out: Some(dir.to_path_buf()),
        seed: None,
    }
}

#[test]
fn solve_and_bootstrap_reports() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{BASE}\n[diagnostics.bootstrap]\ntau = 20.0\nc2 = 1.0\nkappa = 1.0\n");
    run_solve(parse_config(&text).unwrap(), &opts(dir.path())).unwrap();
    check_file("report", &dir.path().join("report.json"));
    check_file("bootstrap", &dir.path().join("bootstrap.json"));
}

#[test]
fn sweep_reports() {
    let dir = tempfile::tempdir().unwrap();
    let text = BASE.replace("horizons = [10.0]", "horizons = [5.0, 10.0]");
    run_sweep(parse_config(&text).unwrap(), &opts(dir.path())).unwrap();
    check_file("sweep", &dir.path().join("sweep.json"));
    check_file("report", &dir.path().join("report_T5.json"));
    check_file("report", &dir.path().join("report_T10.json"));
}

#[test]
fn probe_reports() {
    let dir = tempfile::tempdir().unwrap();
    for radius in ["1.0", "0.0"] {
        let text = format!("{BASE}\n[probe]\nradius = {radius}\nt0 = 1.0\nsamples = 8\n");
        run_probe(parse_config(&text).unwrap(), &opts(dir.path())).unwrap();
        check_file("probe", &dir.path().join("probe.json"));
    }
}

#[test]
fn classify_reports() {
    let dir = tempfile::tempdir().unwrap();
    let text = "schema_version = 1\nseed = 1\n[classify]\npoints = [[1.0, 0.0], [-1.0, 0.0]]\nlabels = [1.0, -1.0]\ngrid_resolution = 3\n";
    run_classify(parse_config(text).unwrap(), &opts(dir.path())).unwrap();
    check_file("classify", &dir.path().join("classify.json"));
}

fn toml_to_json(text: &str) -> Value {
    serde_json::to_value(toml::from_str::<toml::Value>(text).unwrap()).unwrap()
}

#[test]
fn shipped_configs_match_the_config_schema() {
    let validator = schema("config");
    for entry in fs::read_dir(root().join("configs")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            check(
                &validator,
                &toml_to_json(&fs::read_to_string(&path).unwrap()),
                &path.display().to_string(),
            );
        }
    }
}

#[test]
fn config_schema_rejects_what_the_parser_rejects() {
    let validator = schema("config");
    assert!(validator.is_valid(&toml_to_json(BASE)));
    for bad in [
        BASE.replace("seed = 3\n", ""),
        BASE.replace("[solver]", "[solver]\nspeed = 2"),
        BASE.replace("horizons = [10.0]", "horizons = [-10.0]"),
        BASE.replace("schema_version = 1", "schema_version = 2"),
    ] {
        assert!(!validator.is_valid(&toml_to_json(&bad)), "{bad}");
        let parsed = parse_config(&bad).and_then(|c| c.validate());
        assert!(parsed.is_err(), "{bad}");
    }
}
