use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use emopt::campaign::{
    self, build_report, emit_tables, load_records, Algorithm, CampaignConfig, OutputFormat,
    COMPARISON_HEADER, REPORT_FILE, WILCOXON_HEADER,
};
use emopt::Error;
use serde_json::Value;
use tempfile::TempDir;

fn small_config(functions: &[&str], runs: usize, max_iterations: usize) -> CampaignConfig {
    CampaignConfig {
        functions: functions.iter().map(|s| s.to_string()).collect(),
        runs,
        max_iterations: Some(max_iterations),
        ..CampaignConfig::default()
    }
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    files
}

fn read_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn emopt() -> Command {
    Command::new(env!("CARGO_BIN_EXE_emopt"))
}

#[test]
fn csv_output_is_byte_identical_across_runs_and_thread_counts() {
    let cfg = small_config(&["f1", "f4", "f10"], 5, 15);
    let dirs: Vec<TempDir> = (0..3).map(|_| TempDir::new().unwrap()).collect();
    for (dir, threads) in dirs.iter().zip([Some(1), Some(4), Some(4)]) {
        let report = campaign::run_campaign(&cfg, threads).unwrap();
        emit_tables(
            &report,
            dir.path(),
            &[OutputFormat::Csv, OutputFormat::Json],
        )
        .unwrap();
    }
    let reference = csv_files(dirs[0].path());
    assert!(reference.len() >= 9);
    for other in &dirs[1..] {
        let files = csv_files(other.path());
        assert_eq!(files.len(), reference.len());
        for (a, b) in reference.iter().zip(&files) {
            assert_eq!(a.file_name(), b.file_name());
            assert_eq!(
                fs::read(a).unwrap(),
                fs::read(b).unwrap(),
                "{:?}",
                a.file_name()
            );
        }
    }
}

#[test]
fn full_original_set_writes_eighteen_rows() {
    let cfg = small_config(
        &["f1", "f2", "f3", "f4", "f5", "f6", "f7", "f8", "f9"],
        5,
        5,
    );
    let dir = TempDir::new().unwrap();
    let report = campaign::run_campaign(&cfg, None).unwrap();
    assert!(report.warnings.is_empty());
    emit_tables(&report, dir.path(), &[OutputFormat::Csv]).unwrap();

    let (header, rows) = read_rows(&dir.path().join("comparison.csv"));
    assert_eq!(header, COMPARISON_HEADER);
    assert_eq!(rows.len(), 18);
    let ids: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(&ids[..4], ["f1", "f1", "f2", "f2"]);
    assert_eq!(rows[0][1], "emo");
    assert_eq!(rows[1][1], "obemo");

    let (header, rows) = read_rows(&dir.path().join("wilcoxon.csv"));
    assert_eq!(header, WILCOXON_HEADER);
    assert_eq!(rows.len(), 18);
    for row in &rows {
        assert_eq!(row[1], "obemo_vs_emo");
        let p: f64 = row[4].parse().unwrap();
        assert!(p > 0.0 && p <= 1.0);
        assert_eq!(row[5], (p < 0.05).to_string());
    }

    let (_, runs) = read_rows(&dir.path().join("runs.csv"));
    assert_eq!(runs.len(), 9 * 2 * 5);
    assert!(!dir.path().join(REPORT_FILE).exists());
}

#[test]
fn traces_are_monotone_and_start_at_one() {
    let cfg = small_config(&["f2", "f11"], 3, 25);
    let dir = TempDir::new().unwrap();
    let report = campaign::run_campaign(&cfg, None).unwrap();
    emit_tables(&report, dir.path(), &[OutputFormat::Csv]).unwrap();
    for f in ["f2", "f11"] {
        for a in ["emo", "obemo"] {
            let (header, rows) = read_rows(&dir.path().join(format!("trace_{f}_{a}.csv")));
            assert_eq!(header, ["iteration", "best_so_far"]);
            assert!(!rows.is_empty());
            let mut prev = f64::INFINITY;
            for (i, row) in rows.iter().enumerate() {
                assert_eq!(row[0], (i + 1).to_string());
                let v: f64 = row[1].parse().unwrap();
                assert!(v <= prev, "{f}/{a}: {v} after {prev}");
                prev = v;
            }
        }
    }
}

#[test]
fn single_run_warns_and_skips_tests() {
    let cfg = small_config(&["f1"], 1, 10);
    let report = campaign::run_campaign(&cfg, None).unwrap();
    assert_eq!(report.warnings.len(), 1);
    assert!(report.comparisons.is_empty());
    assert_eq!(report.aggregates.len(), 2);
    let dir = TempDir::new().unwrap();
    emit_tables(&report, dir.path(), &[OutputFormat::Csv]).unwrap();
    assert!(dir.path().join("comparison.csv").exists());
    assert!(!dir.path().join("wilcoxon.csv").exists());
}

#[test]
fn single_algorithm_has_no_comparisons() {
    let mut cfg = small_config(&["f3"], 5, 10);
    cfg.algorithms = vec![Algorithm::Obemo];
    let report = campaign::run_campaign(&cfg, None).unwrap();
    assert!(report.comparisons.is_empty());
    assert!(report.warnings.is_empty());
    assert_eq!(report.aggregates.len(), 1);
}

#[test]
fn incomplete_records_are_refused() {
    let cfg = small_config(&["f1", "f2"], 5, 5);
    let mut records = campaign::execute(&cfg, None).unwrap();
    records.cells[1].runs.pop();
    let err = build_report(&records).unwrap_err();
    assert!(matches!(err, Error::Incomplete(_)));
    assert_eq!(err.exit_code(), 4);

    let mut records = campaign::execute(&cfg, None).unwrap();
    records.cells.remove(3);
    assert!(matches!(build_report(&records), Err(Error::Incomplete(_))));
}

#[test]
fn table_reemits_identical_csv() {
    let cfg = small_config(&["f6"], 5, 12);
    let first = TempDir::new().unwrap();
    let report = campaign::run_campaign(&cfg, None).unwrap();
    emit_tables(&report, first.path(), &[OutputFormat::Csv]).unwrap();

    let second = TempDir::new().unwrap();
    let status = emopt()
        .args(["table", "--formats", "csv", "--from"])
        .arg(first.path())
        .arg("--out")
        .arg(second.path())
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let a = csv_files(first.path());
    let b = csv_files(second.path());
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
    }
    let loaded = load_records(first.path()).unwrap();
    assert_eq!(loaded.cells, report.cells);
}

#[test]
fn cli_run_writes_tables_and_honours_threads() {
    let dir = TempDir::new().unwrap();
    let out = emopt()
        .env("EMOPT_THREADS", "2")
        .args([
            "run",
            "--functions",
            "branin,f3",
            "--runs",
            "5",
            "--max-iters",
            "10",
            "--formats",
            "csv,json",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("f1") && stdout.contains("obemo"));
    for f in [
        "records.json",
        "report.json",
        "comparison.csv",
        "wilcoxon.csv",
        "runs.csv",
    ] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
}

#[test]
fn cli_exit_codes() {
    let dir = TempDir::new().unwrap();

    let code = |args: &[&str]| emopt().args(args).output().unwrap().status.code();
    let out = dir.path().to_str().unwrap();

    assert_eq!(code(&["run", "--functions", "f99", "--out", out]), Some(2));
    assert_eq!(
        code(&[
            "run",
            "--functions",
            "f1",
            "--algorithms",
            "pso",
            "--out",
            out
        ]),
        Some(2)
    );
    assert_eq!(
        code(&["run", "--functions", "f1", "--runs", "0", "--out", out]),
        Some(2)
    );

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "runs = \"many\"\n").unwrap();
    assert_eq!(code(&["run", "--config", bad.to_str().unwrap()]), Some(2));
    let unknown = dir.path().join("unknown.toml");
    fs::write(&unknown, "colour = 3\n").unwrap();
    assert_eq!(
        code(&["run", "--config", unknown.to_str().unwrap()]),
        Some(2)
    );

    let missing = dir.path().join("nope.toml");
    assert_eq!(
        code(&["run", "--config", missing.to_str().unwrap()]),
        Some(3)
    );

    // A regular file where the output directory should go.
    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "").unwrap();
    let nested = blocker.join("out");
    assert_eq!(
        code(&[
            "run",
            "--functions",
            "f1",
            "--runs",
            "1",
            "--max-iters",
            "2",
            "--out",
            nested.to_str().unwrap()
        ]),
        Some(3)
    );

    // Truncated records.
    let cfg = small_config(&["f1"], 5, 5);
    let mut records = campaign::execute(&cfg, None).unwrap();
    records.cells[0].runs.truncate(2);
    let stored = dir.path().join("partial.json");
    fs::write(&stored, serde_json::to_string(&records).unwrap()).unwrap();
    let reemit = dir.path().join("reemit");
    assert_eq!(
        code(&[
            "table",
            "--from",
            stored.to_str().unwrap(),
            "--out",
            reemit.to_str().unwrap()
        ]),
        Some(4)
    );
    assert!(!reemit.exists());
}

#[test]
fn config_file_round_trip() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("campaign.toml");
    fs::write(
        &path,
        r#"
functions = ["six-hump-camel", "f1"]
algorithms = ["emo", "obemo"]
runs = 5
base_seed = 77
max_iterations = 8
formats = ["json"]

[engine]
stagnation_window = 4
lambda_scope = "per-particle"
"#,
    )
    .unwrap();
    let cfg = CampaignConfig::load(&path).unwrap();
    assert_eq!(cfg.resolve_functions().unwrap()[1].id, "f2");
    let report = campaign::run_campaign(&cfg, Some(1)).unwrap();
    assert_eq!(report.aggregates.len(), 4);
    let out = TempDir::new().unwrap();
    let written = emit_tables(&report, out.path(), &cfg.formats).unwrap();
    assert_eq!(written.len(), 2);
    for e in &report.cells {
        for r in &e.runs {
            assert!(r.record.iterations <= 8);
        }
    }
}

mod schema {
    use super::*;

    /// Checks `value` against the subset of JSON Schema used by the report
    /// schema: type, enum, required, properties, additionalProperties,
    /// items, minimum/maximum (inclusive and exclusive) and local `$ref`.
    pub fn validate(root: &Value, schema: &Value, value: &Value, path: &str) -> Vec<String> {
        let mut errors = Vec::new();
        if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
            let target = r
                .trim_start_matches("#/")
                .split('/')
                .fold(root, |node, key| &node[key]);
            return validate(root, target, value, path);
        }
        if let Some(ty) = schema.get("type") {
            let allowed: Vec<&str> = match ty {
                Value::String(s) => vec![s.as_str()],
                Value::Array(a) => a.iter().filter_map(Value::as_str).collect(),
                _ => vec![],
            };
            if !allowed.iter().any(|t| type_matches(t, value)) {
                errors.push(format!("{path}: expected {allowed:?}, got {value}"));
                return errors;
            }
        }
        if let Some(options) = schema.get("enum").and_then(Value::as_array) {
            if !options.contains(value) {
                errors.push(format!("{path}: {value} not in {options:?}"));
            }
        }
        if let Some(x) = value.as_f64() {
            let bound = |k: &str| schema.get(k).and_then(Value::as_f64);
            if bound("minimum").is_some_and(|m| x < m)
                || bound("maximum").is_some_and(|m| x > m)
                || bound("exclusiveMinimum").is_some_and(|m| x <= m)
                || bound("exclusiveMaximum").is_some_and(|m| x >= m)
            {
                errors.push(format!("{path}: {x} out of range"));
            }
        }
        if let Value::Object(map) = value {
            for key in schema
                .get("required")
                .and_then(Value::as_array)
                .into_iter()
                .flatten()
                .filter_map(Value::as_str)
            {
                if !map.contains_key(key) {
                    errors.push(format!("{path}: missing '{key}'"));
                }
            }
            let props = schema.get("properties").and_then(Value::as_object);
            for (k, v) in map {
                match props.and_then(|p| p.get(k)) {
                    Some(sub) => errors.extend(validate(root, sub, v, &format!("{path}.{k}"))),
                    None if schema.get("additionalProperties") == Some(&Value::Bool(false)) => {
                        errors.push(format!("{path}: unexpected '{k}'"))
                    }
                    None => {}
                }
            }
        }
        if let (Value::Array(items), Some(sub)) = (value, schema.get("items")) {
            for (i, v) in items.iter().enumerate() {
                errors.extend(validate(root, sub, v, &format!("{path}[{i}]")));
            }
        }
        errors
    }

    fn type_matches(ty: &str, v: &Value) -> bool {
        match ty {
            "object" => v.is_object(),
            "array" => v.is_array(),
            "string" => v.is_string(),
            "boolean" => v.is_boolean(),
            "null" => v.is_null(),
            "number" => v.is_number(),
            "integer" => v.is_u64() || v.is_i64(),
            _ => false,
        }
    }

    fn load_schema() -> Value {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/report.schema.json");
        serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
    }

    #[test]
    fn report_json_matches_schema() {
        let schema = load_schema();
        let dir = TempDir::new().unwrap();
        for (runs, max_iterations) in [(5, 6), (1, 3)] {
            let cfg = small_config(&["f1", "f12"], runs, max_iterations);
            let report = campaign::run_campaign(&cfg, None).unwrap();
            emit_tables(&report, dir.path(), &[OutputFormat::Json]).unwrap();
            let doc: Value =
                serde_json::from_str(&fs::read_to_string(dir.path().join(REPORT_FILE)).unwrap())
                    .unwrap();
            let errors = validate(&schema, &schema, &doc, "$");
            assert!(errors.is_empty(), "{errors:#?}");
            assert_eq!(doc["aggregates"].as_array().unwrap().len(), 4);
        }
    }

    #[test]
    fn validator_rejects_broken_reports() {
        let schema = load_schema();
        let cfg = small_config(&["f1"], 5, 4);
        let report = campaign::run_campaign(&cfg, None).unwrap();
        let good = serde_json::to_value(campaign::JsonReport::from(&report)).unwrap();
        assert!(validate(&schema, &schema, &good, "$").is_empty());

        let mut bad = good.clone();
        bad["comparisons"][0]["best"]["p_value"] = Value::from(1.5);
        assert!(!validate(&schema, &schema, &bad, "$").is_empty());

        let mut bad = good.clone();
        bad["aggregates"][0]["algorithm"] = Value::from("pso");
        assert!(!validate(&schema, &schema, &bad, "$").is_empty());

        let mut bad = good;
        bad.as_object_mut().unwrap().remove("warnings");
        assert!(!validate(&schema, &schema, &bad, "$").is_empty());
    }
}

#[test]
fn shipped_config_matches_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/campaign.toml");
    let cfg = CampaignConfig::load(&path).unwrap();
    assert_eq!(cfg, CampaignConfig::default());
}
