use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn hesitator(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hesitator"))
        .args(args)
        .env_remove("HESITATOR_LLM_ENDPOINT")
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Data rows after the version comment and header.
fn data_rows(csv: &str) -> usize {
    csv.lines().filter(|l| !l.starts_with('#')).count() - 1
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn simulate_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let o = hesitator(&["simulate", "--sessions", "4", "--seed", "11", "--out", path(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ta = read_dir_bytes(&a.join("transcripts"));
    assert_eq!(ta.len(), 4);
    assert_eq!(ta, read_dir_bytes(&b.join("transcripts")));
    assert_eq!(fs::read(a.join("summary.json")).unwrap(), fs::read(b.join("summary.json")).unwrap());
}

#[test]
fn transcript_inspect_reads_simulated_sessions() {
    let tmp = TempDir::new().unwrap();
    let o = hesitator(&["simulate", "--sessions", "1", "--out", path(tmp.path())]);
    assert!(o.status.success());
    let file = tmp.path().join("transcripts").join("session_0000.jsonl");
    let o = hesitator(&["transcript", "inspect", path(&file)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("turn  1"));
}

#[test]
fn missing_catalog_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "catalog = \"/nonexistent/catalog.csv\"\nschema = \"/nonexistent/schema.toml\"\n").unwrap();
    let o = hesitator(&["--config", path(&cfg), "simulate", "--sessions", "1", "--out", path(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn external_provider_without_endpoint_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let o = hesitator(&["simulate", "--provider", "external", "--sessions", "1", "--out", path(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("HESITATOR_LLM_ENDPOINT"));
}

#[test]
fn overload_writes_one_row_per_condition() {
    let tmp = TempDir::new().unwrap();
    let o = hesitator(&["experiment", "overload", "--sessions", "10", "--out", path(tmp.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("overload.csv")).unwrap();
    assert_eq!(data_rows(&csv), 3);
    assert!(stdout(&o).contains("Wilcoxon") || stdout(&o).contains("paired differences"));
}

#[test]
fn curves_write_csv_and_svg() {
    let tmp = TempDir::new().unwrap();
    let o = hesitator(&["experiment", "curves", "--curve", "assortment", "--sessions", "3", "--out", path(tmp.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("curve_assortment.csv")).unwrap();
    assert_eq!(data_rows(&csv), 15);
    assert!(fs::read_to_string(tmp.path().join("curve_assortment.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn unknown_curve_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let o = hesitator(&["experiment", "curves", "--curve", "sideways", "--out", path(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_calibration_reports_range() {
    let o = hesitator(&["validate-calibration"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("[-1.6284, 1.4511]"));
}

#[test]
fn validate_calibration_rejects_bad_and_empty_tables() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[assortment]\nbeta = 0.41\ndelta_min = 1.0\ndelta_max = -1.0\n").unwrap();
    assert_eq!(hesitator(&["validate-calibration", path(&bad)]).status.code(), Some(2));
    let empty = tmp.path().join("empty.toml");
    fs::write(&empty, "").unwrap();
    assert_eq!(hesitator(&["validate-calibration", path(&empty)]).status.code(), Some(2));
}

#[test]
fn flags_override_config_file_values() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "sessions = 50\nbase_seed = 1\n").unwrap();
    let out = tmp.path().join("out");
    let o = hesitator(&["--config", path(&cfg), "simulate", "--sessions", "2", "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let effective = fs::read_to_string(out.join("effective_config.toml")).unwrap();
    assert!(effective.contains("sessions = 2"));
    assert!(effective.contains("base_seed = 1"));
    assert_eq!(fs::read_dir(out.join("transcripts")).unwrap().count(), 2);
}

#[test]
fn zero_sessions_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let o = hesitator(&["simulate", "--sessions", "0", "--out", path(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
}
