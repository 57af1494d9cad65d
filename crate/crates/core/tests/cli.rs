//! Behaviour of the command-line binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use chebsynth::cli::io::read_synthetic;
use chebsynth::grid::Grid;

fn chebsynth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chebsynth"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes `n` deterministic rows in `[-1, 1]^d` with a header line.
fn write_data(dir: &Path, name: &str, n: usize, d: usize, scale: f64) -> std::path::PathBuf {
    let path = dir.join(name);
    let mut text = (0..d).map(|j| format!("x{j}")).collect::<Vec<_>>().join(",") + "\n";
    for i in 0..n {
        let row: Vec<String> = (0..d)
            .map(|j| {
                let t = ((i * 7919 + j * 104_729) % 1000) as f64 / 999.0;
                format!("{}", scale * (2.0 * t - 1.0) * (0.6 + 0.4 * t))
            })
            .collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(&path, text).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn generate(dir: &Path, data: &Path, out: &str, extra: &[&str]) -> Output {
    let out = dir.join(out);
    let mut args = vec![
        "generate", "--data", path_str(data), "--out", path_str(&out), "--d", "2", "--k", "1", "--epsilon", "1",
        "--delta", "1e-5", "--seed", "7",
    ];
    args.extend_from_slice(extra);
    chebsynth(&args)
}

#[test]
fn generate_writes_counts_report_and_manifest() {
    let dir = TempDir::new().unwrap();
    let data = write_data(dir.path(), "data.csv", 600, 2, 1.0);
    let out = generate(dir.path(), &data, "syn.csv", &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let report = read_json(&dir.path().join("syn.csv.report.json"));
    let m = report["m"].as_u64().unwrap() as usize;
    let size = report["synthetic_size"].as_u64().unwrap();
    let grid = Grid::new(2, report["points_per_axis"].as_u64().unwrap() as usize).unwrap();
    let syn = read_synthetic(&dir.path().join("syn.csv"), &grid).unwrap();
    assert_eq!(syn.len(), size);
    assert!(m >= 1);
    for key in ["sigma", "s", "sensitivity_sq", "noise_gamma_scale", "kkt_gap", "solver_status", "timings", "manifest"] {
        assert!(!report[key].is_null(), "report lacks {key}");
    }
    assert!(report["watermark"].is_null());

    let csv = fs::read_to_string(dir.path().join("syn.csv")).unwrap();
    let first = csv.lines().next().unwrap();
    assert!(first.starts_with("# chebsynth config_sha256="), "{first}");
    assert!(first.contains("data_sha256=") && first.contains("seed=7"));
}

#[test]
fn generate_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let data = write_data(dir.path(), "data.csv", 400, 2, 1.0);
    assert!(generate(dir.path(), &data, "a.csv", &[]).status.success());
    assert!(generate(dir.path(), &data, "b.csv", &[]).status.success());
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    let b = fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn expanded_output_has_one_row_per_point() {
    let dir = TempDir::new().unwrap();
    let data = write_data(dir.path(), "data.csv", 300, 2, 1.0);
    assert!(generate(dir.path(), &data, "e.csv", &["--expand"]).status.success());
    let report = read_json(&dir.path().join("e.csv.report.json"));
    let text = fs::read_to_string(dir.path().join("e.csv")).unwrap();
    let rows = text.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(rows as u64, report["synthetic_size"].as_u64().unwrap());
}

#[test]
fn missing_delta_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let data = write_data(dir.path(), "data.csv", 50, 1, 1.0);
    let out = dir.path().join("x.csv");
    let res = chebsynth(&[
        "generate", "--data", path_str(&data), "--out", path_str(&out), "--d", "1", "--k", "1", "--epsilon", "1",
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("--delta"));
}

#[test]
fn out_of_range_data_is_rejected_with_row_number() {
    let dir = TempDir::new().unwrap();
    let data = write_data(dir.path(), "data.csv", 50, 2, 1.8);
    let res = generate(dir.path(), &data, "x.csv", &[]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("row"));

    // min-max rescaling maps the same file into the cube
    let res = generate(dir.path(), &data, "y.csv", &["--normalize", "min-max"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn cap_violation_exits_before_allocation() {
    let dir = TempDir::new().unwrap();
    let data = write_data(dir.path(), "data.csv", 100, 2, 1.0);
    let res = generate(dir.path(), &data, "x.csv", &["--m", "50", "--cap-grid", "1000"]);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("cap"));
}

#[test]
fn disabled_noise_is_watermarked() {
    let dir = TempDir::new().unwrap();
    let data = write_data(dir.path(), "data.csv", 200, 2, 1.0);
    let res = generate(dir.path(), &data, "u.csv", &["--unsafe-no-privacy"]);
    assert!(res.status.success());
    let csv = fs::read_to_string(dir.path().join("u.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with('#') && l.contains("not differentially private")));
    let report = read_json(&dir.path().join("u.csv.report.json"));
    assert!(report["watermark"].is_string());
    assert_eq!(report["sigma"].as_f64(), Some(0.0));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = TempDir::new().unwrap();
    let data = write_data(dir.path(), "data.csv", 200, 1, 1.0);
    let config = dir.path().join("cfg.json");
    fs::write(&config, r#"{"d": 1, "k": 1, "epsilon": 2.0, "delta": 1e-6, "seed": 3}"#).unwrap();
    let out = dir.path().join("c.csv");
    let res = chebsynth(&["generate", "--data", path_str(&data), "--out", path_str(&out), "--config", path_str(&config)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report = read_json(&dir.path().join("c.csv.report.json"));
    assert_eq!(report["config"]["epsilon"].as_f64(), Some(2.0));
}

#[test]
fn evaluate_reports_bounds() {
    let dir = TempDir::new().unwrap();
    let data = write_data(dir.path(), "data.csv", 300, 2, 1.0);
    assert!(generate(dir.path(), &data, "syn.csv", &[]).status.success());
    let report = dir.path().join("eval.json");
    let res = chebsynth(&[
        "evaluate", "--data", path_str(&data), "--synthetic", path_str(&dir.path().join("syn.csv")), "--k", "1",
        "--m", "6", "--families", "linear,gaussian,bump", "--out", path_str(&report),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let eval = read_json(&report);
    let upper = eval["dk_upper"]["value"].as_f64().unwrap();
    let lower = eval["dk_lower"].as_f64().unwrap();
    assert!(lower <= upper, "lower {lower} exceeds upper {upper}");
    assert!(eval["gamma"].as_f64().unwrap() > 0.0);
    assert_eq!(eval["families"].as_array().unwrap().len(), 3);
}

#[test]
fn evaluate_identical_inputs_is_zero() {
    let dir = TempDir::new().unwrap();
    let data = write_data(dir.path(), "data.csv", 100, 1, 1.0);
    let report = dir.path().join("eval.json");
    let res = chebsynth(&[
        "evaluate", "--data", path_str(&data), "--synthetic", path_str(&data), "--m", "8", "--out", path_str(&report),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let eval = read_json(&report);
    assert!(eval["gamma"].as_f64().unwrap() < 1e-12);
    assert!(eval["dk_lower"].as_f64().unwrap() < 1e-12);
}

#[test]
fn hard_instance_writes_dataset_and_summary() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("hard.csv");
    let res = chebsynth(&[
        "hard-instance", "--n", "200", "--d", "2", "--k", "1", "--cells", "3", "--epsilon", "0.5", "--seed", "4",
        "--out", path_str(&out),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let summary = read_json(&dir.path().join("hard.csv.summary.json"));
    assert_eq!(summary["theta"].as_array().unwrap().len(), 9);
    assert_eq!(summary["moved_rows"].as_u64(), Some(4));
    let rows = fs::read_to_string(&out).unwrap().lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(rows, 200);
}

#[test]
fn rates_with_two_sizes_has_no_standard_error() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("rates");
    let res = chebsynth(&[
        "rates", "--d", "1", "--k", "1", "--epsilon", "1", "--delta", "1e-5", "--min-log2", "6", "--max-log2", "7",
        "--repetitions", "2", "--seed", "1", "--out", path_str(&out),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report = read_json(&out.join("rates.json"));
    assert_eq!(report["points"].as_array().unwrap().len(), 2);
    assert!(report["metric_fit"]["standard_error"].is_null());
    assert_eq!(report["metric_fit"]["reliable"].as_bool(), Some(false));
    assert!(out.join("rates.csv").exists());
}

#[test]
fn unknown_subcommand_fails() {
    let res = chebsynth(&["frobnicate"]);
    assert!(!res.status.success());
}
