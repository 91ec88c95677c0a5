use std::path::Path;
use std::process::{Command, Output};

use condsqueeze::cli::run::{BOUNDS_COLUMNS, COVARIANCE_COLUMNS, NUMERIC_COLUMNS, THRESHOLD_COLUMNS};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_condsqueeze")).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn header(path: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    let line = text.lines().find(|l| !l.starts_with('#')).expect("header line");
    line.split(',').map(str::to_string).collect()
}

fn first_row(path: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    let line = text.lines().filter(|l| !l.starts_with('#')).nth(1).expect("data row");
    line.split(',').map(str::to_string).collect()
}

fn cell(path: &Path, column: &str) -> String {
    let i = header(path).iter().position(|c| c == column).unwrap_or_else(|| panic!("no column {column}"));
    first_row(path)[i].clone()
}

#[test]
fn point_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["point", "--scenario", "fig2", "--set", "C=100", "--set", "R=0.5"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let path = dir.path().join("fig2_point.csv");
    let expected: Vec<&str> = COVARIANCE_COLUMNS.iter().chain(NUMERIC_COLUMNS.iter()).copied().collect();
    assert_eq!(header(&path), expected);
    assert_eq!(cell(&path, "C").parse::<f64>().unwrap(), 100.0);
    assert_eq!(cell(&path, "R").parse::<f64>().unwrap(), 0.5);
    assert_eq!(cell(&path, "verified"), "1");
    assert_eq!(cell(&path, "status"), "ok");
    assert!(cell(&path, "max_rel_diff").parse::<f64>().unwrap() < 1e-6);
}

#[test]
fn gain_override_matches_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&["point", "--scenario", "fig2", "--set", "K=-0.75"], &a).status.success());
    assert!(run(&["point", "--scenario", "fig2", "--set", "R=0.5"], &b).status.success());
    for column in ["R", "vxx", "vpp", "vxp"] {
        assert_eq!(cell(&a.join("fig2_point.csv"), column), cell(&b.join("fig2_point.csv"), column));
    }
}

#[test]
fn sweep_writes_one_table_per_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["sweep", "--scenario", "fig2", "--verify-fraction", "0"], dir.path());
    assert!(out.status.success());
    for r in ["0.1", "0.5", "1", "2", "10"] {
        let path = dir.path().join(format!("fig2_R{r}.csv"));
        assert_eq!(header(&path), COVARIANCE_COLUMNS);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 352);
        assert!(text.contains("# scenario_sha256: "));
    }
}

#[test]
fn bounds_and_threshold_schemas() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["bounds", "--scenario", "fig4"], dir.path()).status.success());
    assert_eq!(header(&dir.path().join("fig4_bounds_R1.csv")), BOUNDS_COLUMNS);
    assert!(dir.path().join("fig4_bounds_optimum.csv").exists());
    assert!(dir.path().join("fig4_bounds_summary.csv").exists());

    assert!(run(&["thresholds", "--scenario", "membrane"], dir.path()).status.success());
    assert_eq!(header(&dir.path().join("membrane_thresholds.csv")), THRESHOLD_COLUMNS);
    assert!(dir.path().join("membrane_feasibility.csv").exists());
}

#[test]
fn json_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["point", "--scenario", "membrane", "--format", "json", "--set", "n_cav=1e9"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("membrane_point.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["provenance"]["command"], "point");
    let columns = value["columns"].as_array().unwrap();
    let row = value["rows"][0].as_array().unwrap();
    assert_eq!(columns.len(), row.len());
    let n_cav = columns.iter().position(|c| c == "n_cav").unwrap();
    assert_eq!(row[n_cav].as_f64(), Some(1e9));
}

#[test]
fn spectra_file_formats() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["spectra", "--scenario", "membrane"], dir.path()).status.success());
    for kind in ["force", "imprecision", "displacement", "measured"] {
        let text = std::fs::read_to_string(dir.path().join(format!("membrane_R1_{kind}.csv"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# omega,S"), "{kind}");
        let fields: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(fields.len(), 2);
        assert!(fields[1] > 0.0);
        assert_eq!(text.lines().count(), 802);
    }
    for target in ["position", "momentum"] {
        let text = std::fs::read_to_string(dir.path().join(format!("membrane_R0.1_filter_{target}.csv"))).unwrap();
        assert!(text.starts_with("# omega,ReH,ImH\n"));
    }
}

#[test]
fn missing_scenario_is_an_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["sweep", "--scenario", "does-not-exist.toml"], dir.path());
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn invalid_inputs_are_validation_failures() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "name = \"bad\"\nunexpected = 1\n").unwrap();
    let bad = bad.to_str().unwrap();
    let cases: [&[&str]; 5] = [
        &["point", "--scenario", bad],
        &["point", "--scenario", "fig2", "--set", "eta=2"],
        &["point", "--scenario", "fig2", "--set", "colour=1"],
        &["sweep", "--scenario", "fig2", "--verify-fraction", "1.5"],
        &["sweep", "--scenario", "fig2", "--workers", "0"],
    ];
    for args in cases {
        let out = run(args, &dir.path().join("out"));
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&["thresholds", "--scenario", "fig2", "--workers", "2"], &a).status.success());
    assert!(run(&["thresholds", "--scenario", "fig2", "--workers", "3"], &b).status.success());
    let body = |p: &Path| condsqueeze::cli::output::csv_body(&std::fs::read_to_string(p).unwrap());
    assert_eq!(body(&a.join("fig2_thresholds.csv")), body(&b.join("fig2_thresholds.csv")));
}
