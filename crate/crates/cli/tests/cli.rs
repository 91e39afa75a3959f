use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const COARSE_ENGINE: &str = r#""engine": {"hermite_nodes": 24, "hermite_nodes_large_block": 16, "legendre_nodes": 6}"#;

fn mlve(dir: &Path, config: Option<&str>, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mlve"));
    cmd.arg("--out").arg(dir.join("out"));
    if let Some(text) = config {
        let path = dir.join("config.json");
        std::fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.args(args).output().unwrap()
}

fn read_csv(path: &Path) -> Vec<csv::StringRecord> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let header = reader.headers().unwrap().clone();
    assert_eq!(&header[0], "schema_version");
    reader.records().map(|r| r.unwrap()).collect()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let idx = reader.headers().unwrap().iter().position(|h| h == name).unwrap();
    reader.records().map(|r| r.unwrap()[idx].to_string()).collect()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn missing_config_is_a_usage_error_and_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_mlve"))
        .arg("--out")
        .arg(dir.path().join("out"))
        .arg("--config")
        .arg(dir.path().join("absent.json"))
        .arg("compare")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let o = mlve(dir.path(), None, &["--suite", "nonsense", "verify"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_error_decreases_with_order() {
    let dir = TempDir::new().unwrap();
    let config = format!("{{{COARSE_ENGINE}}}");
    let o = mlve(dir.path(), Some(&config), &["--trace", "compare"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let d: Vec<f64> = column(&out.join("compare.csv"), "oracle_distance").iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(d.len(), 3);
    assert!(d[2] < d[1] && d[1] < d[0], "{d:?}");

    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("compare.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert!(json["improvement"].as_f64().unwrap() > 1.0);
    let trace = std::fs::read_to_string(out.join("trace.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(trace.lines().next().unwrap()).unwrap();
    assert_eq!(first["schema_version"], 1);
    assert_eq!(first["order"], 1);
}

#[test]
fn zero_coupling_gives_zero_rows() {
    let dir = TempDir::new().unwrap();
    let o = mlve(dir.path(), Some(r#"{"model": {"lambda": 0.0}}"#), &["compare"]);
    assert!(o.status.success());
    let path = dir.path().join("out/compare.csv");
    for name in ["order_re", "order_im", "partial_sum_re", "partial_sum_im", "oracle_distance"] {
        assert!(column(&path, name).iter().all(|v| v.parse::<f64>().unwrap() == 0.0), "{name}");
    }
}

#[test]
fn verify_passes_with_one_warning() {
    let dir = TempDir::new().unwrap();
    let o = mlve(dir.path(), None, &["verify"]);
    let text = stdout(&o);
    assert!(o.status.success(), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("WARN")).count(), 1, "{text}");
    assert!(!text.lines().any(|l| l.starts_with("FAIL")));
    let statuses = column(&dir.path().join("out/verify.csv"), "status");
    assert_eq!(statuses.iter().filter(|s| *s == "WARN").count(), 1);
}

#[test]
fn injected_sign_fault_is_reported() {
    let dir = TempDir::new().unwrap();
    let o = mlve(dir.path(), None, &["--inject-fault", "grassmann-sign", "--suite", "grassmann", "verify"]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    let fail = text.lines().find(|l| l.starts_with("FAIL [grassmann]")).expect("a failing grassmann check");
    assert!(fail.contains("columns") && fail.contains("rows"), "{fail}");
}

#[test]
fn suite_flag_runs_one_suite() {
    let dir = TempDir::new().unwrap();
    let o = mlve(dir.path(), None, &["--suite", "combinatorics", "verify"]);
    assert!(o.status.success());
    let suites = column(&dir.path().join("out/verify.csv"), "suite");
    assert!(!suites.is_empty());
    assert!(suites.iter().all(|s| s == "combinatorics"));
}

#[test]
fn domain_map_classifies_known_points() {
    let dir = TempDir::new().unwrap();
    // Steps of 0.25 put 0, 0.5 and 1 on the grid.
    let config = r#"{"domain_map": {"re_min": -0.5, "re_max": 1.5, "im_min": -0.5, "im_max": 0.5, "resolution": 9}}"#;
    let o = mlve(dir.path(), Some(config), &["domain-map"]);
    assert!(o.status.success());
    let rows = read_csv(&dir.path().join("out/domain_map.csv"));
    assert_eq!(rows.len(), 81);
    let at = |re: f64, im: f64| {
        rows.iter()
            .find(|r| r[1].parse::<f64>().unwrap() == re && r[2].parse::<f64>().unwrap() == im)
            .unwrap_or_else(|| panic!("no grid point {re}+{im}i"))
    };
    assert_eq!(&at(0.5, 0.0)[3], "true");
    assert_eq!((&at(0.0, 0.0)[3], &at(0.0, 0.0)[4]), ("false", "true"));
    assert_eq!((&at(1.0, 0.0)[3], &at(1.0, 0.0)[4]), ("false", "true"));
    assert_eq!(&at(1.5, 0.0)[3], "false");
    assert_eq!(&at(0.5, 0.5)[4], "true");
    for r in &rows {
        let g = (r[1].parse::<f64>().unwrap(), r[2].parse::<f64>().unwrap());
        let inside = (g.0 - 0.5).hypot(g.1) < 0.5;
        assert_eq!(&r[3] == "true", inside, "{g:?}");
    }
}

#[test]
fn single_thread_output_is_reproducible() {
    let config = format!(r#"{{{COARSE_ENGINE}, "compare": {{"n_max": 2}}}}"#);
    let run = || {
        let dir = TempDir::new().unwrap();
        let o = mlve(dir.path(), Some(&config), &["--threads", "1", "compare"]);
        assert!(o.status.success());
        std::fs::read(dir.path().join("out/compare.csv")).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn mayer_reproduces_the_two_monomer_gas() {
    let dir = TempDir::new().unwrap();
    let o = mlve(dir.path(), None, &["mayer"]);
    assert!(o.status.success());
    let gaps: Vec<f64> =
        column(&dir.path().join("out/mayer.csv"), "z_gap").iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(gaps.len(), 4);
    assert!(gaps[3] < 1e-3 && gaps[3] < gaps[0], "{gaps:?}");
}

#[test]
fn verify_bounds_and_enumerate_write_tables() {
    let dir = TempDir::new().unwrap();
    assert!(mlve(dir.path(), None, &["verify-bounds"]).status.success());
    assert!(mlve(dir.path(), None, &["enumerate"]).status.success());
    let out = dir.path().join("out");
    assert_eq!(read_csv(&out.join("stirling.csv")).len(), 1000);
    let violated = column(&out.join("threshold.csv"), "violated");
    assert_eq!(violated.iter().filter(|v| *v == "true").count(), 1);
    assert_eq!(column(&out.join("enumerate.csv"), "spanning_jungles"), ["1", "2", "12", "128", "2000", "41472"]);
}

#[test]
fn oracle_scan_starts_at_zero() {
    let dir = TempDir::new().unwrap();
    let o = mlve(dir.path(), Some(r#"{"oracle": {"lambdas": [0.0, 0.1, 0.2]}}"#), &["oracle"]);
    assert!(o.status.success());
    let logz = column(&dir.path().join("out/oracle.csv"), "logz_re");
    assert_eq!(logz[0].parse::<f64>().unwrap(), 0.0);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/oracle.json")).unwrap()).unwrap();
    assert_eq!(json["perturbative_coefficients"].as_array().unwrap().len(), 4);
}
