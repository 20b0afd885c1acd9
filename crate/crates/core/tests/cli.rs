use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMOKE: &str = r#"{
  "schema_version": 1,
  "scenario": { "bs_antennas": 4, "users": 2, "surfaces": 2 },
  "optimizer": { "outer_iterations": 3 },
  "powers_dbm": [10.0],
  "patterns": ["directive", "isotropic"],
  "schemes": ["distributed-6dma", "fixed-irs"],
  "seeds": [0, 1]
}
"#;

fn sixdma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sixdma")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run_into(config: &Path, out: &Path) -> Output {
    sixdma(&["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", "1"])
}

#[test]
fn run_writes_csv_and_sidecar() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), "smoke.json", SMOKE);
    let out_dir = tmp.path().join("out");
    let out = run_into(&config, &out_dir);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let csv = fs::read_to_string(out_dir.join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "row_type,scheme,pattern,power_dbm,seed,sum_rate_bps_hz,std_bps_hz,outer_iters,runtime_s,converged,feasible"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.iter().filter(|r| r.starts_with("run,")).count(), 8);
    assert_eq!(rows.iter().filter(|r| r.starts_with("aggregate,")).count(), 4);

    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("results.json")).unwrap()).unwrap();
    assert!(sidecar.get("config").is_some());
    assert!(sidecar.get("decisions").is_some());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), "smoke.json", SMOKE);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(code(&run_into(&config, &a)), 0);
    let out = sixdma(&["run", "--config", config.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read(a.join("results.csv")).unwrap(), fs::read(b.join("results.csv")).unwrap());
}

#[test]
fn summarize_prints_gaps() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), "smoke.json", SMOKE);
    let out_dir = tmp.path().join("out");
    assert_eq!(code(&run_into(&config, &out_dir)), 0);
    let out = sixdma(&["summarize", "--in", out_dir.join("results.csv").to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("distributed-6dma"));
    assert!(text.contains("fixed-irs"));
}

#[test]
fn validate_accepts_and_rejects() {
    let tmp = TempDir::new().unwrap();
    let good = write_config(tmp.path(), "good.json", SMOKE);
    let out = sixdma(&["validate", "--config", good.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("8 runs"));

    let bad = write_config(tmp.path(), "bad.json", &SMOKE.replace("\"seeds\": [0, 1]", "\"seeds\": []"));
    let out = sixdma(&["validate", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 8"));

    let typo = write_config(tmp.path(), "typo.json", &SMOKE.replace("\"users\"", "\"user\""));
    assert_eq!(code(&sixdma(&["validate", "--config", typo.to_str().unwrap()])), 1);
}

#[test]
fn shipped_configs_validate() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["default.json", "smoke.json"] {
        let out = sixdma(&["validate", "--config", root.join(name).to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&sixdma(&[])), 1);
    assert_eq!(code(&sixdma(&["frobnicate"])), 1);
    assert_eq!(code(&sixdma(&["run", "--config", "/nonexistent/config.json"])), 1);
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), "smoke.json", SMOKE);
    assert_eq!(code(&sixdma(&["run", "--config", config.to_str().unwrap(), "--jobs", "0"])), 1);
    assert_eq!(code(&sixdma(&["summarize", "--in", "/nonexistent/results.csv"])), 1);
}

#[test]
fn help_and_version_exit_with_zero() {
    assert_eq!(code(&sixdma(&["--help"])), 0);
    assert_eq!(code(&sixdma(&["--version"])), 0);
}

#[test]
fn unwritable_output_exits_with_two() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), "smoke.json", SMOKE);
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let out = run_into(&config, &blocker.join("out"));
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}
