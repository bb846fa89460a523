use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn small_config(dir: &Path, run_id: &str) -> Value {
    json!({
        "params": { "m": -0.5, "p": 0.5, "alpha": 3.0, "M": 1.0, "T": 0.05 },
        "initial": { "kind": "bump", "center": 0.5, "width": 0.3, "height": 0.4, "base": 0.5 },
        "grid": { "n": 41 },
        "stepping": { "dt_init": 1e-3, "dt_max": 1e-3 },
        "outputs": { "directory": dir, "run_id": run_id, "stride": 5 }
    })
}

fn write_config(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn sdl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdl"))
        .args(args)
        .env_remove("SDL_OUTDIR")
        .output()
        .unwrap()
}

fn sdl_with(command: &str, config: &Path, extra: &[&str]) -> Output {
    let mut args = vec![command, "--config", config.to_str().unwrap()];
    args.extend_from_slice(extra);
    sdl(&args)
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn validate_rejects_positive_m_with_constraint_name() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(tmp.path(), "bad");
    cfg["params"]["m"] = json!(0.5);
    let path = write_config(tmp.path(), "bad.json", &cfg);
    let out = sdl_with("validate", &path, &[]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("-1<m<0"));
}

#[test]
fn validate_accepts_shipped_config() {
    let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/standard.json");
    let out = sdl_with("validate", &shipped, &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_keys_and_command_mismatch_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(tmp.path(), "x");
    cfg["outputs"]["format"] = json!("hdf5");
    let path = write_config(tmp.path(), "unknown.json", &cfg);
    assert_eq!(code(&sdl_with("solve", &path, &[])), 1);

    let mut cfg = small_config(tmp.path(), "x");
    cfg["command"] = json!("verify");
    let path = write_config(tmp.path(), "mismatch.json", &cfg);
    assert_eq!(code(&sdl_with("solve", &path, &[])), 1);

    assert_eq!(code(&sdl_with("solve", &tmp.path().join("missing.json"), &[])), 1);
    assert_eq!(code(&sdl(&["explode", "--config", "x.json"])), 1);
}

#[test]
fn solve_writes_layout_and_refuses_overwrite() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), "run.json", &small_config(tmp.path(), "demo"));
    let out = sdl_with("solve", &path, &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let run = tmp.path().join("demo");
    for file in ["config.json", "trajectory.csv", "diagnostics.json", "plot.gp", "curves/c0_bound.csv", "curves/mass.csv"] {
        assert!(run.join(file).exists(), "{file} missing");
    }
    let summary = String::from_utf8_lossy(&out.stdout);
    assert!(summary.starts_with("solve demo: ok"), "{summary}");

    let again = sdl_with("solve", &path, &[]);
    assert_eq!(code(&again), 1);
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    assert_eq!(code(&sdl_with("solve", &path, &["--force"])), 0);
}

#[test]
fn trajectory_is_deterministic_and_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write_config(tmp.path(), "a.json", &small_config(tmp.path(), "a"));
    let b = write_config(tmp.path(), "b.json", &small_config(tmp.path(), "b"));
    assert_eq!(code(&sdl_with("solve", &a, &[])), 0);
    assert_eq!(code(&sdl_with("solve", &b, &[])), 0);
    let first = fs::read(tmp.path().join("a/trajectory.csv")).unwrap();
    let second = fs::read(tmp.path().join("b/trajectory.csv")).unwrap();
    assert_eq!(first, second);
    let fields = sdl_core::io::read_trajectory_csv(&tmp.path().join("a/trajectory.csv")).unwrap();
    assert_eq!(fields.last().unwrap().time(), 0.05);
    assert_eq!(fields[0].grid().len(), 41);
}

#[test]
fn environment_overrides_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let elsewhere = tmp.path().join("elsewhere");
    let path = write_config(tmp.path(), "run.json", &small_config(&tmp.path().join("ignored"), "env"));
    let out = Command::new(env!("CARGO_BIN_EXE_sdl"))
        .args(["solve", "--config", path.to_str().unwrap()])
        .env("SDL_OUTDIR", &elsewhere)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(elsewhere.join("env/trajectory.csv").exists());
    assert!(!tmp.path().join("ignored").exists());
}

#[test]
fn verify_reports_six_estimates() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), "run.json", &small_config(tmp.path(), "verify"));
    let out = sdl_with("verify", &path, &[]);
    assert_eq!(code(&out), 0, "{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("verify/report.json")).unwrap()).unwrap();
    let lemmas: Vec<&str> = report["reports"].as_array().unwrap().iter().map(|r| r["lemma"].as_str().unwrap()).collect();
    assert_eq!(
        lemmas,
        ["L1_Linfty", "L2_gradient", "L3_mass", "L4_contraction", "Thm_dependence", "Eq26_energy"]
    );
    assert_eq!(report["failed"], 0);
    for r in report["reports"].as_array().unwrap() {
        assert_eq!(r["times"].as_array().unwrap().len(), r["observed"].as_array().unwrap().len());
        assert_eq!(r["times"].as_array().unwrap().len(), r["bound"].as_array().unwrap().len());
    }
    assert!(tmp.path().join("verify/curves/l1_linfty_bound.csv").exists());
    assert!(String::from_utf8_lossy(&out.stdout).contains("6/6 checks passed"));
}

#[test]
fn vanishing_data_uses_the_mollified_path() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(tmp.path(), "plateau");
    cfg["initial"] = json!({ "kind": "plateau", "a": 0.25, "b": 0.75, "height": 1.0 });
    cfg["grid"]["n"] = json!(101);
    cfg["schedule"] = json!([0.08, 0.04]);
    let path = write_config(tmp.path(), "run.json", &cfg);
    let out = sdl_with("solve", &path, &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let record: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("plateau/delta_convergence.json")).unwrap()).unwrap();
    assert_eq!(record["l1"].as_array().unwrap().len(), 1);
}

#[test]
fn converge_and_depend_emit_records() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(tmp.path(), "conv");
    cfg["grid"]["n"] = json!(21);
    let path = write_config(tmp.path(), "conv.json", &cfg);
    assert_eq!(code(&sdl_with("converge", &path, &[])), 0);
    let conv: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("conv/convergence.json")).unwrap()).unwrap();
    assert_eq!(conv["grid"]["differences"].as_array().unwrap().len(), 2);

    let path = write_config(tmp.path(), "dep.json", &small_config(tmp.path(), "dep"));
    let out = sdl_with("depend", &path, &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let dep: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("dep/dependence.json")).unwrap()).unwrap();
    assert_eq!(dep["pairs"].as_array().unwrap().len(), 3);
}

#[test]
fn sweep_runs_cells_and_records_rejections() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(tmp.path(), "sweep");
    cfg["sweep"] = json!({ "m": [-0.5, 0.5], "p": [0.5], "alpha": [3.0] });
    let path = write_config(tmp.path(), "sweep.json", &cfg);
    let out = sdl_with("sweep", &path, &["--workers", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let csv = fs::read_to_string(tmp.path().join("sweep/sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("-0.5,0.5,3,ok,") && rows[1].ends_with("true"));
    assert!(rows[2].contains("rejected"));
}
