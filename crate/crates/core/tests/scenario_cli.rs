use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use peierls_lab::scenario::report::OutputDir;
use peierls_lab::scenario::{self, ScenarioConfig};

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn cli(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_peierls-lab"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env_remove("CFT_THREADS")
        .output()
        .unwrap()
}

fn report(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

const FREE: &str = "[lattice]\nn_t = 33\nn_x = 32\n\n[background]\nbuiltin = \"plane_wave\"\namplitude = 1.0\nmode = 1\n";

#[test]
fn missing_key_is_reported_by_name() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write(dir, "c.toml", "[lattice]\nn_t = 33\n");
    let o = cli(&["el-check"], &cfg, &dir.join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lattice.n_x"));
}

#[test]
fn unknown_field_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write(dir, "c.toml", &format!("{FREE}\n[run]\nseeed = 3\n"));
    let o = cli(&["el-check"], &cfg, &dir.join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seeed"));
}

#[test]
fn el_check_passes_and_fails_on_tolerance() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let loose = write(
        dir,
        "loose.toml",
        &format!("{FREE}\n[run]\ntolerance = 1e-1\n"),
    );
    let o = cli(&["el-check"], &loose, &dir.join("a"));
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(dir.join("a/el_rows.csv").exists());
    assert!(dir.join("a/timings.json").exists());
    let r = report(&dir.join("a"));
    assert_eq!(r["command"], "el-check");
    assert_eq!(r["passed"], true);
    let tight = write(
        dir,
        "tight.toml",
        &format!("{FREE}\n[run]\ntolerance = 1e-15\n"),
    );
    assert_eq!(
        cli(&["el-check"], &tight, &dir.join("b")).status.code(),
        Some(2)
    );
}

#[test]
fn json_configs_are_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write(
        dir,
        "c.json",
        r#"{"lattice": {"n_t": 17, "n_x": 16}, "background": {"builtin": "constant", "value": [0.3]}, "run": {"tolerance": 1e-12}}"#,
    );
    let o = cli(&["el-check"], &cfg, &dir.join("out"));
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn disjoint_bracket_vanishes() {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/bracket_disjoint.toml");
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let o = cli(&["bracket"], &cfg, dir);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = report(dir);
    assert_eq!(r["result"]["value"], 0.0);
    assert_eq!(r["result"]["causally_disjoint"], true);
    assert!(dir.join("bracket.csv").exists());
}

#[test]
fn exact_convergence_is_marked() {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/converge_constant.toml");
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let o = cli(&["converge"], &cfg, dir);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(std::fs::read_to_string(dir.join("converge.csv"))
        .unwrap()
        .contains("exact"));
}

#[test]
fn green_dumps_dense_kernel() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write(dir, "c.toml", "[lattice]\nn_t = 9\nn_x = 8\n\n[run]\nkind = \"causal\"\ndense_kernel = true\nsource = [4, 4]\n");
    let o = cli(&["green"], &cfg, &dir.join("out"));
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(dir.join("out/response.csv").exists());
    assert!(dir.join("out/kernel_causal.json").exists());
}

#[test]
fn verify_subset_and_seed_override() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write(dir, "c.toml", "[run]\nseed = 1\ncriteria = [1, 3]\n");
    let o = Command::new(env!("CARGO_BIN_EXE_peierls-lab"))
        .args(["verify", "--seed", "9", "--threads", "1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = report(&dir.join("out"));
    assert_eq!(r["seed"], 9);
    let ids: Vec<u64> = r["result"]["criteria"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["id"].as_u64().unwrap())
        .collect();
    assert_eq!(ids, vec![1, 3]);
    assert!(r.get("timings").is_none());
}

#[test]
fn bad_thread_variable_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write(dir, "c.toml", FREE);
    let o = Command::new(env!("CARGO_BIN_EXE_peierls-lab"))
        .args(["el-check", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .env("CFT_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("CFT_THREADS"));
}

#[test]
fn library_entry_point_matches_cli() {
    let cfg = ScenarioConfig::from_toml(FREE).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = OutputDir::create(dir).unwrap();
    let outcome = scenario::run(scenario::Command::ElCheck, &cfg, &out).unwrap();
    assert_eq!(outcome.exit_code(), if outcome.passed { 0 } else { 2 });
    assert!(dir.join("report.json").exists());
}

#[test]
fn non_finite_numbers_are_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = OutputDir::create(dir).unwrap();
    assert!(out.write_json("ok.json", &vec![1.0, 2.0]).is_ok());
    let err = out
        .write_json("bad.json", &serde_json::json!({ "a": [1.0, f64::NAN] }))
        .unwrap_err();
    assert!(err.to_string().contains("a[1]"), "{err}");
}
