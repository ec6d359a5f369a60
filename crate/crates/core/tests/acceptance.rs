//! Acceptance run: the full-profile invariant suite plus a determinism check.
//! Prints one line per criterion and exits non-zero if any fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use peierls_lab::scenario::suite::{self, CriterionReport, Profile};

const SEED: u64 = 7;

/// Wall-clock budgets in seconds.
fn budget(id: u8) -> Option<f64> {
    match id {
        1 => Some(5.0),
        2 => Some(30.0),
        _ => None,
    }
}

fn line(id: u8, title: &str, passed: bool, detail: &str) -> bool {
    println!(
        "criterion {id:>2}: {} {title}{}",
        if passed { "PASS" } else { "FAIL" },
        detail
    );
    passed
}

fn criterion(id: u8) -> bool {
    let t0 = Instant::now();
    let rep: Result<CriterionReport, _> = suite::run_criterion(id, Profile::Full, SEED);
    let secs = t0.elapsed().as_secs_f64();
    let title = suite::title(id);
    let rep = match rep {
        Ok(r) => r,
        Err(e) => return line(id, title, false, &format!(" (error: {e})")),
    };
    let in_budget = budget(id).is_none_or(|b| secs < b);
    let mut detail = format!(" ({} checks, {secs:.1} s", rep.checks.len());
    if let Some(b) = budget(id) {
        detail.push_str(&format!(", budget {b:.0} s"));
    }
    detail.push(')');
    for c in rep.checks.iter().filter(|c| !c.passed) {
        detail.push_str(&format!(
            "\n    failed {}: {:.3e} vs {:.3e}",
            c.name, c.value, c.threshold
        ));
    }
    line(id, title, rep.passed && in_budget, &detail)
}

fn verify_once(config: &Path, out: &Path) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_peierls-lab"))
        .args(["verify", "--seed", &SEED.to_string(), "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?
        .status;
    if status.code() != Some(0) {
        return Err(format!("verify exited with {status}"));
    }
    std::fs::read(out.join("report.json")).map_err(|e| e.to_string())
}

fn determinism() -> bool {
    let title = "determinism of verify reports";
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/verify.toml");
    let tmp = match tempfile::tempdir() {
        Ok(t) => t,
        Err(e) => return line(12, title, false, &format!(" (error: {e})")),
    };
    let runs = verify_once(&config, &tmp.path().join("a"))
        .and_then(|a| Ok((a, verify_once(&config, &tmp.path().join("b"))?)));
    match runs {
        Ok((a, b)) => line(
            12,
            title,
            a == b,
            &format!(" ({} bytes, identical: {})", a.len(), a == b),
        ),
        Err(e) => line(12, title, false, &format!(" (error: {e})")),
    }
}

fn main() -> ExitCode {
    // libtest flags such as --nocapture or filters are accepted and ignored.
    let mut results: Vec<bool> = suite::CRITERIA
        .iter()
        .map(|(id, _)| criterion(*id))
        .collect();
    results.push(determinism());
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
