//! Subcommand orchestration: build inputs from a config, run, persist artifacts.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use super::config::ScenarioConfig;
use super::converge::{self, ConvergenceTable};
use super::fixtures::rng;
use super::report::{finite_or_max, require_finite, OutputDir, Report, REPORT_FILE};
use super::suite::{self, CriterionReport};
use crate::error::{Error, Result};
use crate::green::{GreenKind, GreenOperator, DEFAULT_DENSE_LIMIT};
use crate::lattice::{SitePoint, SiteSet};
use crate::peierls::{peierls_bracket, BracketReport};
use crate::variational::{el_kernel, linearize};
use crate::wavemaps::{run_wavemap_scenario, ScenarioReport, PRESETS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    ElCheck,
    Green,
    Bracket,
    Verify,
    Converge,
    Wavemap,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::ElCheck,
        Command::Green,
        Command::Bracket,
        Command::Verify,
        Command::Converge,
        Command::Wavemap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::ElCheck => "el-check",
            Command::Green => "green",
            Command::Bracket => "bracket",
            Command::Verify => "verify",
            Command::Converge => "converge",
            Command::Wavemap => "wavemap",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::UnknownName(s.to_string()))
    }
}

/// What a finished run reports back to the caller.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    /// One line per headline result, for the terminal.
    pub summary: Vec<String>,
}

impl Outcome {
    /// 0 on success, 2 on verification failure.
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            2
        }
    }
}

pub fn run(cmd: Command, cfg: &ScenarioConfig, out: &OutputDir) -> Result<Outcome> {
    let mut timings = BTreeMap::new();
    let start = Instant::now();
    let outcome = match cmd {
        Command::ElCheck => el_check(cfg, out)?,
        Command::Green => green(cfg, out)?,
        Command::Bracket => bracket(cfg, out, &mut timings)?,
        Command::Verify => verify(cfg, out, &mut timings)?,
        Command::Converge => converge_cmd(cfg, out)?,
        Command::Wavemap => wavemap(cfg, out)?,
    };
    timings.insert("total".into(), start.elapsed().as_secs_f64());
    out.write_timings(&timings)?;
    Ok(outcome)
}

fn write_report<T: Serialize>(
    out: &OutputDir,
    cfg: &ScenarioConfig,
    cmd: Command,
    passed: bool,
    result: T,
) -> Result<()> {
    let report = Report {
        tool: "peierls-lab",
        version: env!("CARGO_PKG_VERSION"),
        command: cmd.name(),
        seed: cfg.seed(),
        passed,
        config: cfg,
        result,
    };
    out.write_json(REPORT_FILE, &report)?;
    Ok(())
}

// el-check ----------------------------------------------------------------

#[derive(Debug, Serialize)]
struct ElCheckResult {
    lagrangian: String,
    target: String,
    n_t: usize,
    n_x: usize,
    /// Largest `|E| / vol` away from the boundary rows.
    max_interior_residual: f64,
    max_boundary_residual: f64,
    boundary_rows: Vec<usize>,
    normally_hyperbolic: bool,
    factor_min: f64,
    factor_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    tolerance: Option<f64>,
}

fn el_check(cfg: &ScenarioConfig, out: &OutputDir) -> Result<Outcome> {
    let lat = cfg.build_lattice()?;
    let target = cfg.build_target()?;
    let gl = cfg.build_lagrangian(&target)?;
    let phi = cfg.build_background(lat.clone(), target.clone(), &mut rng(cfg.seed()))?;
    let e = el_kernel(&gl, &phi)?;
    let n = phi.n();
    let mut rows = vec![0.0f64; lat.n_t];
    for s in 0..lat.n_sites() {
        let it = s / lat.n_x;
        let v = lat.vol_weight(s);
        for i in 0..n {
            rows[it] = rows[it].max(e.components[s * n + i].abs() / v);
        }
    }
    let interior = (0..lat.n_t)
        .filter(|&it| !e.is_boundary_row(it))
        .fold(0.0f64, |m, it| m.max(rows[it]));
    let boundary = (0..lat.n_t)
        .filter(|&it| e.is_boundary_row(it))
        .fold(0.0f64, |m, it| m.max(rows[it]));
    let nh = linearize(&gl, &phi, &phi.target)?.is_normally_hyperbolic(1e-12);
    let res = ElCheckResult {
        lagrangian: cfg.lagrangian.name.clone(),
        target: target.name(),
        n_t: lat.n_t,
        n_x: lat.n_x,
        max_interior_residual: require_finite("max_interior_residual", interior)?,
        max_boundary_residual: require_finite("max_boundary_residual", boundary)?,
        boundary_rows: e.boundary_rows.clone(),
        normally_hyperbolic: nh.hyperbolic,
        factor_min: finite_or_max(nh.c_min),
        factor_max: finite_or_max(nh.c_max),
        tolerance: cfg.run.tolerance,
    };
    let passed = nh.hyperbolic && cfg.run.tolerance.is_none_or(|t| interior <= t);
    let mut csv = String::from("it,t,max_abs_residual_per_volume,boundary\n");
    for (it, r) in rows.iter().enumerate() {
        csv.push_str(&format!(
            "{it},{:.12e},{:.12e},{}\n",
            it as f64 * lat.dt,
            r,
            e.is_boundary_row(it)
        ));
    }
    out.write_text("el_rows.csv", &csv)?;
    let summary = vec![
        format!("interior EL residual {:.3e}", res.max_interior_residual),
        format!(
            "normally hyperbolic: {} (c in [{:.6}, {:.6}])",
            nh.hyperbolic, res.factor_min, res.factor_max
        ),
    ];
    write_report(out, cfg, Command::ElCheck, passed, res)?;
    Ok(Outcome { passed, summary })
}

// green -------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct GreenResult {
    kind: GreenKind,
    source: [usize; 2],
    /// Largest `|G e|` outside the causal region of the source; exactly 0 when the support law holds.
    outside_max: f64,
    support_exact: bool,
    response_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    kernel_file: Option<String>,
}

fn green(cfg: &ScenarioConfig, out: &OutputDir) -> Result<Outcome> {
    let lat = cfg.build_lattice()?;
    let target = cfg.build_target()?;
    let gl = cfg.build_lagrangian(&target)?;
    let phi = cfg.build_background(lat.clone(), target.clone(), &mut rng(cfg.seed()))?;
    let kind = cfg.green_kind()?;
    let [it, ix] = cfg.run.source.unwrap_or([lat.n_t / 2, lat.n_x / 2]);
    if it >= lat.n_t || ix >= lat.n_x {
        return Err(Error::config(
            "run.source",
            format!("site ({it}, {ix}) is outside the lattice"),
        ));
    }
    let op = linearize(&gl, &phi, &phi.target)?;
    let green = GreenOperator::new(Arc::new(op), kind)?;
    let n = phi.n();
    let p = SitePoint::new(it, ix);
    let mut e = vec![0.0; lat.n_sites() * n];
    e[lat.site(p) * n] = 1.0;
    let resp = green.apply_raw(&e)?;
    let allowed: SiteSet = match kind {
        GreenKind::Retarded => lat.causal_future(p),
        GreenKind::Advanced => lat.causal_past(p),
        GreenKind::Causal => lat.causal_future(p).union(&lat.causal_past(p)),
    };
    let mut outside: f64 = 0.0;
    let mut csv = String::from("it,ix,t,x");
    for i in 0..n {
        csv.push_str(&format!(",value_{i}"));
    }
    csv.push('\n');
    for s in 0..lat.n_sites() {
        let q = lat.point(s);
        csv.push_str(&format!(
            "{},{},{:.12e},{:.12e}",
            q.it,
            q.ix,
            q.it as f64 * lat.dt,
            q.ix as f64 * lat.dx
        ));
        for i in 0..n {
            let v = resp[s * n + i];
            if !allowed.contains_index(s) {
                outside = outside.max(v.abs());
            }
            csv.push_str(&format!(",{v:.12e}"));
        }
        csv.push('\n');
    }
    out.write_text("response.csv", &csv)?;
    let kernel_file = if cfg.run.dense_kernel {
        let m = green.dense_kernel(DEFAULT_DENSE_LIMIT)?;
        let name = format!("kernel_{}.json", format!("{kind:?}").to_lowercase());
        let dim = lat.n_sites() * n;
        let rows: Vec<&[f64]> = m.chunks(dim).collect();
        out.write_json(
            &name,
            &serde_json::json!({ "n_t": lat.n_t, "n_x": lat.n_x, "n": n, "dim": dim, "matrix": rows }),
        )?;
        Some(name)
    } else {
        None
    };
    let res = GreenResult {
        kind,
        source: [it, ix],
        outside_max: require_finite("outside_max", outside)?,
        support_exact: outside == 0.0,
        response_max: require_finite(
            "response_max",
            resp.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        )?,
        kernel_file,
    };
    let passed = res.support_exact;
    let summary = vec![format!(
        "{kind:?} response outside the causal region: {:.3e}",
        res.outside_max
    )];
    write_report(out, cfg, Command::Green, passed, res)?;
    Ok(Outcome { passed, summary })
}

// bracket -----------------------------------------------------------------

#[derive(Debug, Serialize)]
struct BracketResult {
    f: String,
    g: String,
    #[serde(flatten)]
    bracket: BracketReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    causally_disjoint: Option<bool>,
    scale: f64,
    tolerance: f64,
}

fn bracket(
    cfg: &ScenarioConfig,
    out: &OutputDir,
    timings: &mut BTreeMap<String, f64>,
) -> Result<Outcome> {
    let lat = cfg.build_lattice()?;
    let target = cfg.build_target()?;
    let gl = cfg.build_lagrangian(&target)?;
    let phi = cfg.build_background(lat.clone(), target.clone(), &mut rng(cfg.seed()))?;
    let [fa, fb] = match &cfg.run.bracket {
        Some(pair) => pair.clone(),
        None => match cfg.functionals.as_slice() {
            [a, b, ..] => [a.name.clone(), b.name.clone()],
            _ => {
                return Err(Error::config(
                    "functionals",
                    "bracket needs two functionals",
                ))
            }
        },
    };
    let f = cfg.build_functional(&fa, &lat, &gl, phi.n())?;
    let g = cfg.build_functional(&fb, &lat, &gl, phi.n())?;
    let rep = peierls_bracket(&gl, &f, &g, &phi)?;
    for (k, v) in &rep.timings {
        timings.insert(format!("bracket.{k}"), *v);
    }
    let disjoint = match (&f.support, &g.support) {
        (Some(a), Some(b)) => Some(lat.causally_disjoint(a, b)?),
        _ => None,
    };
    let scale = 1f64
        .max(rep.retarded_product.abs())
        .max(rep.advanced_product.abs());
    let tol = cfg.run.tolerance.unwrap_or(1e-12);
    let vanishes = rep.value.abs() <= tol * scale;
    let passed = rep.support_check && rep.forms_agree && (disjoint != Some(true) || vanishes);
    for (name, v) in [
        ("value", rep.value),
        ("retarded_product", rep.retarded_product),
        ("advanced_product", rep.advanced_product),
        ("alternative_form", rep.alternative_form),
    ] {
        require_finite(name, v)?;
    }
    out.write_text(
        "bracket.csv",
        &format!(
            "f,g,value,retarded_product,advanced_product,alternative_form,support_check,causally_disjoint\n\
             {fa},{fb},{:.12e},{:.12e},{:.12e},{:.12e},{},{}\n",
            rep.value,
            rep.retarded_product,
            rep.advanced_product,
            rep.alternative_form,
            rep.support_check,
            disjoint.map_or("unknown".to_string(), |d| d.to_string()),
        ),
    )?;
    let summary = vec![
        format!("{{{fa}, {fb}}} = {:.6e}", rep.value),
        format!(
            "support check: {}, causally disjoint: {:?}",
            rep.support_check, disjoint
        ),
    ];
    let res = BracketResult {
        f: fa,
        g: fb,
        bracket: rep,
        causally_disjoint: disjoint,
        scale,
        tolerance: tol,
    };
    write_report(out, cfg, Command::Bracket, passed, res)?;
    Ok(Outcome { passed, summary })
}

// verify ------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct VerifyResult {
    profile: suite::Profile,
    criteria: Vec<CriterionReport>,
}

/// Run the selected criteria in id order and return their reports with wall times.
pub fn run_suite(cfg: &ScenarioConfig) -> Result<Vec<(CriterionReport, f64)>> {
    let ids: Vec<u8> = cfg
        .run
        .criteria
        .clone()
        .unwrap_or_else(|| suite::CRITERIA.iter().map(|(i, _)| *i).collect());
    ids.iter()
        .map(|&id| {
            let t = Instant::now();
            let r = suite::run_criterion(id, cfg.profile(), cfg.seed())?;
            Ok((r, t.elapsed().as_secs_f64()))
        })
        .collect()
}

fn verify(
    cfg: &ScenarioConfig,
    out: &OutputDir,
    timings: &mut BTreeMap<String, f64>,
) -> Result<Outcome> {
    let results = run_suite(cfg)?;
    let mut csv = String::from("criterion,title,check,passed,value,threshold\n");
    let mut summary = Vec::new();
    let mut criteria = Vec::new();
    for (r, secs) in results {
        timings.insert(format!("criterion_{:02}", r.id), secs);
        for c in &r.checks {
            csv.push_str(&format!(
                "{},{},{},{},{:.6e},{:.6e}\n",
                r.id,
                csv_field(&r.title),
                csv_field(&c.name),
                c.passed,
                c.value,
                c.threshold
            ));
        }
        summary.push(format!(
            "criterion {:>2} {}: {}",
            r.id,
            r.title,
            if r.passed { "pass" } else { "FAIL" }
        ));
        criteria.push(r);
    }
    out.write_text("verify.csv", &csv)?;
    let passed = criteria.iter().all(|c| c.passed);
    write_report(
        out,
        cfg,
        Command::Verify,
        passed,
        VerifyResult {
            profile: cfg.profile(),
            criteria,
        },
    )?;
    Ok(Outcome { passed, summary })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

// converge ----------------------------------------------------------------

#[derive(Debug, Serialize)]
struct ConvergeResult {
    #[serde(flatten)]
    table: ConvergenceTable,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    required_rate: Option<f64>,
}

fn converge_cmd(cfg: &ScenarioConfig, out: &OutputDir) -> Result<Outcome> {
    let quantity = cfg
        .run
        .quantity
        .ok_or_else(|| Error::config("run.quantity", "missing required key"))?;
    let resolutions = cfg
        .run
        .resolutions
        .clone()
        .ok_or_else(|| Error::config("run.resolutions", "missing required key"))?;
    let table = converge::run(quantity, &resolutions)?;
    for r in &table.rows {
        require_finite("error", r.error)?;
    }
    out.write_text("converge.csv", &table.to_csv())?;
    let min_rate = table.min_rate();
    let passed = match cfg.run.min_rate {
        Some(req) => table.exact || min_rate.is_some_and(|m| m >= req),
        None => true,
    };
    let mut summary: Vec<String> = table
        .rows
        .iter()
        .map(|r| match r.rate {
            Some(rate) => format!("{:>6}  error {:.4e}  rate {rate:.3}", r.resolution, r.error),
            None => format!("{:>6}  error {:.4e}", r.resolution, r.error),
        })
        .collect();
    if table.exact {
        summary.push("errors identically zero: exact".into());
    }
    let res = ConvergeResult {
        table,
        min_rate,
        required_rate: cfg.run.min_rate,
    };
    write_report(out, cfg, Command::Converge, passed, res)?;
    Ok(Outcome { passed, summary })
}

// wavemap -----------------------------------------------------------------

fn wavemap(cfg: &ScenarioConfig, out: &OutputDir) -> Result<Outcome> {
    let presets: Vec<String> = match &cfg.run.preset {
        Some(p) => vec![p.clone()],
        None => PRESETS.iter().map(|s| s.to_string()).collect(),
    };
    let levels = cfg.run.levels.unwrap_or(3);
    if levels == 0 {
        return Err(Error::config("run.levels", "must be at least 1"));
    }
    let reports: Vec<ScenarioReport> = presets
        .iter()
        .map(|p| {
            run_wavemap_scenario(p, levels).map_err(|e| match e {
                Error::UnknownName(n) => {
                    Error::config("run.preset", format!("unknown preset `{n}`"))
                }
                other => other,
            })
        })
        .collect::<Result<_>>()?;
    let mut summary = Vec::new();
    for r in &reports {
        let mut csv = String::from(
            "n_t,n_x,value,reference,difference,antisymmetry,support_check,disjoint_value\n",
        );
        for row in &r.rows {
            csv.push_str(&format!(
                "{},{},{:.12e},{:.12e},{:.12e},{:.12e},{},{:.12e}\n",
                row.n_t,
                row.n_x,
                require_finite("value", row.value)?,
                row.reference,
                row.difference,
                row.antisymmetry,
                row.support_check,
                row.disjoint_value
            ));
        }
        out.write_text(&format!("wavemap_{}.csv", r.preset), &csv)?;
        summary.push(format!(
            "{}: {}",
            r.preset,
            if r.passed { "pass" } else { "FAIL" }
        ));
    }
    let passed = reports.iter().all(|r| r.passed);
    write_report(out, cfg, Command::Wavemap, passed, reports)?;
    Ok(Outcome { passed, summary })
}
