//! Manifest-driven verification runs and their reports.

pub mod manifest;

use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use tsgeom::check::{evaluate, CheckReport, IdentityStat, Residuals, Verdict};
use tsgeom::contact::{
    corollary_c2_report, estimate_alpha_beta, transverse_curvature_report, transverse_properties_report,
    validate_axioms, verify_trans_sasakian, FactorClass, TransSasakianFactor,
};
use tsgeom::expr::DiffMode;
use tsgeom::geom::{sample_points, ChartDomain};
use tsgeom::harmonic::{
    astheno_residual, codifferential_report, dirichlet_energy_density, energy_box_quadrature, harmonicity_report,
    table1_suite, Harmonicity, Table1Report,
};
use tsgeom::product::{
    build_broken_product, build_product, connection_closed_form_report, curvature_closed_form_report,
    integrability_report, nabla_j_report, structure_report, ProductHermitian,
};

pub use manifest::{load_manifest, parse_manifest, ConfigError, Manifest, Overrides};
use manifest::{build_structure, Control};

pub const ENGINE: &str = env!("CARGO_PKG_NAME");
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Cells per axis of the energy quadrature.
pub const ENERGY_CELLS: usize = 3;

/// Exit codes.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// One check on one target (a factor or a product at one `(a, b)`).
#[derive(Clone, Debug, Serialize)]
pub struct CheckRun {
    pub check: String,
    pub target: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub verdict: Verdict,
    pub report: Option<CheckReport>,
    /// Check-specific values (harmonicity label, energy, dimension, …).
    pub details: Value,
    pub error: Option<String>,
    #[serde(skip)]
    pub seconds: f64,
}

impl CheckRun {
    fn new(check: &str, target: String, ab: Option<(f64, f64)>) -> Self {
        Self {
            check: check.to_string(),
            target,
            a: ab.map(|x| x.0),
            b: ab.map(|x| x.1),
            verdict: Verdict::Pass,
            report: None,
            details: Value::Null,
            error: None,
            seconds: 0.0,
        }
    }

    fn with_report(mut self, r: CheckReport) -> Self {
        self.verdict = r.verdict;
        self.report = Some(r);
        self
    }

    fn failed(mut self, e: impl ToString) -> Self {
        self.verdict = Verdict::Fail;
        self.error = Some(e.to_string());
        self
    }
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub manifest: Manifest,
    pub results: Vec<CheckRun>,
    pub table1: Option<Table1Report>,
    pub verdict: Verdict,
    pub total_seconds: f64,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.verdict == Verdict::Pass {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }
}

/// How sample points are chosen.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum Sampling {
    /// Seeded draws from the chart box (the manifest's count and seed).
    #[default]
    Seeded,
    /// A single explicit point, to reproduce a reported worst point.
    At(Vec<f64>),
}

struct Context<'m> {
    m: &'m Manifest,
    mode: DiffMode,
    sampling: &'m Sampling,
}

impl Context<'_> {
    fn points(&self, chart: &ChartDomain, key: impl Fn(&str) -> String) -> tsgeom::Result<Vec<Vec<f64>>> {
        if let Sampling::At(p) = self.sampling {
            if p.len() != chart.dim() {
                return Err(tsgeom::GeomError::ChartMismatch {
                    expected: chart.dim(),
                    found: p.len(),
                });
            }
            return Ok(vec![p.clone()]);
        }
        let mut chart = chart.clone();
        for (i, c) in chart.coords.clone().iter().enumerate() {
            if let Some([lo, hi]) = self.m.boxes.get(&key(c)) {
                chart.set_box(i, *lo, *hi)?;
            }
        }
        Ok(sample_points(&chart, self.m.count, self.m.seed))
    }

    fn factor_points(&self, f: &TransSasakianFactor, idx: usize) -> tsgeom::Result<Vec<Vec<f64>>> {
        self.points(&f.structure.chart, |c| format!("{c}_{}", idx + 1))
    }

    fn product_points(&self, p: &ProductHermitian) -> tsgeom::Result<Vec<Vec<f64>>> {
        self.points(&p.chart, str::to_string)
    }
}

/// The declared factors, unvalidated (for the factor checks) and validated
/// (for the product checks).
struct Factors {
    raw: Vec<TransSasakianFactor>,
    validated: Vec<Result<TransSasakianFactor, String>>,
}

fn prepare_factors(m: &Manifest) -> Factors {
    let mut raw = Vec::new();
    let mut validated = Vec::new();
    for spec in &m.factors {
        let (s, alpha, beta) = build_structure(spec).expect("factors are checked when the manifest is resolved");
        raw.push(TransSasakianFactor::unchecked(s.clone(), alpha, beta));
        validated.push(TransSasakianFactor::validated(s, alpha, beta, m.tol.max(1e-8)).map_err(|e| e.to_string()));
    }
    Factors { raw, validated }
}

fn factor_check(ctx: &Context, check: &str, f: &TransSasakianFactor, idx: usize) -> CheckRun {
    let run = CheckRun::new(check, format!("factor {}: {}", idx + 1, f.name()), None);
    let pts = match ctx.factor_points(f, idx) {
        Ok(p) => p,
        Err(e) => return run.failed(e),
    };
    let (tol, mode) = (ctx.m.tol, ctx.mode);
    let report = match check {
        "axioms" => validate_axioms(&f.structure, &pts, tol, mode),
        "trans_sasakian" => verify_trans_sasakian(f, &pts, tol, mode),
        "transverse" => {
            let mut r = CheckReport::new("transverse", tol);
            r.absorb("properties.", transverse_properties_report(f, &pts, tol, mode));
            r.absorb("curvature.", transverse_curvature_report(f, &pts, tol, mode));
            r.absorb("c2.", corollary_c2_report(f, &pts, tol, mode));
            r
        }
        _ => unreachable!("not a factor check: {check}"),
    };
    let mut run = run.with_report(report);
    run.details = json!({ "alpha": f.alpha, "beta": f.beta, "dim": f.structure.dim() });
    run
}

fn single_stat(check: &str, tol: f64, name: &str, value: f64, worst: Vec<f64>, verdict: Verdict) -> CheckReport {
    let mut r = CheckReport::new(check, tol);
    r.push(IdentityStat {
        name: name.to_string(),
        max: value,
        mean: value,
        worst_point: worst,
        verdict,
        informational: false,
    });
    r
}

fn product_check(ctx: &Context, check: &str, p: &ProductHermitian) -> CheckRun {
    let run = CheckRun::new(check, p.label(), Some((p.a, p.b)));
    let pts = match ctx.product_points(p) {
        Ok(x) => x,
        Err(e) => return run.failed(e),
    };
    let (tol, mode) = (ctx.m.tol, ctx.mode);
    match check {
        "structure" => run.with_report(structure_report(p, &pts, tol, mode)),
        "connection" => run.with_report(connection_closed_form_report(p, &pts, tol, mode)),
        "nabla_j" => run.with_report(nabla_j_report(p, &pts, tol, mode)),
        "curvature" => run.with_report(curvature_closed_form_report(p, &pts, tol, mode)),
        "integrability" => run.with_report(integrability_report(p, &pts, tol, mode)),
        "codifferential" => run.with_report(codifferential_report(p, &pts, tol, mode)),
        "harmonicity" => {
            let h = harmonicity_report(p, &pts, tol, mode);
            let mut run = run.with_report(h.report);
            run.details = json!({ "harmonicity": h.harmonicity });
            run
        }
        "astheno" => match astheno_residual(p, &pts, tol, mode) {
            Ok(a) => {
                let r = single_stat("astheno", tol, "ddc_omega_power", a.residual, a.worst_point, a.verdict);
                let mut run = run.with_report(r);
                run.details = json!({ "m": a.m });
                run
            }
            Err(e) => run.failed(e),
        },
        "energy" => {
            let density = evaluate("energy", tol, &pts, |pt| {
                let mut r = Residuals::new();
                r.info("density", dirichlet_energy_density(p, pt, mode)?);
                Ok(r)
            });
            match energy_box_quadrature(p, ENERGY_CELLS, mode) {
                Ok(e) if e.is_finite() => {
                    let mut run = run.with_report(density);
                    run.details = json!({ "energy": e, "cells_per_axis": ENERGY_CELLS });
                    run
                }
                Ok(e) => run.failed(format!("energy is not finite ({e})")),
                Err(e) => run.failed(e),
            }
        }
        _ => unreachable!("not a product check: {check}"),
    }
}

fn table1_runs(ctx: &Context) -> (Vec<CheckRun>, Option<Table1Report>) {
    let m = ctx.m;
    match table1_suite(&m.grid, m.count, m.seed, m.tol, ctx.mode) {
        Ok(t) => {
            let runs = t
                .rows
                .iter()
                .map(|row| {
                    let mut r = CheckReport::new("table1", m.tol);
                    for h in &row.runs {
                        r.absorb(&format!("(a={}, b={}).", h.a, h.b), h.report.clone());
                    }
                    let mut run = CheckRun::new("table1", format!("{}. {} x {}", row.sno, row.m1, row.m2), None);
                    run = run.with_report(r);
                    run.details = json!({
                        "sno": row.sno,
                        "alpha": row.alpha,
                        "beta": row.beta,
                        "harmonicity": row.harmonicity,
                        "runs": row.runs.iter().map(|h| json!({
                            "a": h.a, "b": h.b, "harmonicity": h.harmonicity,
                        })).collect::<Vec<_>>(),
                    });
                    run
                })
                .collect();
            (runs, Some(t))
        }
        Err(e) => (vec![CheckRun::new("table1", "table".into(), None).failed(e)], None),
    }
}

fn products(m: &Manifest, factors: &Factors) -> Vec<Result<ProductHermitian, String>> {
    let (f1, f2) = match (&factors.validated[0], &factors.validated[1]) {
        (Ok(f1), Ok(f2)) => (f1, f2),
        (Err(e), _) | (_, Err(e)) => return m.grid.iter().map(|_| Err(e.clone())).collect(),
    };
    m.grid
        .iter()
        .map(|&(a, b)| {
            let p = match m.control {
                Some(Control::BrokenJ) => build_broken_product(f1, f2, a, b),
                None => build_product(f1, f2, a, b),
            };
            p.map_err(|e| e.to_string())
        })
        .collect()
}

/// Execute the manifest's checks in declared order.
pub fn run(m: &Manifest, sampling: &Sampling) -> RunReport {
    let start = Instant::now();
    let ctx = Context {
        m,
        mode: m.diff_mode(),
        sampling,
    };
    let factors = prepare_factors(m);
    let needs_product = m.checks.iter().any(|c| manifest::PRODUCT_CHECKS.contains(&c.as_str()));
    let prods = if needs_product { products(m, &factors) } else { Vec::new() };
    let mut results = Vec::new();
    let mut table1 = None;
    for check in &m.checks {
        let c = check.as_str();
        let t0 = Instant::now();
        let mut runs = match c {
            "axioms" | "trans_sasakian" | "transverse" => factors
                .raw
                .iter()
                .enumerate()
                .map(|(i, f)| factor_check(&ctx, c, f, i))
                .collect(),
            "table1" => {
                let (runs, t) = table1_runs(&ctx);
                table1 = t;
                runs
            }
            _ => m
                .grid
                .iter()
                .zip(&prods)
                .map(|(&(a, b), p)| match p {
                    Ok(p) => product_check(&ctx, c, p),
                    Err(e) => CheckRun::new(c, format!("product (a={a}, b={b})"), Some((a, b))).failed(e),
                })
                .collect::<Vec<_>>(),
        };
        let per = t0.elapsed().as_secs_f64() / runs.len().max(1) as f64;
        for r in &mut runs {
            r.seconds = per;
        }
        results.extend(runs);
    }
    let verdict = results.iter().fold(Verdict::Pass, |v, r| v.worst(r.verdict));
    RunReport {
        manifest: m.clone(),
        results,
        table1,
        verdict,
        total_seconds: start.elapsed().as_secs_f64(),
    }
}

/// The report as a JSON value; object keys are sorted.
pub fn report_value(r: &RunReport, timings: bool) -> Value {
    let mut v = json!({
        "engine": { "name": ENGINE, "version": ENGINE_VERSION },
        "manifest": r.manifest.echo(),
        "results": r.results,
        "verdict": r.verdict,
    });
    if r.table1.is_some() {
        v["notes"] = json!([DIMENSION_NOTE]);
    }
    if timings {
        v["timings"] = json!({
            "total_seconds": r.total_seconds,
            "checks": r.results.iter().map(|c| json!({
                "check": c.check, "target": c.target, "seconds": c.seconds,
            })).collect::<Vec<_>>(),
        });
    }
    v
}

/// Canonical JSON: sorted keys, shortest round-trip floats, two-space indent,
/// trailing newline. Non-finite numbers become `null`.
pub fn emit_json(r: &RunReport, timings: bool) -> String {
    let mut s = serde_json::to_string_pretty(&report_value(r, timings)).expect("reports serialize");
    s.push('\n');
    s
}

fn fmt_num(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

fn fmt_residual(x: f64) -> String {
    format!("{x:.3e}")
}

fn yes_no(h: Harmonicity) -> &'static str {
    match h {
        Harmonicity::Harmonic => "Yes",
        Harmonicity::NotHarmonic => "No",
        Harmonicity::Inconclusive => "Inconclusive",
    }
}

pub const DIMENSION_NOTE: &str =
    "the source header gives the second factor dimension 2n2+2; all factors here are odd-dimensional (2n+1)";

pub const TABLE1_HEADER: &str = "| S.No. | M1 | M2 | α1 | α2 | β1 | β2 | Harmonicity |";

/// The particular-cases table in row order.
pub fn table1_markdown(t: &Table1Report) -> String {
    let mut s = String::new();
    s.push_str(TABLE1_HEADER);
    s.push_str("\n|---|---|---|---|---|---|---|---|\n");
    for row in &t.rows {
        s.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} | {} |\n",
            row.sno,
            row.m1,
            row.m2,
            fmt_num(row.alpha[0]),
            fmt_num(row.alpha[1]),
            fmt_num(row.beta[0]),
            fmt_num(row.beta[1]),
            yes_no(row.harmonicity)
        ));
    }
    s
}

pub fn emit_markdown(r: &RunReport) -> String {
    let mut s = format!(
        "# Verification report\n\nEngine: {ENGINE} {ENGINE_VERSION}  \nOverall verdict: **{}**\n",
        r.verdict.label()
    );
    if !r.results.is_empty() {
        s.push_str("\n| Check | Target | Verdict | Max residual | Worst identity | Worst point |\n");
        s.push_str("|---|---|---|---|---|---|\n");
        for c in &r.results {
            let (max, name, point) = match (&c.report, &c.error) {
                (_, Some(e)) => ("-".to_string(), format!("error: {e}"), String::new()),
                (Some(rep), None) => {
                    let worst = rep
                        .identities
                        .iter()
                        .filter(|i| !i.informational)
                        .max_by(|a, b| a.max.total_cmp(&b.max));
                    match worst {
                        Some(w) => (
                            fmt_residual(w.max),
                            w.name.clone(),
                            format!(
                                "({})",
                                w.worst_point.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", ")
                            ),
                        ),
                        None => ("-".into(), String::new(), String::new()),
                    }
                }
                (None, None) => ("-".into(), String::new(), String::new()),
            };
            s.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} |\n",
                c.check,
                c.target.replace('|', "\\|"),
                c.verdict.label(),
                max,
                name.replace('|', "\\|"),
                point
            ));
        }
    }
    if let Some(t) = &r.table1 {
        s.push_str("\n## Particular cases\n\n");
        s.push_str(&table1_markdown(t));
        s.push_str(&format!("\nNote: {DIMENSION_NOTE}.\n"));
    }
    s
}

/// Fitted type of one factor.
#[derive(Clone, Debug, Serialize)]
pub struct Classification {
    pub name: String,
    pub dim: usize,
    pub declared: [f64; 2],
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub residual: Option<f64>,
    pub divergence_mismatch: Option<f64>,
    pub conditioning: Option<f64>,
    pub class: FactorClass,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

/// Least-squares `(α, β)` and the class for every declared factor. The fit
/// passes when its residual and the divergence check are below `tol`.
pub fn classify(m: &Manifest, sampling: &Sampling) -> Vec<Classification> {
    let ctx = Context {
        m,
        mode: m.diff_mode(),
        sampling,
    };
    prepare_factors(m)
        .raw
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let dim = f.structure.dim();
            let mut c = Classification {
                name: format!("factor {}: {}", i + 1, f.name()),
                dim,
                declared: [f.alpha, f.beta],
                alpha: None,
                beta: None,
                residual: None,
                divergence_mismatch: None,
                conditioning: None,
                class: FactorClass::Unverified,
                verdict: Verdict::Fail,
                notes: Vec::new(),
            };
            let fit = ctx.factor_points(f, i).and_then(|pts| estimate_alpha_beta(&f.structure, &pts, ctx.mode));
            match fit {
                Ok(fit) => {
                    let v = Verdict::from_residual(fit.residual.max(fit.divergence_mismatch), m.tol);
                    let class = if v == Verdict::Pass {
                        FactorClass::from_constants(fit.alpha, fit.beta, m.tol.sqrt())
                    } else {
                        FactorClass::Unverified
                    };
                    if class == FactorClass::Proper && dim >= 5 {
                        c.notes.push("both constants are nonzero, which is excluded in dimension at least 5".into());
                    }
                    c.alpha = Some(fit.alpha);
                    c.beta = Some(fit.beta);
                    c.residual = Some(fit.residual);
                    c.divergence_mismatch = Some(fit.divergence_mismatch);
                    c.conditioning = Some(fit.conditioning);
                    c.class = class;
                    c.verdict = v;
                }
                Err(e) => c.notes.push(format!("error: {e}")),
            }
            c
        })
        .collect()
}

pub fn classify_json(m: &Manifest, cs: &[Classification]) -> String {
    let verdict = cs.iter().fold(Verdict::Pass, |v, c| v.worst(c.verdict));
    let v = json!({
        "engine": { "name": ENGINE, "version": ENGINE_VERSION },
        "manifest": m.echo(),
        "factors": cs,
        "verdict": verdict,
    });
    let mut s = serde_json::to_string_pretty(&v).expect("reports serialize");
    s.push('\n');
    s
}
