//! Acceptance suite: one pass/fail line per criterion.
//!
//! Runs without the libtest harness so the lines are always printed. The
//! process fails if a criterion outside `KNOWN_RED` fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use tsgeom::check::CheckReport;
use tsgeom::contact::{
    builtin_factor, corollary_c2_report, kenmotsu_warped_with, model, transverse_curvature_report,
    transverse_properties_report, validate_axioms, verify_trans_sasakian, TransSasakianFactor, BUILTIN_NAMES,
};
use tsgeom::expr::DiffMode;
use tsgeom::geom::sample_points;
use tsgeom::harmonic::{
    astheno_residual, codifferential_j, codifferential_report, harmonicity_report, representative, table1_suite,
    Harmonicity, TABLE1_PAIRS,
};
use tsgeom::product::{
    build_product, connection_closed_form_report, curvature_closed_form_report, integrability_report, nabla_j_report,
    structure_report, ProductHermitian,
};
use tsgeom::riemann::{scale_vec, sub_vec};

const SEED: u64 = 7;
const POINTS: usize = 100;
const GRID: [(f64, f64); 4] = [(0.0, 1.0), (1.0, 1.0), (-2.0, 3.0), (0.5, -1.0)];
const JET: DiffMode = DiffMode::Jet;
const FD: DiffMode = DiffMode::FiniteDiff { step: 1e-3 };

const TOL_AXIOMS: f64 = 1e-7;
const LIMIT_AXIOMS_SECONDS: f64 = 10.0;
const TOL_TRANSVERSE: f64 = 1e-6;
const TOL_C2: f64 = 1e-6;
const TOL_CLOSED_FORMS: f64 = 1e-6;
const TOL_NIJENHUIS: f64 = 1e-6;
const TOL_CODIFFERENTIAL: f64 = 1e-6;
const TOL_HARMONIC: f64 = 1e-6;
const TOL_P1: f64 = 1e-5;
const LIMIT_TABLE_SECONDS: f64 = 300.0;
const TOL_ASTHENO: f64 = 1e-6;
const TOL_JET_FD: f64 = 1e-4;

/// Criteria whose stated identities do not hold numerically for every
/// factor; the failing identities are printed with their residuals.
const KNOWN_RED: [usize; 4] = [2, 4, 6, 8];

struct Outcome {
    pass: bool,
    summary: String,
    details: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, summary: impl Into<String>) -> Self {
        Self {
            pass,
            summary: summary.into(),
            details: Vec::new(),
        }
    }
}

fn builtins() -> Vec<TransSasakianFactor> {
    BUILTIN_NAMES.iter().map(|n| builtin_factor(n).unwrap()).collect()
}

fn factor_points(f: &TransSasakianFactor) -> Vec<Vec<f64>> {
    sample_points(&f.structure.chart, POINTS, SEED)
}

fn product_points(p: &ProductHermitian) -> Vec<Vec<f64>> {
    sample_points(&p.chart, POINTS, SEED)
}

/// Every Table-1 pair on every grid value.
fn products() -> Vec<ProductHermitian> {
    let mut out = Vec::new();
    for (c1, c2) in TABLE1_PAIRS {
        let (f1, f2) = (representative(c1).unwrap(), representative(c2).unwrap());
        for (a, b) in GRID {
            out.push(build_product(&f1, &f2, a, b).unwrap());
        }
    }
    out
}

/// Non-informational identities of `r` at or above `tol`, as `name = max`.
fn over(r: &CheckReport, tol: f64) -> Vec<(String, f64)> {
    let mut v: Vec<(String, f64)> = r
        .identities
        .iter()
        .filter(|s| !s.informational && !(s.max < tol))
        .map(|s| (s.name.clone(), s.max))
        .collect();
    v.extend(r.notes.iter().filter(|n| n.starts_with("error")).map(|n| (n.clone(), f64::NAN)));
    v
}

fn worst(r: &CheckReport) -> f64 {
    r.max_residual()
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let mut max = 0.0f64;
    let mut details = Vec::new();
    for f in builtins() {
        let pts = factor_points(&f);
        for r in [
            validate_axioms(&f.structure, &pts, TOL_AXIOMS, JET),
            verify_trans_sasakian(&f, &pts, TOL_AXIOMS, JET),
        ] {
            max = max.max(worst(&r));
            for (n, v) in over(&r, TOL_AXIOMS) {
                details.push(format!("{}: {}.{n} = {v:e}", f.name(), r.check));
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = details.is_empty() && max < TOL_AXIOMS && secs < LIMIT_AXIOMS_SECONDS;
    let mut o = Outcome::new(
        pass,
        format!("axioms, normality and structure equations on 3 built-ins: max {max:.2e} (tol {TOL_AXIOMS:e}), {secs:.2} s (limit {LIMIT_AXIOMS_SECONDS} s)"),
    );
    o.details = details;
    o
}

fn criterion_2() -> Outcome {
    let mut details = Vec::new();
    let mut max = 0.0f64;
    let mut iv = Vec::new();
    for f in builtins() {
        let pts = factor_points(&f);
        let props = transverse_properties_report(&f, &pts, TOL_TRANSVERSE, JET);
        let curv = transverse_curvature_report(&f, &pts, TOL_TRANSVERSE, JET);
        for r in [&props, &curv] {
            max = max.max(worst(r));
            for (n, v) in over(r, TOL_TRANSVERSE) {
                details.push(format!("{}: {}.{n} = {v:e}", f.name(), r.check));
            }
        }
        let get = |n: &str| curv.identity(n).map(|s| s.max).unwrap_or(f64::NAN);
        iv.push(format!(
            "{}: printed-vs-generic {:.1e}, generic side {:.1e}, printed side {:.1e}",
            f.name(),
            get("iv_r_xi"),
            get("iv_generic_side"),
            get("iv_printed_side")
        ));
    }
    let mut o = Outcome::new(
        details.is_empty(),
        format!("transverse decompositions and identities (i)-(iv) on 3 built-ins: max {max:.2e} (tol {TOL_TRANSVERSE:e})"),
    );
    o.details = details;
    o.details.extend(iv.into_iter().map(|s| format!("(iv) {s}")));
    o
}

fn criterion_3() -> Outcome {
    let mut max = 0.0f64;
    let mut n = 0;
    for f in builtins().into_iter().filter(|f| f.alpha * f.beta == 0.0) {
        let r = corollary_c2_report(&f, &factor_points(&f), TOL_C2, JET);
        max = max.max(worst(&r));
        n += 1;
    }
    Outcome::new(
        max < TOL_C2,
        format!("phi R(U,phiU)W = R(U,phiU)phiW on {n} built-ins with alpha*beta = 0: max {max:.2e} (tol {TOL_C2:e})"),
    )
}

/// How many readings of each ambiguous group are within tolerance.
fn variant_counts(r: &CheckReport, tol: f64) -> Vec<(String, usize)> {
    ["l3_i", "l3_iv"]
        .iter()
        .filter_map(|g| {
            let prefix = format!("{g}[");
            let readings: Vec<_> = r.identities.iter().filter(|s| s.name.starts_with(&prefix)).collect();
            (!readings.is_empty()).then(|| (g.to_string(), readings.iter().filter(|s| s.max < tol).count()))
        })
        .collect()
}

fn criterion_4() -> Outcome {
    let mut failing = std::collections::BTreeMap::<String, (usize, f64)>::new();
    let mut max_nabla_xi = 0.0f64;
    let mut max_r_xi = 0.0f64;
    let mut max_xi_xi = 0.0f64;
    let mut runs = 0;
    let mut ambiguous = Vec::new();
    for p in products() {
        let pts = product_points(&p);
        let c = connection_closed_form_report(&p, &pts, TOL_CLOSED_FORMS, JET);
        let n = nabla_j_report(&p, &pts, TOL_CLOSED_FORMS, JET);
        let r = curvature_closed_form_report(&p, &pts, TOL_CLOSED_FORMS, JET);
        for name in ["xi1_xi1", "xi2_xi2", "xi1_xi2", "xi2_xi1"] {
            max_xi_xi = max_xi_xi.max(c.identity(name).unwrap().max);
        }
        max_nabla_xi = max_nabla_xi.max(n.identity("nabla_xi1_j").unwrap().max.max(n.identity("nabla_xi2_j").unwrap().max));
        max_r_xi = max_r_xi.max(r.identity("r_xi1_xi2").unwrap().max);
        for rep in [&c, &n, &r] {
            for (name, v) in over(rep, TOL_CLOSED_FORMS) {
                let e = failing.entry(format!("{}.{name}", rep.check)).or_insert((0, 0.0));
                e.0 += 1;
                e.1 = e.1.max(v);
            }
        }
        runs += 1;
    }
    // Readings of the ambiguous printed forms, separated by a β = 2 factor.
    let k2 = TransSasakianFactor::validated(kenmotsu_warped_with(2.0).unwrap(), 0.0, 2.0, 1e-8).unwrap();
    for f1 in builtins().into_iter().chain([k2.clone()]) {
        for f2 in builtins().into_iter().chain([k2.clone()]) {
            for (a, b) in GRID {
                let p = build_product(&f1, &f2, a, b).unwrap();
                let n = nabla_j_report(&p, &product_points(&p), TOL_CLOSED_FORMS, JET);
                for (g, k) in variant_counts(&n, TOL_CLOSED_FORMS) {
                    if k != 1 {
                        ambiguous.push(format!("{} {g}: {k} readings within tol", p.label()));
                    }
                }
            }
        }
    }
    let pass = failing.is_empty() && ambiguous.is_empty();
    let mut o = Outcome::new(
        pass,
        format!(
            "connection, nabla J and curvature closed forms on {runs} product runs: {} identities over tol {TOL_CLOSED_FORMS:e}; \
             max |nabla_xi_i xi_j| {max_xi_xi:.1e}, |nabla_xi J| {max_nabla_xi:.1e}, |R(xi1,xi2)| {max_r_xi:.1e}",
            failing.len()
        ),
    );
    o.details = failing
        .into_iter()
        .map(|(k, (n, v))| format!("{k}: fails on {n}/{runs} runs, max {v:.3e}"))
        .collect();
    if ambiguous.is_empty() {
        o.details.push("ambiguous readings (l3_i, l3_iv): exactly one reading within tol wherever any reading matches".into());
    }
    o.details.extend(ambiguous);
    o
}

fn criterion_5() -> Outcome {
    let mut max = 0.0f64;
    let mut n = 0;
    for p in products() {
        let r = integrability_report(&p, &product_points(&p), TOL_NIJENHUIS, JET);
        max = max.max(r.max_with_prefix("nijenhuis"));
        n += 1;
    }
    Outcome::new(max < TOL_NIJENHUIS, format!("Nijenhuis tensor of J on {n} product runs: max {max:.2e} (tol {TOL_NIJENHUIS:e})"))
}

fn criterion_6() -> Outcome {
    let mut failing = Vec::new();
    let mut max_nabla = 0.0f64;
    let mut max_closed = 0.0f64;
    for p in products() {
        let r = codifferential_report(&p, &product_points(&p), TOL_CODIFFERENTIAL, JET);
        let cf = r.identity("closed_form").unwrap().max;
        max_closed = max_closed.max(cf);
        max_nabla = max_nabla.max(r.identity("nabla_delta_j").unwrap().max);
        if !(cf < TOL_CODIFFERENTIAL) {
            failing.push(format!("{}: frame sum vs closed form {cf:.3e}", p.label()));
        }
    }
    // Spot values.
    let mut spots = Vec::new();
    let cases = [
        ("sasakian_heisenberg", "cosymplectic_flat", 1.0, 1.0, [2.0, 0.0]),
        ("kenmotsu_warped", "kenmotsu_warped", 1.0, 1.0, [0.0, 4.0]),
    ];
    let mut spots_ok = true;
    for (n1, n2, a, b, [c1, c2]) in cases {
        let p = build_product(&builtin_factor(n1).unwrap(), &builtin_factor(n2).unwrap(), a, b).unwrap();
        let mut frame_err = 0.0f64;
        let mut closed_err = 0.0f64;
        for pt in product_points(&p).iter().take(10) {
            let c = p.at(pt, JET).unwrap();
            let expect: Vec<f64> = scale_vec(&c.xi0[0], c1).iter().zip(scale_vec(&c.xi0[1], c2)).map(|(x, y)| x + y).collect();
            let (frame, closed) = codifferential_j(&p, pt, JET).unwrap();
            frame_err = frame_err.max(c.metric.vector_norm(&sub_vec(&frame, &expect)));
            closed_err = closed_err.max(c.metric.vector_norm(&sub_vec(&closed, &expect)));
        }
        spots_ok &= frame_err < TOL_CODIFFERENTIAL;
        spots.push(format!(
            "spot {n1} x {n2} (a={a}, b={b}) = {c1} xi1 + {c2} xi2: frame sum off by {frame_err:.3e}, closed form off by {closed_err:.3e}"
        ));
    }
    let pass = failing.is_empty() && max_nabla < TOL_CODIFFERENTIAL && spots_ok;
    let mut o = Outcome::new(
        pass,
        format!(
            "delta J frame sum vs closed form: max {max_closed:.2e}; nabla_(delta J) J max {max_nabla:.2e} (tol {TOL_CODIFFERENTIAL:e})"
        ),
    );
    o.details = failing;
    o.details.extend(spots);
    o
}

fn criterion_7() -> Outcome {
    let t = Instant::now();
    let table = table1_suite(&GRID, POINTS, SEED, TOL_HARMONIC, JET).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let mut p1 = 0.0f64;
    let mut crit = 0.0f64;
    let mut details = Vec::new();
    for row in &table.rows {
        for h in &row.runs {
            p1 = p1.max(h.report.identity("p1_identity").unwrap().max);
            crit = crit.max(h.report.identity("criterion").unwrap().max);
        }
        if row.harmonicity != Harmonicity::Harmonic {
            details.push(format!("row {} {} x {}: {}", row.sno, row.m1, row.m2, row.harmonicity.label()));
        }
    }
    let harmonic = table.rows.iter().filter(|r| r.harmonicity == Harmonicity::Harmonic).count();
    let pass = harmonic == 9 && p1 < TOL_P1 && crit < TOL_HARMONIC && secs < LIMIT_TABLE_SECONDS;
    let mut o = Outcome::new(
        pass,
        format!(
            "{harmonic}/9 rows harmonic; ||[J,P] - nabla_(delta J) J|| max {crit:.2e} (tol {TOL_HARMONIC:e}); \
             p1 identity max {p1:.2e} (tol {TOL_P1:e}); {secs:.1} s (limit {LIMIT_TABLE_SECONDS} s)"
        ),
    );
    o.details = details;
    o
}

fn line_factor() -> TransSasakianFactor {
    let s = model("line", &["t"], &["0"], &["1"], &["1"], &["1"]).unwrap();
    TransSasakianFactor::validated(s, 0.0, 0.0, 1e-8).unwrap()
}

fn criterion_8() -> Outcome {
    let cases = [
        ("cosymplectic_flat", "cosymplectic_flat"),
        ("sasakian_heisenberg", "cosymplectic_flat"),
        ("sasakian_heisenberg", "sasakian_heisenberg"),
    ];
    let mut details = Vec::new();
    let mut max = 0.0f64;
    for (n1, n2) in cases {
        for (a, b) in GRID {
            let p = build_product(&builtin_factor(n1).unwrap(), &builtin_factor(n2).unwrap(), a, b).unwrap();
            let r = astheno_residual(&p, &product_points(&p), TOL_ASTHENO, JET).unwrap();
            max = max.max(r.residual);
            if !(r.residual < TOL_ASTHENO) {
                details.push(format!("{} (m = {}): dd^c Omega^(m-2) = {:.3e}", r.product, r.m, r.residual));
            }
        }
    }
    let p = build_product(&line_factor(), &builtin_factor("sasakian_heisenberg").unwrap(), 1.0, 2.0).unwrap();
    let short = astheno_residual(&p, &product_points(&p), TOL_ASTHENO, JET).unwrap();
    let short_ok = short.m == 2 && short.residual == 0.0;
    details.push(format!("m = 2 short circuit ({}): residual {}", short.product, short.residual));
    let pass = max < TOL_ASTHENO && short_ok;
    let mut o = Outcome::new(pass, format!("astheno-Kaehler residual on 3 pairs x 4 (a,b): max {max:.2e} (tol {TOL_ASTHENO:e})"));
    o.details = details;
    o
}

fn compare(a: &CheckReport, b: &CheckReport, label: &str, worst: &mut (f64, String)) {
    for s in &a.identities {
        let t = b.identity(&s.name).expect("both modes report the same identities");
        let d = if s.max.is_finite() && t.max.is_finite() {
            (s.max - t.max).abs()
        } else if s.max == t.max {
            0.0
        } else {
            f64::INFINITY
        };
        if d > worst.0 || worst.1.is_empty() {
            *worst = (d.max(worst.0), format!("{label} {}.{}", a.check, s.name));
        }
    }
}

fn criterion_9() -> Outcome {
    let t = Instant::now();
    let mut worst = (0.0f64, String::new());
    let mut count = 0usize;
    for f in builtins() {
        let pts = factor_points(&f);
        let tol = TOL_TRANSVERSE;
        let pairs = [
            (validate_axioms(&f.structure, &pts, tol, JET), validate_axioms(&f.structure, &pts, tol, FD)),
            (verify_trans_sasakian(&f, &pts, tol, JET), verify_trans_sasakian(&f, &pts, tol, FD)),
            (transverse_properties_report(&f, &pts, tol, JET), transverse_properties_report(&f, &pts, tol, FD)),
            (transverse_curvature_report(&f, &pts, tol, JET), transverse_curvature_report(&f, &pts, tol, FD)),
            (corollary_c2_report(&f, &pts, tol, JET), corollary_c2_report(&f, &pts, tol, FD)),
        ];
        for (a, b) in &pairs {
            compare(a, b, f.name(), &mut worst);
            count += a.identities.len();
        }
    }
    type Report = fn(&ProductHermitian, &[Vec<f64>], f64, DiffMode) -> CheckReport;
    let reports: [Report; 7] = [
        structure_report,
        connection_closed_form_report,
        nabla_j_report,
        curvature_closed_form_report,
        integrability_report,
        codifferential_report,
        |p, pts, tol, mode| harmonicity_report(p, pts, tol, mode).report,
    ];
    for p in products() {
        let pts = product_points(&p);
        for rep in reports {
            let (a, b) = (rep(&p, &pts, TOL_CLOSED_FORMS, JET), rep(&p, &pts, TOL_CLOSED_FORMS, FD));
            compare(&a, &b, &p.label(), &mut worst);
            count += a.identities.len();
        }
    }
    for (n1, n2) in [("cosymplectic_flat", "cosymplectic_flat"), ("sasakian_heisenberg", "cosymplectic_flat"), ("sasakian_heisenberg", "sasakian_heisenberg")] {
        for (a, b) in GRID {
            let p = build_product(&builtin_factor(n1).unwrap(), &builtin_factor(n2).unwrap(), a, b).unwrap();
            let pts = product_points(&p);
            let x = astheno_residual(&p, &pts, TOL_ASTHENO, JET).unwrap().residual;
            let y = astheno_residual(&p, &pts, TOL_ASTHENO, FD).unwrap().residual;
            if (x - y).abs() > worst.0 {
                worst = ((x - y).abs(), format!("{} astheno", p.label()));
            }
            count += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    Outcome::new(
        worst.0 < TOL_JET_FD,
        format!(
            "jet vs finite differences on {count} reported residuals: max difference {:.2e} at {} (tol {TOL_JET_FD:e}), {secs:.1} s",
            worst.0, worst.1
        ),
    )
}

fn manifests() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../manifests")
}

fn tsverify(args: &[&str]) -> (i32, Vec<u8>) {
    let o = Command::new(env!("CARGO_BIN_EXE_tsverify")).args(args).output().expect("binary runs");
    (o.status.code().unwrap_or(-1), o.stdout)
}

fn verdicts(stdout: &[u8]) -> Vec<(String, String)> {
    let v: serde_json::Value = serde_json::from_slice(stdout).expect("JSON report");
    v["results"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| (r["check"].as_str().unwrap().to_string(), r["verdict"].as_str().unwrap().to_string()))
        .collect()
}

fn criterion_10() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    let path = manifests().join("sasakian_kenmotsu.json");
    let p = path.to_str().unwrap();
    let base = ["verify", p, "--samples", "100", "--no-timings"];
    let runs: Vec<(i32, Vec<u8>)> = [vec![], vec![], vec!["--threads", "1"], vec!["--threads", "4"]]
        .iter()
        .map(|extra| tsverify(&[&base[..], &extra[..]].concat()))
        .collect();
    let identical = runs.iter().all(|r| r.1 == runs[0].1) && !runs[0].1.is_empty();
    pass &= identical;
    details.push(format!(
        "canonical report byte-identical over 2 runs and 1/4 threads: {identical} ({} bytes)",
        runs[0].1.len()
    ));
    let t1 = tsverify(&["table1", "--format", "json", "--samples", "20", "--no-timings", "--threads", "1"]);
    let t2 = tsverify(&["table1", "--format", "json", "--samples", "20", "--no-timings", "--threads", "3"]);
    pass &= t1.1 == t2.1 && t1.0 == 0;
    details.push(format!("table1 report identical over 1/3 threads: {}, exit {}", t1.1 == t2.1, t1.0));

    let broken = manifests().join("broken_j.json");
    let (code, out) = tsverify(&["verify", broken.to_str().unwrap(), "--samples", "100"]);
    let v = verdicts(&out);
    let ok = code == 1 && v.iter().all(|(_, s)| s == "fail") && v.iter().any(|(c, _)| c == "integrability") && v.iter().any(|(c, _)| c == "harmonicity");
    pass &= ok;
    details.push(format!("broken-J control: exit {code}, verdicts {v:?}"));

    let phi = manifests().join("corrupted_phi.json");
    let (code, out) = tsverify(&["verify", phi.to_str().unwrap(), "--samples", "100"]);
    let v = verdicts(&out);
    let ok = code == 1 && v == vec![("axioms".to_string(), "fail".to_string())];
    pass &= ok;
    details.push(format!("corrupted-phi control: exit {code}, verdicts {v:?}"));
    let mut o = Outcome::new(pass, "determinism and negative controls");
    o.details = details;
    o
}

fn main() {
    // Accept and ignore libtest arguments such as `--nocapture`.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(usize, &str, fn() -> Outcome); 10] = [
        (1, "axiom suite", criterion_1),
        (2, "transverse suite", criterion_2),
        (3, "phi-commutation of curvature", criterion_3),
        (4, "product closed forms", criterion_4),
        (5, "integrability", criterion_5),
        (6, "codifferential", criterion_6),
        (7, "harmonicity table", criterion_7),
        (8, "astheno-Kaehler", criterion_8),
        (9, "jet vs finite differences", criterion_9),
        (10, "determinism and controls", criterion_10),
    ];
    let mut unexpected = Vec::new();
    let mut red = Vec::new();
    for (n, name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|x| x == &n.to_string() || name.contains(x.as_str())) {
            continue;
        }
        let o = f();
        println!("criterion {n:>2} [{name}]: {} - {}", if o.pass { "PASS" } else { "FAIL" }, o.summary);
        for d in &o.details {
            println!("    {d}");
        }
        if !o.pass {
            red.push(n);
            if !KNOWN_RED.contains(&n) {
                unexpected.push(n);
            }
        }
    }
    println!("failing criteria: {red:?}; known red: {KNOWN_RED:?}");
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
