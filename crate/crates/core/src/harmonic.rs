//! Harmonicity of `J_{a,b}`: the codifferential `δJ`, the curvature
//! endomorphism `P`, the rough Laplacian, the criterion `[J,P] = ∇_{δJ}J`,
//! the Dirichlet energy density and the astheno-Kähler residual.

use serde::Serialize;

use crate::check::{evaluate, CheckReport, IdentityStat, Residuals, Verdict};
use crate::contact::{builtin_factor, FactorClass, TransSasakianFactor};
use crate::error::{GeomError, Result};
use crate::expr::{DiffMode, Expr};
use crate::geom::{endo_pullback, exterior_derivative, sample_points, wedge_power, KForm, KFormValue};
use crate::jet::{Differentiable, Jet1, Jet2, Scalar};
use crate::product::{build_product, integrability_report, AdaptedFrame, ProductAt, ProductHermitian};
use crate::riemann::{add_vec, apply, commutator, scale_vec, sub_vec, MetricAt};

/// `[J, ∇*∇J] − 2(∇_{δJ}J − [J,P])` is a second-derivative quantity; its
/// tolerance is this multiple of the base tolerance.
pub const P1_TOL_FACTOR: f64 = 10.0;

/// The pointwise quantities of the harmonicity analysis.
#[derive(Clone, Debug)]
pub struct HarmonicAt {
    /// `Σ (∇_{u_i}J) u_i` over the adapted frame.
    pub delta_j: Vec<f64>,
    /// The printed closed form `2n₁(α₁ξ₁ − (a/b)β₁ξ₁ + (β₁/b)ξ₂) + 2n₂(α₂ξ₂ + β₂ξ₁ + (a/b)β₂ξ₂)`.
    pub delta_j_closed: Vec<f64>,
    /// `2n₁(α₁ξ₁ + (β₁/b)ξ₂) + 2n₂(α₂ξ₂ − (β₂/b)ξ₁)`, from the Koszul forms of `∇J`.
    pub delta_j_koszul: Vec<f64>,
    pub nabla_delta_j: Vec<f64>,
    /// `P = ½ Σ R(u_i, J u_i)`.
    pub p: Vec<f64>,
    /// `∇*∇J = Σ ∇²_{u_i,u_i} J`.
    pub rough_laplacian: Vec<f64>,
}

fn closed_forms(p: &ProductHermitian, c: &ProductAt) -> (Vec<f64>, Vec<f64>) {
    let [n1, n2] = [p.f1.n() as f64, p.f2.n() as f64];
    let [al1, al2] = p.alphas();
    let [be1, be2] = p.betas();
    let (a, b) = (p.a, p.b);
    let (x1, x2) = (&c.xi0[0], &c.xi0[1]);
    let lin = |c1: f64, c2: f64| add_vec(&scale_vec(x1, c1), &scale_vec(x2, c2));
    let printed = lin(
        2.0 * n1 * (al1 - (a / b) * be1) + 2.0 * n2 * be2,
        2.0 * n1 * (be1 / b) + 2.0 * n2 * (al2 + (a / b) * be2),
    );
    let koszul = lin(2.0 * n1 * al1 - 2.0 * n2 * be2 / b, 2.0 * n1 * be1 / b + 2.0 * n2 * al2);
    (printed, koszul)
}

/// `δJ = Σ (∇_{u_i}J) u_i` over an orthonormal frame.
pub fn codifferential_in_frame(c: &ProductAt, frame: &AdaptedFrame) -> Vec<f64> {
    let mut acc = vec![0.0; c.dim()];
    for u in &frame.vectors {
        acc = add_vec(&acc, &apply(&c.nabla_j(u), u));
    }
    acc
}

/// `P = ½ Σ R(u_i, J u_i)` for a curvature tensor `r`.
pub fn p_in_frame(c: &ProductAt, r: &[f64], frame: &AdaptedFrame) -> Vec<f64> {
    let d = c.dim();
    let mut acc = vec![0.0; d * d];
    for u in &frame.vectors {
        let ju = apply(&c.j0, u);
        acc = add_vec(&acc, &MetricAt::curvature_operator(r, u, &ju));
    }
    scale_vec(&acc, 0.5)
}

pub fn rough_laplacian_in_frame(c: &ProductAt, frame: &AdaptedFrame) -> Vec<f64> {
    let d = c.dim();
    let mut acc = vec![0.0; d * d];
    for u in &frame.vectors {
        acc = add_vec(&acc, &c.metric.second_derivative_endo(u, u, &c.j));
    }
    acc
}

pub fn harmonic_at(p: &ProductHermitian, c: &ProductAt, frame: &AdaptedFrame) -> HarmonicAt {
    let r = c.metric.curvature_tensor();
    let delta_j = codifferential_in_frame(c, frame);
    let (delta_j_closed, delta_j_koszul) = closed_forms(p, c);
    HarmonicAt {
        nabla_delta_j: c.nabla_j(&delta_j),
        p: p_in_frame(c, &r, frame),
        rough_laplacian: rough_laplacian_in_frame(c, frame),
        delta_j,
        delta_j_closed,
        delta_j_koszul,
    }
}

/// Frame-sum and printed closed form of `δJ` at `pt`.
pub fn codifferential_j(p: &ProductHermitian, pt: &[f64], mode: DiffMode) -> Result<(Vec<f64>, Vec<f64>)> {
    let c = p.at(pt, mode)?;
    let f = c.adapted_frame()?;
    Ok((codifferential_in_frame(&c, &f), closed_forms(p, &c).0))
}

pub fn nabla_delta_j_j(p: &ProductHermitian, pt: &[f64], mode: DiffMode) -> Result<Vec<f64>> {
    let c = p.at(pt, mode)?;
    let f = c.adapted_frame()?;
    Ok(c.nabla_j(&codifferential_in_frame(&c, &f)))
}

pub fn chern_ricci_p(p: &ProductHermitian, pt: &[f64], mode: DiffMode) -> Result<Vec<f64>> {
    let c = p.at(pt, mode)?;
    let f = c.adapted_frame()?;
    Ok(p_in_frame(&c, &c.metric.curvature_tensor(), &f))
}

pub fn rough_laplacian_j(p: &ProductHermitian, pt: &[f64], mode: DiffMode) -> Result<Vec<f64>> {
    let c = p.at(pt, mode)?;
    let f = c.adapted_frame()?;
    Ok(rough_laplacian_in_frame(&c, &f))
}

/// Frame-sum `δJ` against its printed closed form, and `∇_{δJ}J = 0`. The
/// Koszul-derived closed form and `|δJ|` are informational.
pub fn codifferential_report(p: &ProductHermitian, points: &[Vec<f64>], tol: f64, mode: DiffMode) -> CheckReport {
    evaluate("codifferential", tol, points, |pt| {
        let c = p.at(pt, mode)?;
        let m = &c.metric;
        let f = c.adapted_frame()?;
        let delta = codifferential_in_frame(&c, &f);
        let (printed, koszul) = closed_forms(p, &c);
        let mut r = Residuals::new();
        r.push("closed_form", m.vector_norm(&sub_vec(&delta, &printed)));
        r.push("nabla_delta_j", m.endo_norm(&c.nabla_j(&delta)));
        r.info("koszul", m.vector_norm(&sub_vec(&delta, &koszul)));
        r.info("delta_j_norm", m.vector_norm(&delta));
        Ok(r)
    })
}

/// The two sufficient conditions of the harmonicity theorem, as maxima over
/// spanning `U_i` of the frame sums, and the commutator pieces
/// `Σ_j [J, R(e_j, φ₁e_j)]U` and `Σ_k [J, R(f_k, φ₂f_k)]U` for `U` in `D₁` and `D₂`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct T1Condition {
    pub factor1: f64,
    pub factor2: f64,
    /// `[[e-sum on U₁, e-sum on U₂], [f-sum on U₁, f-sum on U₂]]`.
    pub commutators: [[f64; 2]; 2],
}

pub fn theorem_t1_condition(p: &ProductHermitian, c: &ProductAt, frame: &AdaptedFrame) -> T1Condition {
    let d = c.dim();
    let m = &c.metric;
    let r = m.curvature_tensor();
    let alphas = p.alphas();
    let betas = p.betas();
    let blocks = [frame.e(), frame.f()];
    let us: [Vec<Vec<f64>>; 2] = [0, 1].map(|i| c.sections[i].iter().map(|s| crate::riemann::values(s)).collect());
    let mut cond = [0.0f64; 2];
    let mut comm = [[0.0f64; 2]; 2];
    for i in 0..2 {
        let ab = 2.0 * alphas[i] * betas[i];
        for u in &us[i] {
            let pu = c.phi_of(i, u);
            let mut acc = vec![0.0; d];
            for e in blocks[i] {
                acc = add_vec(&acc, &scale_vec(&c.phi_of(i, e), c.g_factor(e, u)));
                acc = sub_vec(&acc, &scale_vec(e, c.g_factor(e, &pu)));
            }
            cond[i] = cond[i].max(m.vector_norm(&scale_vec(&acc, ab)));
        }
        let mut op = vec![0.0; d * d];
        for e in blocks[i] {
            op = add_vec(&op, &MetricAt::curvature_operator(&r, e, &c.phi_of(i, e)));
        }
        let k = commutator(&c.j0, &op, d);
        for (t, block) in us.iter().enumerate() {
            for u in block {
                comm[i][t] = comm[i][t].max(m.vector_norm(&apply(&k, u)));
            }
        }
    }
    T1Condition {
        factor1: cond[0],
        factor2: cond[1],
        commutators: comm,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Harmonicity {
    Harmonic,
    NotHarmonic,
    Inconclusive,
}

impl Harmonicity {
    pub fn from_verdict(v: Verdict) -> Self {
        match v {
            Verdict::Pass => Harmonicity::Harmonic,
            Verdict::Fail => Harmonicity::NotHarmonic,
            Verdict::Inconclusive => Harmonicity::Inconclusive,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Harmonicity::Harmonic => "harmonic",
            Harmonicity::NotHarmonic => "not harmonic",
            Harmonicity::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HarmonicityReport {
    pub product: String,
    pub a: f64,
    pub b: f64,
    pub harmonicity: Harmonicity,
    pub report: CheckReport,
}

/// The criterion `[J,P] = ∇_{δJ}J` (valid for integrable `J`) together with
/// integrability, the `[J, ∇*∇J]` identity, `∇_{δJ}J = 0` and the sufficient
/// conditions. The `δJ` closed forms are informational.
pub fn harmonicity_report(p: &ProductHermitian, points: &[Vec<f64>], tol: f64, mode: DiffMode) -> HarmonicityReport {
    let d = p.dim();
    let mut report = evaluate("harmonicity", tol, points, |pt| {
        let c = p.at(pt, mode)?;
        let m = &c.metric;
        let f = c.adapted_frame()?;
        let h = harmonic_at(p, &c, &f);
        let jp = commutator(&c.j0, &h.p, d);
        let mut r = Residuals::new();
        r.push("criterion", m.endo_norm(&sub_vec(&jp, &h.nabla_delta_j)));
        r.push("nabla_delta_j", m.endo_norm(&h.nabla_delta_j));
        let lhs = commutator(&c.j0, &h.rough_laplacian, d);
        let rhs = scale_vec(&sub_vec(&h.nabla_delta_j, &jp), 2.0);
        r.push("p1_identity", m.endo_norm(&sub_vec(&lhs, &rhs)));
        let t1 = theorem_t1_condition(p, &c, &f);
        r.push("t1_factor1", t1.factor1);
        r.push("t1_factor2", t1.factor2);
        for (i, row) in t1.commutators.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                r.info(&format!("t1_commutator_{}_on_d{}", ["e", "f"][i], k + 1), *v);
            }
        }
        r.info("delta_j_closed_form", m.vector_norm(&sub_vec(&h.delta_j, &h.delta_j_closed)));
        r.info("delta_j_koszul", m.vector_norm(&sub_vec(&h.delta_j, &h.delta_j_koszul)));
        r.info("delta_j_norm", m.vector_norm(&h.delta_j));
        Ok(r)
    });
    let p1_tol = P1_TOL_FACTOR * tol;
    for s in report.identities.iter_mut().filter(|s| s.name == "p1_identity") {
        s.verdict = Verdict::from_residual(s.max, p1_tol);
    }
    report.note(format!("p1_identity judged at tol {p1_tol:e}"));
    let integ = integrability_report(p, points, tol, mode);
    if let Some(s) = integ.identity("nijenhuis") {
        report.push(IdentityStat {
            name: "nijenhuis".into(),
            ..s.clone()
        });
    }
    report.refresh_verdict();
    HarmonicityReport {
        product: p.label(),
        a: p.a,
        b: p.b,
        harmonicity: Harmonicity::from_verdict(report.verdict),
        report,
    }
}

/// `‖∇J‖² = Σ_{i,k} g((∇_{u_i}J)u_k, (∇_{u_i}J)u_k)` over the adapted frame.
pub fn dirichlet_energy_density(p: &ProductHermitian, pt: &[f64], mode: DiffMode) -> Result<f64> {
    let c = p.at(pt, mode)?;
    let f = c.adapted_frame()?;
    let mut s = 0.0;
    for u in &f.vectors {
        let nj = crate::riemann::values(&c.nabla_j(u).iter().map(|x| x.clone()).collect::<Vec<_>>());
        for w in &f.vectors {
            let v = apply(&nj, w);
            s += c.metric.inner(&v, &v);
        }
    }
    Ok(s)
}

/// Midpoint rule for `∫ ‖∇J‖² vol_g` over the chart box with `n` cells per axis.
pub fn energy_box_quadrature(p: &ProductHermitian, n: usize, mode: DiffMode) -> Result<f64> {
    let d = p.dim();
    let (lo, hi) = (&p.chart.lo, &p.chart.hi);
    let cell: f64 = (0..d).map(|i| (hi[i] - lo[i]) / n as f64).product();
    let total = n.pow(d as u32);
    let mut sum = 0.0;
    for idx in 0..total {
        let mut k = idx;
        let pt: Vec<f64> = (0..d)
            .map(|i| {
                let j = k % n;
                k /= n;
                lo[i] + (hi[i] - lo[i]) * (j as f64 + 0.5) / n as f64
            })
            .collect();
        let g = MetricAt::from_field(&p.g, &pt, mode)?;
        let det = nalgebra::DMatrix::from_row_slice(d, d, &g.gval).determinant();
        sum += dirichlet_energy_density(p, &pt, mode)? * det.sqrt() * cell;
    }
    Ok(sum)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsthenoReport {
    pub product: String,
    /// Complex dimension.
    pub m: usize,
    pub residual: f64,
    pub worst_point: Vec<f64>,
    pub verdict: Verdict,
}

/// `Ω(X, Y) = g(JX, Y)` as a 2-form with second-order jets.
pub fn kahler_form(c: &ProductAt) -> KForm<Jet2> {
    let d = c.dim();
    KForm::from_two_form(d, |i, j| {
        let mut acc = Jet2::zero(d);
        for k in 0..d {
            acc.fma_assign(&c.j[k * d + i], &c.metric.g[k * d + j]);
        }
        acc
    })
}

fn negated<T: Scalar>(a: &[T]) -> Vec<T> {
    a.iter().map(|x| x.negated()).collect()
}

/// `d d^c γ` with `d^c = 𝒥⁻¹ d 𝒥`, `𝒥` the pullback by `J` and `𝒥⁻¹` the
/// pullback by `−J` (the inverse of `𝒥` since `J² = −Id`).
pub fn ddc(j: &[Jet2], gamma: &KForm<Jet2>) -> Result<KFormValue> {
    let jg = endo_pullback(j, gamma);
    let d1 = exterior_derivative(&jg)?;
    let minus_j: Vec<Jet1> = negated(j).iter().map(|x| x.lower()).collect();
    let dc = endo_pullback(&minus_j, &d1);
    exterior_derivative(&dc)
}

/// `dd^c f` for a scalar function and its `𝒥`-conjugate, which agree when `J`
/// is integrable.
pub fn ddc_function(p: &ProductHermitian, f: &Expr, pt: &[f64], mode: DiffMode) -> Result<(KFormValue, KFormValue)> {
    let c = p.at(pt, mode)?;
    let form = KForm::scalar(f.jet_with(pt, mode)?, p.dim());
    let v = ddc(&c.j, &form)?;
    let conj = endo_pullback(&c.j0, &v);
    Ok((v, conj))
}

/// `sup |dd^c Ω^{m−2}|` over the points; `m = 2` is exactly zero.
pub fn astheno_residual(p: &ProductHermitian, points: &[Vec<f64>], tol: f64, mode: DiffMode) -> Result<AsthenoReport> {
    let m = p.complex_dim();
    let mut out = AsthenoReport {
        product: p.label(),
        m,
        residual: 0.0,
        worst_point: Vec::new(),
        verdict: Verdict::Pass,
    };
    if m <= 2 {
        return Ok(out);
    }
    let integ = integrability_report(p, points, tol, mode);
    let n = integ.max_with_prefix("nijenhuis");
    if integ.verdict != Verdict::Pass || n >= tol {
        return Err(GeomError::NotIntegrable { residual: n });
    }
    for pt in points {
        let c = p.at(pt, mode)?;
        let gamma = wedge_power(&kahler_form(&c), m - 2)?;
        let r = ddc(&c.j, &gamma)?.sup_norm();
        if r > out.residual || out.worst_point.is_empty() {
            out.residual = out.residual.max(r);
            out.worst_point = pt.clone();
        }
    }
    out.verdict = Verdict::from_residual(out.residual, tol);
    Ok(out)
}

/// One row of the particular-cases table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table1Row {
    pub sno: usize,
    pub m1: String,
    pub m2: String,
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    pub runs: Vec<HarmonicityReport>,
    pub harmonicity: Harmonicity,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table1Report {
    pub rows: Vec<Table1Row>,
    pub verdict: Verdict,
}

/// The table's class pairs in row order.
pub const TABLE1_PAIRS: [(FactorClass, FactorClass); 9] = [
    (FactorClass::Sasakian, FactorClass::Sasakian),
    (FactorClass::Sasakian, FactorClass::Kenmotsu),
    (FactorClass::Sasakian, FactorClass::Cosymplectic),
    (FactorClass::Kenmotsu, FactorClass::Kenmotsu),
    (FactorClass::Kenmotsu, FactorClass::Sasakian),
    (FactorClass::Kenmotsu, FactorClass::Cosymplectic),
    (FactorClass::Cosymplectic, FactorClass::Sasakian),
    (FactorClass::Cosymplectic, FactorClass::Kenmotsu),
    (FactorClass::Cosymplectic, FactorClass::Cosymplectic),
];

/// The built-in representative of a class.
pub fn representative(class: FactorClass) -> Result<TransSasakianFactor> {
    match class {
        FactorClass::Sasakian => builtin_factor("sasakian_heisenberg"),
        FactorClass::Kenmotsu => builtin_factor("kenmotsu_warped"),
        FactorClass::Cosymplectic => builtin_factor("cosymplectic_flat"),
        other => Err(GeomError::UnknownModel(other.label().to_string())),
    }
}

fn table_label(class: FactorClass, idx: usize) -> String {
    match class {
        FactorClass::Sasakian => format!("α{idx}-Sasakian"),
        FactorClass::Kenmotsu => format!("β{idx}-Kenmotsu"),
        _ => "Cosymplectic".to_string(),
    }
}

/// Every table row on every `(a, b)` of the grid.
pub fn table1_suite(grid: &[(f64, f64)], count: usize, seed: u64, tol: f64, mode: DiffMode) -> Result<Table1Report> {
    let mut rows = Vec::with_capacity(9);
    let mut verdict = Verdict::Pass;
    for (i, &(c1, c2)) in TABLE1_PAIRS.iter().enumerate() {
        let (f1, f2) = (representative(c1)?, representative(c2)?);
        let mut runs = Vec::with_capacity(grid.len());
        let mut row_verdict = Verdict::Pass;
        for &(a, b) in grid {
            let p = build_product(&f1, &f2, a, b)?;
            let pts = sample_points(&p.chart, count, seed);
            let h = harmonicity_report(&p, &pts, tol, mode);
            row_verdict = row_verdict.worst(h.report.verdict);
            runs.push(h);
        }
        verdict = verdict.worst(row_verdict);
        rows.push(Table1Row {
            sno: i + 1,
            m1: table_label(c1, 1),
            m2: table_label(c2, 2),
            alpha: [f1.alpha, f2.alpha],
            beta: [f1.beta, f2.beta],
            runs,
            harmonicity: Harmonicity::from_verdict(row_verdict),
        });
    }
    Ok(Table1Report { rows, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::product::build_broken_product;

    fn prod(n1: &str, n2: &str, a: f64, b: f64) -> ProductHermitian {
        build_product(&builtin_factor(n1).unwrap(), &builtin_factor(n2).unwrap(), a, b).unwrap()
    }

    #[test]
    fn flat_product_is_trivial() {
        let p = prod("cosymplectic_flat", "cosymplectic_flat", 1.0, 2.0);
        let pt = sample_points(&p.chart, 1, 1).remove(0);
        let (dj, closed) = codifferential_j(&p, &pt, DiffMode::Jet).unwrap();
        assert!(dj.iter().chain(&closed).all(|x| x.abs() < 1e-14));
        assert!(chern_ricci_p(&p, &pt, DiffMode::Jet).unwrap().iter().all(|x| x.abs() < 1e-14));
        assert!(rough_laplacian_j(&p, &pt, DiffMode::Jet).unwrap().iter().all(|x| x.abs() < 1e-14));
        assert!(dirichlet_energy_density(&p, &pt, DiffMode::Jet).unwrap().abs() < 1e-14);
    }

    #[test]
    fn spot_values_of_the_closed_form() {
        let p = prod("sasakian_heisenberg", "cosymplectic_flat", 1.0, 2.0);
        let pt = sample_points(&p.chart, 1, 1).remove(0);
        let c = p.at(&pt, DiffMode::Jet).unwrap();
        let (closed, _) = closed_forms(&p, &c);
        assert!(sub_vec(&closed, &scale_vec(&c.xi0[0], 2.0)).iter().all(|x| x.abs() < 1e-14));
        let (dj, _) = codifferential_j(&p, &pt, DiffMode::Jet).unwrap();
        assert!(c.metric.vector_norm(&sub_vec(&dj, &closed)) < 1e-12);

        let p = prod("kenmotsu_warped", "kenmotsu_warped", 1.0, 1.0);
        let c = p.at(&pt, DiffMode::Jet).unwrap();
        let (closed, koszul) = closed_forms(&p, &c);
        assert!(sub_vec(&closed, &scale_vec(&c.xi0[1], 4.0)).iter().all(|x| x.abs() < 1e-14));
        let (dj, _) = codifferential_j(&p, &pt, DiffMode::Jet).unwrap();
        assert!(c.metric.vector_norm(&sub_vec(&dj, &koszul)) < 1e-12);
    }

    #[test]
    fn sasakian_products_are_harmonic() {
        let p = prod("sasakian_heisenberg", "sasakian_heisenberg", 0.0, 1.0);
        let pts = sample_points(&p.chart, 8, 3);
        let h = harmonicity_report(&p, &pts, 1e-6, DiffMode::Jet);
        assert_eq!(h.harmonicity, Harmonicity::Harmonic, "{:#?}", h.report);
    }

    #[test]
    fn broken_j_is_never_harmonic() {
        let f1 = builtin_factor("sasakian_heisenberg").unwrap();
        let f2 = builtin_factor("kenmotsu_warped").unwrap();
        let p = build_broken_product(&f1, &f2, 1.0, 2.0).unwrap();
        let pts = sample_points(&p.chart, 4, 3);
        let h = harmonicity_report(&p, &pts, 1e-6, DiffMode::Jet);
        assert_ne!(h.harmonicity, Harmonicity::Harmonic);
    }

    #[test]
    fn t1_algebra_on_orthonormal_data() {
        // 2[g(e,e)φe − g(e,φe)e] = 2φe for a unit e orthogonal to φe.
        let phi = [0.0, -1.0, 1.0, 0.0];
        let e = [1.0, 0.0];
        let pe = apply(&phi, &e);
        let v = sub_vec(&scale_vec(&pe, 2.0), &scale_vec(&e, 2.0 * (e[0] * pe[0] + e[1] * pe[1])));
        assert_eq!(v, scale_vec(&pe, 2.0));
    }

    #[test]
    fn astheno_cases() {
        let f = prod("cosymplectic_flat", "cosymplectic_flat", 0.0, 1.0);
        let pts = sample_points(&f.chart, 4, 2);
        let r = astheno_residual(&f, &pts, 1e-6, DiffMode::Jet).unwrap();
        assert_eq!(r.residual, 0.0);
        for (n2, a) in [("cosymplectic_flat", 1.0), ("sasakian_heisenberg", 0.0)] {
            let p = prod("sasakian_heisenberg", n2, a, 2.0);
            let pts = sample_points(&p.chart, 4, 2);
            let r = astheno_residual(&p, &pts, 1e-6, DiffMode::Jet).unwrap();
            assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
        }
        // dd^cΩ = −8a Φ₁∧Φ₂ for two Sasakian factors.
        let p = prod("sasakian_heisenberg", "sasakian_heisenberg", 1.0, 2.0);
        let r = astheno_residual(&p, &pts, 1e-6, DiffMode::Jet).unwrap();
        assert!(r.residual > 0.1, "{r:?}");
        let f1 = builtin_factor("sasakian_heisenberg").unwrap();
        let broken = build_broken_product(&f1, &f1, 1.0, 2.0).unwrap();
        assert!(matches!(
            astheno_residual(&broken, &pts, 1e-6, DiffMode::Jet),
            Err(GeomError::NotIntegrable { .. })
        ));
    }

    #[test]
    fn ddc_of_a_function_is_j_invariant() {
        let p = prod("sasakian_heisenberg", "kenmotsu_warped", 1.0, 2.0);
        let f = crate::expr::parse("x_1*exp(y_1)", &p.chart.coords).unwrap();
        let pt = sample_points(&p.chart, 1, 9).remove(0);
        let (v, conj) = ddc_function(&p, &f, &pt, DiffMode::Jet).unwrap();
        assert!(v.sup_norm() > 1e-3);
        assert!(v.minus(&conj).sup_norm() < 1e-7);
    }
}
