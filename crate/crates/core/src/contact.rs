//! Almost contact metric structures, trans-Sasakian identities, the transverse
//! Levi-Civita connection on `D = ker η`, and the built-in models.

use nalgebra::{Matrix2, Vector2};

use crate::check::{evaluate, CheckReport, Residuals};
use crate::error::{GeomError, Result};
use crate::expr::{parse, DiffMode, Expr};
use crate::geom::{
    exterior_derivative, lie_bracket, sample_points, wedge, ChartDomain, EndomorphismField, KForm, MetricField,
    OneFormField, VectorField,
};
use crate::jet::{Differentiable, Jet1, Jet2, Scalar};
use crate::riemann::{
    add_vec, apply, compose, lower_vec, mul_vec, nabla_endo, nabla_vec, scale_vec, sub_vec, values,
    MetricAt,
};

/// `(φ, ξ, η, g)` on an odd-dimensional chart.
#[derive(Clone, Debug, PartialEq)]
pub struct AlmostContactMetricStructure {
    pub name: String,
    pub chart: ChartDomain,
    pub phi: EndomorphismField,
    pub xi: VectorField,
    pub eta: OneFormField,
    pub g: MetricField,
}

/// Jets of a structure at one point.
#[derive(Clone, Debug)]
pub struct ContactAt {
    pub metric: MetricAt,
    pub phi: Vec<Jet2>,
    pub xi: Vec<Jet2>,
    pub eta: Vec<Jet2>,
    pub phi0: Vec<f64>,
    pub xi0: Vec<f64>,
    pub eta0: Vec<f64>,
    /// Columns `φ(∂_i)` that are not identically zero; they span `D`.
    pub d_sections: Vec<Vec<Jet2>>,
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = a[0].constant_like(0.0);
    for (x, y) in a.iter().zip(b) {
        acc.fma_assign(x, y);
    }
    acc
}

/// `v − η(v) ξ`.
pub fn project_d<T: Scalar>(eta: &[T], xi: &[T], v: &[T]) -> Vec<T> {
    let e = dot(eta, v);
    sub_vec(v, &mul_vec(&e, xi))
}

/// Derivative of a scalar jet along a constant direction.
fn directional<T: Differentiable>(f: &T, x: &[T::Deriv]) -> T::Deriv {
    let mut acc = <T::Deriv as Scalar>::zero(x.len());
    for (i, xi) in x.iter().enumerate() {
        acc.fma_assign(xi, &f.partial(i));
    }
    acc
}

/// `∇^T_X U = η(X)[ξ, U] + (∇_{X^D} U)^D`, with `X` split as `η(X)ξ + X^D`.
/// `Γ`, `η` and `X` are one order below `ξ` and `U`, and so is the result.
pub fn transverse_nabla<T: Differentiable>(
    gamma: &[T::Deriv],
    eta: &[T::Deriv],
    xi: &[T],
    x: &[T::Deriv],
    u: &[T],
) -> Vec<T::Deriv> {
    let xil = lower_vec(xi);
    let ex = dot(eta, x);
    let xd = sub_vec(x, &mul_vec(&ex, &xil));
    let br = lie_bracket(xi, u);
    let nv = nabla_vec::<T>(gamma, &xd, u);
    add_vec(&mul_vec(&ex, &br), &project_d(eta, &xil, &nv))
}

/// Constant-coefficient jets for a tangent vector.
fn const_jet2(v: &[f64]) -> Vec<Jet2> {
    v.iter().map(|&x| Jet2::constant(x, v.len())).collect()
}

fn const_jet1(v: &[f64]) -> Vec<Jet1> {
    v.iter().map(|&x| Jet1::constant(x, v.len())).collect()
}

fn unit(i: usize, d: usize) -> Vec<f64> {
    (0..d).map(|k| if k == i { 1.0 } else { 0.0 }).collect()
}

fn column<T: Clone>(a: &[T], l: usize, d: usize) -> Vec<T> {
    (0..d).map(|k| a[k * d + l].clone()).collect()
}

impl AlmostContactMetricStructure {
    pub fn new(
        name: &str,
        chart: ChartDomain,
        phi: EndomorphismField,
        xi: VectorField,
        eta: OneFormField,
        g: MetricField,
    ) -> Result<Self> {
        let d = chart.dim();
        if d % 2 == 0 {
            return Err(GeomError::InvalidChart(format!(
                "an almost contact structure needs odd dimension, got {d}"
            )));
        }
        if phi.dim != d || g.dim != d {
            return Err(GeomError::ChartMismatch {
                expected: d,
                found: if phi.dim != d { phi.dim } else { g.dim },
            });
        }
        phi.validate(&chart)?;
        xi.validate(&chart)?;
        eta.validate(&chart)?;
        g.validate(&chart)?;
        Ok(Self {
            name: name.to_string(),
            chart,
            phi,
            xi,
            eta,
            g,
        })
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// `n` with `dim = 2n + 1`.
    pub fn n(&self) -> usize {
        (self.dim() - 1) / 2
    }

    /// Indices `i` with `φ(∂_i)` not identically zero.
    pub fn d_section_indices(&self) -> Vec<usize> {
        let d = self.dim();
        (0..d).filter(|&l| (0..d).any(|k| !self.phi.get(k, l).is_zero())).collect()
    }

    /// The same structure with `φ` multiplied by `s` (a negative control).
    pub fn with_scaled_phi(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.phi.entries = out.phi.entries.iter().map(|e| Expr::scale(s, e.clone())).collect();
        out.name = format!("{}(phi x {s})", self.name);
        out
    }

    pub fn all_exprs(&self) -> Vec<&Expr> {
        self.phi
            .entries
            .iter()
            .chain(&self.xi.comps)
            .chain(&self.eta.comps)
            .chain(&self.g.entries)
            .collect()
    }

    pub fn at(&self, p: &[f64], mode: DiffMode) -> Result<ContactAt> {
        self.chart.check_point(p)?;
        let d = self.dim();
        let metric = MetricAt::from_field(&self.g, p, mode)?;
        let phi = self.phi.at(p, mode)?;
        let xi = self.xi.at(p, mode)?;
        let eta = self.eta.at(p, mode)?;
        let d_sections = self.d_section_indices().into_iter().map(|l| column(&phi, l, d)).collect();
        Ok(ContactAt {
            phi0: values(&phi),
            xi0: values(&xi),
            eta0: values(&eta),
            metric,
            phi,
            xi,
            eta,
            d_sections,
        })
    }
}

impl ContactAt {
    pub fn dim(&self) -> usize {
        self.metric.dim
    }

    /// `Φ_{ij} = g(∂_i, φ∂_j)` with jets.
    pub fn fundamental_matrix(&self) -> Vec<Jet2> {
        compose(&self.metric.g, &self.phi, self.dim())
    }

    /// `Φ(X, Y) = g(X, φY)` for tangent vectors.
    pub fn fundamental(&self, x: &[f64], y: &[f64]) -> f64 {
        self.metric.inner(x, &apply(&self.phi0, y))
    }

    pub fn eta_of(&self, v: &[f64]) -> f64 {
        dot(&self.eta0, v)
    }

    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        project_d(&self.eta0, &self.xi0, v)
    }

    /// `∇^T_X U` for a tangent vector `X` and a jet field `U`.
    pub fn transverse_at(&self, x: &[f64], u: &[Jet2]) -> Vec<f64> {
        let eta1 = lower_vec(&self.eta);
        values(&transverse_nabla::<Jet2>(&self.metric.gamma, &eta1, &self.xi, &const_jet1(x), u))
    }

    /// `∇_X Y` for a tangent vector `X` and a jet field `Y`.
    pub fn nabla_at(&self, x: &[f64], y: &[Jet2]) -> Vec<f64> {
        values(&nabla_vec::<Jet2>(&self.metric.gamma, &const_jet1(x), y))
    }

    /// `N_φ(X, Y) = [φ,φ](X,Y) + dη(X,Y) ξ` for jet fields.
    pub fn normality(&self, x: &[Jet2], y: &[Jet2]) -> Vec<f64> {
        let phix = apply(&self.phi, x);
        let phiy = apply(&self.phi, y);
        let p0 = &self.phi0;
        let br = values(&lie_bracket(x, y));
        let mut n = values(&lie_bracket(&phix, &phiy));
        n = add_vec(&n, &apply(p0, &apply(p0, &br)));
        n = sub_vec(&n, &apply(p0, &values(&lie_bracket(&phix, y))));
        n = sub_vec(&n, &apply(p0, &values(&lie_bracket(x, &phiy))));
        let (x0, y0) = (values(x), values(y));
        let ey = dot(&self.eta, y);
        let ex = dot(&self.eta, x);
        let d_eta = directional(&ey, &const_jet1(&x0)).value - directional(&ex, &const_jet1(&y0)).value
            - self.eta_of(&br);
        add_vec(&n, &scale_vec(&self.xi0, d_eta))
    }
}

/// Which trans-Sasakian class a pair of constants belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorClass {
    Sasakian,
    Kenmotsu,
    Cosymplectic,
    Proper,
    Unverified,
}

impl FactorClass {
    pub fn from_constants(alpha: f64, beta: f64, tol: f64) -> Self {
        match (alpha.abs() < tol, beta.abs() < tol) {
            (true, true) => FactorClass::Cosymplectic,
            (false, true) => FactorClass::Sasakian,
            (true, false) => FactorClass::Kenmotsu,
            (false, false) => FactorClass::Proper,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FactorClass::Sasakian => "alpha-Sasakian",
            FactorClass::Kenmotsu => "beta-Kenmotsu",
            FactorClass::Cosymplectic => "cosymplectic",
            FactorClass::Proper => "proper",
            FactorClass::Unverified => "unverified",
        }
    }
}

/// A structure together with its (constant) type `(α, β)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransSasakianFactor {
    pub structure: AlmostContactMetricStructure,
    pub alpha: f64,
    pub beta: f64,
    pub class: FactorClass,
    /// Whether the axioms and identities were checked at construction.
    pub validated: bool,
}

impl TransSasakianFactor {
    /// Wrap without checking anything; the class is derived from `(α, β)`.
    pub fn unchecked(structure: AlmostContactMetricStructure, alpha: f64, beta: f64) -> Self {
        Self {
            class: FactorClass::from_constants(alpha, beta, 1e-12),
            structure,
            alpha,
            beta,
            validated: false,
        }
    }

    /// Wrap after checking the axioms and the trans-Sasakian identities at a
    /// few seeded points.
    pub fn validated(structure: AlmostContactMetricStructure, alpha: f64, beta: f64, tol: f64) -> Result<Self> {
        let f = Self::unchecked(structure, alpha, beta);
        let pts = sample_points(&f.structure.chart, 8, 0x5eed);
        for r in [
            validate_axioms(&f.structure, &pts, tol, DiffMode::Jet),
            verify_trans_sasakian(&f, &pts, tol, DiffMode::Jet),
        ] {
            if r.verdict != crate::check::Verdict::Pass {
                let worst = r
                    .identities
                    .iter()
                    .filter(|s| !s.informational)
                    .max_by(|a, b| a.max.total_cmp(&b.max))
                    .map(|s| format!("{} residual {:e}", s.name, s.max))
                    .or_else(|| r.notes.first().cloned())
                    .unwrap_or_default();
                return Err(GeomError::UnvalidatedFactor {
                    name: f.structure.name.clone(),
                    reason: format!("{}: {worst}", r.check),
                });
            }
        }
        Ok(Self { validated: true, ..f })
    }

    pub fn name(&self) -> &str {
        &self.structure.name
    }

    pub fn n(&self) -> usize {
        self.structure.n()
    }
}

/// Five pointwise axioms over coordinate-basis arguments.
pub fn validate_axioms(s: &AlmostContactMetricStructure, points: &[Vec<f64>], tol: f64, mode: DiffMode) -> CheckReport {
    let d = s.dim();
    evaluate("axioms", tol, points, |p| {
        let c = s.at(p, mode)?;
        let m = &c.metric;
        let mut r = Residuals::new();
        r.push("eta_xi", dot(&c.eta0, &c.xi0) - 1.0);
        let mut phi2 = compose(&c.phi0, &c.phi0, d);
        for k in 0..d {
            for l in 0..d {
                phi2[k * d + l] += if k == l { 1.0 } else { 0.0 } - c.eta0[l] * c.xi0[k];
            }
        }
        r.push("phi_squared", m.endo_norm(&phi2));
        // g(φX, φY) − g(X, Y) + η(X)η(Y)
        let gphi = compose(&m.gval, &c.phi0, d);
        let mut compat = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += c.phi0[k * d + i] * gphi[k * d + j];
                }
                compat[i * d + j] = s - m.gval[i * d + j] + c.eta0[i] * c.eta0[j];
            }
        }
        r.push("compatibility", m.bilinear_norm(&compat));
        r.push("phi_xi", m.vector_norm(&apply(&c.phi0, &c.xi0)));
        let eta_phi: Vec<f64> = (0..d).map(|l| (0..d).map(|k| c.eta0[k] * c.phi0[k * d + l]).sum()).collect();
        r.push("eta_phi", m.covector_norm(&eta_phi));
        Ok(r)
    })
}

/// `Φ(X, Y) = g(X, φY)` at `p`.
pub fn fundamental_form(
    s: &AlmostContactMetricStructure,
    x: &[f64],
    y: &[f64],
    p: &[f64],
    mode: DiffMode,
) -> Result<f64> {
    let c = s.at(p, mode)?;
    if x.len() != s.dim() || y.len() != s.dim() {
        return Err(GeomError::ChartMismatch {
            expected: s.dim(),
            found: x.len().min(y.len()),
        });
    }
    Ok(c.fundamental(x, y))
}

/// `N_φ(X, Y)` at `p`.
pub fn normality_residual(
    s: &AlmostContactMetricStructure,
    p: &[f64],
    x: &VectorField,
    y: &VectorField,
    mode: DiffMode,
) -> Result<Vec<f64>> {
    for f in [x, y] {
        if f.dim() != s.dim() {
            return Err(GeomError::ChartMismatch {
                expected: s.dim(),
                found: f.dim(),
            });
        }
    }
    let c = s.at(p, mode)?;
    Ok(c.normality(&x.at(p, mode)?, &y.at(p, mode)?))
}

/// Least-squares `(α, β)` from `∇_X ξ = −αφX − βφ²X`.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct AlphaBetaFit {
    pub alpha: f64,
    pub beta: f64,
    /// Post-fit sup-norm of `∇_X ξ + αφX + βφ²X` over all rows.
    pub residual: f64,
    /// Largest `|div ξ / 2n − β|` over the points.
    pub divergence_mismatch: f64,
    /// Ratio of the smallest to the largest singular value of the design.
    pub conditioning: f64,
}

pub fn estimate_alpha_beta(s: &AlmostContactMetricStructure, points: &[Vec<f64>], mode: DiffMode) -> Result<AlphaBetaFit> {
    let d = s.dim();
    let mut rows: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = Vec::new();
    let mut divs = Vec::new();
    for p in points {
        let c = s.at(p, mode)?;
        let m = &c.metric;
        let phi2 = compose(&c.phi0, &c.phi0, d);
        let mut div = 0.0;
        for i in 0..d {
            let v = c.nabla_at(&unit(i, d), &c.xi);
            div += v[i];
            let a = scale_vec(&column(&c.phi0, i, d), -1.0);
            let b = scale_vec(&column(&phi2, i, d), -1.0);
            rows.push((m.frame_components(&v), m.frame_components(&a), m.frame_components(&b)));
        }
        divs.push(div);
    }
    let mut n = Matrix2::zeros();
    let mut rhs = Vector2::zeros();
    for (v, a, b) in &rows {
        let (aa, ab, bb) = (dot(a, a), dot(a, b), dot(b, b));
        n += Matrix2::new(aa, ab, ab, bb);
        rhs += Vector2::new(dot(a, v), dot(b, v));
    }
    let eig = n.symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    let ratio = if hi > 0.0 { (lo.max(0.0) / hi).sqrt() } else { 0.0 };
    if ratio < 1e-8 {
        return Err(GeomError::IllConditionedFit { ratio });
    }
    let sol = n.lu().solve(&rhs).ok_or(GeomError::IllConditionedFit { ratio })?;
    let (alpha, beta) = (sol[0], sol[1]);
    let residual = rows.iter().fold(0.0f64, |acc, (v, a, b)| {
        v.iter()
            .zip(a)
            .zip(b)
            .fold(acc, |acc, ((v, a), b)| acc.max((v - alpha * a - beta * b).abs()))
    });
    let two_n = (d - 1) as f64;
    let divergence_mismatch = divs.iter().fold(0.0f64, |m, dv| m.max((dv / two_n - beta).abs()));
    Ok(AlphaBetaFit {
        alpha,
        beta,
        residual,
        divergence_mismatch,
        conditioning: ratio,
    })
}

/// Normality, `dη = αΦ`, `dΦ = 2βη∧Φ` and the covariant-derivative identities
/// of a trans-Sasakian structure.
///
/// Forms are compared in the Kobayashi–Nomizu normalization, where
/// `dη(X,Y) = ½(Xη(Y) − Yη(X) − η([X,Y]))`; in components this is
/// `½(∂_iη_j − ∂_jη_i) = αΦ_{ij}`. On 2-forms the factor `⅓` appears on both
/// sides of `dΦ = 2βη∧Φ`, so plain components are compared there.
pub fn verify_trans_sasakian(f: &TransSasakianFactor, points: &[Vec<f64>], tol: f64, mode: DiffMode) -> CheckReport {
    let s = &f.structure;
    let d = s.dim();
    let (alpha, beta) = (f.alpha, f.beta);
    evaluate("trans_sasakian", tol, points, |p| {
        let c = s.at(p, mode)?;
        let m = &c.metric;
        let mut r = Residuals::new();

        let coord: Vec<Vec<Jet2>> = (0..d).map(|i| const_jet2(&unit(i, d))).collect();
        for i in 0..d {
            for j in (i + 1)..d {
                r.push("normality", m.vector_norm(&c.normality(&coord[i], &coord[j])));
            }
        }

        let phi_mat = c.fundamental_matrix();
        let phi_val = values(&phi_mat);
        let big_phi = KForm::from_two_form(d, |i, j| phi_val[i * d + j]);
        // On a line both structure equations are trivially satisfied.
        if d >= 3 {
            let d_eta = exterior_derivative(&KForm::from_one_form(c.eta.clone()))?.values();
            r.push("d_eta", d_eta.scaled(0.5).minus(&big_phi.scaled(alpha)).sup_norm());
            let phi_form = KForm::from_two_form(d, |i, j| phi_mat[i * d + j].clone());
            let d_phi = exterior_derivative(&phi_form)?.values();
            let eta_phi = wedge(&KForm::from_one_form(c.eta0.clone()), &big_phi)?;
            r.push("d_phi", d_phi.minus(&eta_phi.scaled(2.0 * beta)).sup_norm());
        } else {
            r.push("d_eta", 0.0);
            r.push("d_phi", 0.0);
        }

        let phi2 = compose(&c.phi0, &c.phi0, d);
        for i in 0..d {
            let ei = unit(i, d);
            let nphi = values(&nabla_endo::<Jet2>(&m.gamma, &const_jet1(&ei), &c.phi));
            let phi_i = column(&c.phi0, i, d);
            for j in 0..d {
                let lhs = column(&nphi, j, d);
                let mut rhs = scale_vec(&c.xi0, alpha * m.gval[i * d + j] + beta * phi_val[j * d + i]);
                rhs = sub_vec(&rhs, &scale_vec(&ei, alpha * c.eta0[j]));
                rhs = sub_vec(&rhs, &scale_vec(&phi_i, beta * c.eta0[j]));
                r.push("nabla_phi", m.vector_norm(&sub_vec(&lhs, &rhs)));

                // (∇_i η)_j = ∂_i η_j − Γ^k_{ij} η_k
                let mut ne = c.eta[j].grad[i];
                for k in 0..d {
                    ne -= m.gamma0[k * d * d + i * d + j] * c.eta0[k];
                }
                let phi_j = column(&c.phi0, j, d);
                r.push("nabla_eta", ne - alpha * phi_val[i * d + j] - beta * m.inner(&phi_i, &phi_j));
            }

            let nxi = c.nabla_at(&ei, &c.xi);
            let rhs = add_vec(&scale_vec(&phi_i, -alpha), &scale_vec(&column(&phi2, i, d), -beta));
            r.push("nabla_xi", m.vector_norm(&sub_vec(&nxi, &rhs)));

            // ∇_ξ ∂_i = Γ(ξ, ∂_i) and [ξ, ∂_i] = −∂_i ξ
            let along_xi = c.nabla_at(&c.xi0, &coord[i]);
            let br: Vec<f64> = c.xi.iter().map(|x| -x.grad[i]).collect();
            let mut rhs = scale_vec(&phi_i, -alpha);
            rhs = add_vec(&rhs, &scale_vec(&sub_vec(&ei, &scale_vec(&c.xi0, c.eta0[i])), beta));
            rhs = add_vec(&rhs, &br);
            r.push("nabla_along_xi", m.vector_norm(&sub_vec(&along_xi, &rhs)));
            r.push("xi_bracket_in_d", c.eta_of(&br));

            let phi_col: Vec<Jet2> = column(&c.phi, i, d);
            let lhs = apply(&c.phi0, &br);
            let rhs = values(&lie_bracket(&c.xi, &phi_col));
            r.push("phi_commutes_with_xi_bracket", m.vector_norm(&sub_vec(&lhs, &rhs)));
        }
        r.push("nabla_xi_xi", m.vector_norm(&c.nabla_at(&c.xi0, &c.xi)));
        Ok(r)
    })
}

/// `∇^T_X U` with the projector onto `D` at the point.
#[derive(Clone, Debug, PartialEq)]
pub struct TransverseConnectionValue {
    pub value: Vec<f64>,
    /// `Id − η⊗ξ`, row-major.
    pub projector: Vec<f64>,
}

pub fn transverse_derivative(
    f: &TransSasakianFactor,
    x: &VectorField,
    u: &VectorField,
    p: &[f64],
    tol: f64,
    mode: DiffMode,
) -> Result<TransverseConnectionValue> {
    let s = &f.structure;
    let d = s.dim();
    for v in [x, u] {
        if v.dim() != d {
            return Err(GeomError::ChartMismatch {
                expected: d,
                found: v.dim(),
            });
        }
    }
    let c = s.at(p, mode)?;
    let uj = u.at(p, mode)?;
    let eu = c.eta_of(&values(&uj));
    if eu.abs() >= tol {
        return Err(GeomError::NotASectionOfD { residual: eu.abs() });
    }
    let xj = x.at(p, mode)?;
    let eta1 = lower_vec(&c.eta);
    let value = values(&transverse_nabla::<Jet2>(&c.metric.gamma, &eta1, &c.xi, &lower_vec(&xj), &uj));
    let mut projector = vec![0.0; d * d];
    for k in 0..d {
        for l in 0..d {
            projector[k * d + l] = if k == l { 1.0 } else { 0.0 } - c.xi0[k] * c.eta0[l];
        }
    }
    Ok(TransverseConnectionValue { value, projector })
}

/// Parallelism of `φ|_D` and `g|_D`, torsion, and the splittings of `∇_U V`
/// and `[U, V]` along `ξ ⊕ D`, over `U, V` in `{φ∂_i}` and `X` in the
/// coordinate fields, `ξ` and `{φ∂_i}`.
pub fn transverse_properties_report(f: &TransSasakianFactor, points: &[Vec<f64>], tol: f64, mode: DiffMode) -> CheckReport {
    let s = &f.structure;
    let d = s.dim();
    let (alpha, beta) = (f.alpha, f.beta);
    evaluate("transverse", tol, points, |p| {
        let c = s.at(p, mode)?;
        let m = &c.metric;
        let gamma = &m.gamma;
        let eta1 = lower_vec(&c.eta);
        let tn = |x: &[Jet2], u: &[Jet2]| values(&transverse_nabla::<Jet2>(gamma, &eta1, &c.xi, &lower_vec(x), u));
        // Arguments X grouped by kind: along D, along ξ, and coordinate fields.
        let mut xs: Vec<(&str, Vec<Jet2>)> = c.d_sections.iter().map(|u| ("d", u.clone())).collect();
        xs.push(("xi", c.xi.clone()));
        xs.extend((0..d).map(|i| ("coord", const_jet2(&unit(i, d)))));
        let mut r = Residuals::new();
        for (kind, x) in &xs {
            let x0 = values(x);
            let x1 = const_jet1(&x0);
            for u in &c.d_sections {
                let tu = tn(x, u);
                r.push(&format!("d_valued_{kind}"), c.eta_of(&tu));
                let phiu = apply(&c.phi, u);
                r.push(
                    &format!("phi_parallel_{kind}"),
                    m.vector_norm(&sub_vec(&tn(x, &phiu), &apply(&c.phi0, &tu))),
                );
                for v in &c.d_sections {
                    let guv = dot(&apply(&m.g, v), u);
                    let lhs = directional(&guv, &x1).value;
                    let rhs = m.inner(&tu, &values(v)) + m.inner(&values(u), &tn(x, v));
                    r.push(&format!("metric_parallel_{kind}"), lhs - rhs);
                }
            }
        }
        for u in &c.d_sections {
            let u0 = values(u);
            for v in &c.d_sections {
                let v0 = values(v);
                let br = values(&lie_bracket(u, v));
                let tor = sub_vec(&sub_vec(&tn(u, v), &tn(v, u)), &c.project(&br));
                r.push("torsion", m.vector_norm(&tor));

                let nuv = c.nabla_at(&u0, v);
                let tuv = tn(u, v);
                let phi_uv = c.fundamental(&u0, &v0);
                let g_phi = m.inner(&apply(&c.phi0, &u0), &apply(&c.phi0, &v0));
                let coef = -alpha * phi_uv - beta * g_phi;
                r.push("nabla_split", m.vector_norm(&sub_vec(&nuv, &add_vec(&scale_vec(&c.xi0, coef), &tuv))));
                let coef2 = -alpha * phi_uv - beta * m.inner(&u0, &v0) + beta * c.eta_of(&u0) * c.eta_of(&v0);
                r.push(
                    "nabla_split_expanded",
                    m.vector_norm(&sub_vec(&nuv, &add_vec(&scale_vec(&c.xi0, coef2), &tuv))),
                );
                let rhs = add_vec(&scale_vec(&c.xi0, -2.0 * alpha * phi_uv), &c.project(&br));
                r.push("bracket_split", m.vector_norm(&sub_vec(&br, &rhs)));
            }
        }
        Ok(r)
    })
}

/// The four identities relating `R`, `R^T` and `∇^T` on `D`, with `R^T` the
/// curvature of the transverse connection (full bracket in the last term).
///
/// The `R(U,V)ξ` identity is checked as stated, together with the form that
/// swaps the first `∇_V(η(V)ξ)` to `∇_U(η(V)ξ)`. On sections of `D` the
/// `η(U)`, `η(V)` terms vanish identically, so the two cannot differ there.
pub fn transverse_curvature_report(f: &TransSasakianFactor, points: &[Vec<f64>], tol: f64, mode: DiffMode) -> CheckReport {
    let s = &f.structure;
    let (alpha, beta) = (f.alpha, f.beta);
    let (a2, ab, b2) = (alpha * alpha, alpha * beta, beta * beta);
    let mut report = evaluate("transverse_curvature", tol, points, |p| {
        let c = s.at(p, mode)?;
        let m = &c.metric;
        let rt = m.curvature_tensor();
        let eta1 = lower_vec(&c.eta);
        let xi1 = lower_vec(&c.xi);
        let tn2 = |x: &[Jet1], u: &[Jet2]| transverse_nabla::<Jet2>(&m.gamma, &eta1, &c.xi, x, u);
        let tn1 = |x: &[f64], u: &[Jet1]| transverse_nabla::<Jet1>(&m.gamma0, &c.eta0, &xi1, x, u);
        let tn_const = |x: &[f64], u: &[Jet2]| values(&tn2(&const_jet1(x), u));
        let phi = |v: &[f64]| apply(&c.phi0, v);
        let big_phi = |x: &[f64], y: &[f64]| c.fundamental(x, y);
        let g = |x: &[f64], y: &[f64]| m.inner(x, y);
        let mut r = Residuals::new();
        for u in &c.d_sections {
            let u0 = values(u);
            for v in &c.d_sections {
                let v0 = values(v);
                let br = values(&lie_bracket(u, v));
                let br_d = c.project(&br);
                let puv = big_phi(&u0, &v0);

                let r_xi = MetricAt::curvature_apply(&rt, &u0, &v0, &c.xi0);
                let along = |x: &[Jet2], fx: &[Jet2]| {
                    let e = dot(&c.eta, fx);
                    c.nabla_at(&values(x), &mul_vec(&e, &c.xi))
                };
                let tail = scale_vec(&c.xi0, beta * c.eta_of(&br));
                let printed = add_vec(
                    &sub_vec(&scale_vec(&along(v, u), beta), &scale_vec(&along(v, v), beta)),
                    &tail,
                );
                let swapped = add_vec(
                    &sub_vec(&scale_vec(&along(v, u), beta), &scale_vec(&along(u, v), beta)),
                    &tail,
                );
                r.push("iv_r_xi", m.vector_norm(&sub_vec(&r_xi, &printed)));
                r.info("iv_r_xi_swapped", m.vector_norm(&sub_vec(&r_xi, &swapped)));
                r.info("iv_generic_side", m.vector_norm(&r_xi));
                r.info("iv_printed_side", m.vector_norm(&printed));

                for w in &c.d_sections {
                    let w0 = values(w);
                    let xi_w = values(&lie_bracket(&c.xi, w));

                    // (i)
                    let lhs = tn_const(&br_d, w);
                    let rhs = add_vec(&tn_const(&br, w), &scale_vec(&xi_w, 2.0 * alpha * puv));
                    r.push("i_transverse_bracket", m.vector_norm(&sub_vec(&lhs, &rhs)));

                    // (ii)
                    let lhs = c.nabla_at(&br, w);
                    let mut rhs = scale_vec(&phi(&w0), 2.0 * a2 * puv);
                    rhs = sub_vec(&rhs, &scale_vec(&w0, 2.0 * ab * puv));
                    rhs = sub_vec(&rhs, &scale_vec(&c.xi0, alpha * big_phi(&br_d, &w0)));
                    rhs = sub_vec(&rhs, &scale_vec(&c.xi0, beta * g(&br, &w0)));
                    rhs = add_vec(&rhs, &tn_const(&br, w));
                    r.push("ii_nabla_bracket", m.vector_norm(&sub_vec(&lhs, &rhs)));

                    // (iii)
                    let r_uvw = MetricAt::curvature_apply(&rt, &u0, &v0, &w0);
                    let r_t = sub_vec(
                        &sub_vec(&tn1(&u0, &tn2(&lower_vec(v), w)), &tn1(&v0, &tn2(&lower_vec(u), w))),
                        &tn_const(&br, w),
                    );
                    let (pu, pv) = (phi(&u0), phi(&v0));
                    let (ppu, ppv) = (phi(&pu), phi(&pv));
                    let terms: [(f64, &[f64]); 11] = [
                        (a2 * big_phi(&v0, &w0), &pu),
                        (-2.0 * a2 * puv, &phi(&w0)),
                        (-a2 * big_phi(&u0, &w0), &pv),
                        (ab * big_phi(&v0, &w0), &ppu),
                        (ab * g(&v0, &w0), &pu),
                        (b2 * g(&v0, &w0), &ppu),
                        (-ab * g(&u0, &w0), &pv),
                        (-b2 * g(&u0, &w0), &ppv),
                        (2.0 * ab * puv, &w0),
                        (-ab * big_phi(&u0, &w0), &ppv),
                        (1.0, &r_t),
                    ];
                    let mut rhs = vec![0.0; w0.len()];
                    for (k, vec) in terms {
                        rhs = add_vec(&rhs, &scale_vec(vec, k));
                    }
                    r.push("iii_curvature", m.vector_norm(&sub_vec(&r_uvw, &rhs)));
                    r.info(
                        "curvature_from_fields",
                        m.vector_norm(&sub_vec(&r_uvw, &crate::riemann::curvature_of_fields(m, u, v, w))),
                    );
                }
            }
        }
        Ok(r)
    });
    report.note(
        "R(U,V)xi: on sections of D the eta(U), eta(V) terms vanish identically, so the printed and swapped forms coincide",
    );
    report
}

/// `φR(U,φU)W − R(U,φU)φW − 2αβ[g(U,W)φU − g(U,φW)U]` for `U, W ∈ D` at `p`.
pub fn corollary_c2_residual(
    f: &TransSasakianFactor,
    u: &[f64],
    w: &[f64],
    p: &[f64],
    tol: f64,
    mode: DiffMode,
) -> Result<Vec<f64>> {
    let c = f.structure.at(p, mode)?;
    for v in [u, w] {
        if v.len() != c.dim() {
            return Err(GeomError::ChartMismatch {
                expected: c.dim(),
                found: v.len(),
            });
        }
        let e = c.eta_of(v).abs();
        if e >= tol {
            return Err(GeomError::NotASectionOfD { residual: e });
        }
    }
    Ok(c2_at(&c, &c.metric.curvature_tensor(), f.alpha * f.beta, u, w))
}

fn c2_at(c: &ContactAt, rt: &[f64], ab: f64, u: &[f64], w: &[f64]) -> Vec<f64> {
    let pu = apply(&c.phi0, u);
    let pw = apply(&c.phi0, w);
    let lhs = sub_vec(
        &apply(&c.phi0, &MetricAt::curvature_apply(rt, u, &pu, w)),
        &MetricAt::curvature_apply(rt, u, &pu, &pw),
    );
    let m = &c.metric;
    let rhs = sub_vec(&scale_vec(&pu, 2.0 * ab * m.inner(u, w)), &scale_vec(u, 2.0 * ab * m.inner(u, &pw)));
    sub_vec(&lhs, &rhs)
}

/// The `φ`-commutation of `R(U, φU)` over `U, W ∈ {φ∂_i}`.
pub fn corollary_c2_report(f: &TransSasakianFactor, points: &[Vec<f64>], tol: f64, mode: DiffMode) -> CheckReport {
    let ab = f.alpha * f.beta;
    evaluate("corollary_c2", tol, points, |p| {
        let c = f.structure.at(p, mode)?;
        let rt = c.metric.curvature_tensor();
        let mut r = Residuals::new();
        for u in &c.d_sections {
            for w in &c.d_sections {
                let res = c2_at(&c, &rt, ab, &values(u), &values(w));
                r.push("phi_commutes_with_curvature", c.metric.vector_norm(&res));
            }
        }
        Ok(r)
    })
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn exprs(texts: &[&str], coords: &[String]) -> Result<Vec<Expr>> {
    texts.iter().map(|t| parse(t, coords)).collect()
}

/// A structure from expression strings: `φ` and `g` as row-major `d × d`
/// tables, `ξ` and `η` as `d` components. Coordinates under `exp` get the
/// shrunken sampling box.
pub fn model(
    name: &str,
    coords: &[&str],
    phi: &[&str],
    xi: &[&str],
    eta: &[&str],
    g: &[&str],
) -> Result<AlmostContactMetricStructure> {
    let mut chart = ChartDomain::from_names(coords)?;
    let names = chart.coords.clone();
    let d = names.len();
    for (len, want) in [(phi.len(), d * d), (xi.len(), d), (eta.len(), d), (g.len(), d * d)] {
        if len != want {
            return Err(GeomError::ChartMismatch {
                expected: want,
                found: len,
            });
        }
    }
    let phi = EndomorphismField::new(d, exprs(phi, &names)?)?;
    let gx = exprs(g, &names)?;
    for i in 0..d {
        for j in 0..i {
            if gx[i * d + j] != gx[j * d + i] {
                return Err(GeomError::InvalidChart(format!("metric entries ({i},{j}) and ({j},{i}) differ")));
            }
        }
    }
    let g = MetricField::symmetric(d, |i, j| gx[i * d + j].clone());
    let s = AlmostContactMetricStructure::new(
        name,
        chart.clone(),
        phi,
        VectorField::new(exprs(xi, &names)?),
        OneFormField::new(exprs(eta, &names)?),
        g,
    )?;
    chart.shrink_exp_coords(s.all_exprs());
    Ok(AlmostContactMetricStructure { chart, ..s })
}

/// Flat `ℝ³` with `ξ = ∂z`, `φ∂x = ∂y`, `φ∂y = −∂x`.
pub fn cosymplectic_flat() -> Result<AlmostContactMetricStructure> {
    model(
        "cosymplectic_flat",
        &["x", "y", "z"],
        &["0", "-1", "0", "1", "0", "0", "0", "0", "0"],
        &["0", "0", "1"],
        &["0", "0", "1"],
        &["1", "0", "0", "0", "1", "0", "0", "0", "1"],
    )
}

/// Heisenberg group with `η = c(dz − y dx)`, `ξ = (1/c)∂z`,
/// `g = η⊗η + c²s(dx² + dy²)` and the orthonormal `D`-frame
/// `e₁ = (∂x + y∂z)/(c√s)`, `e₂ = −∂y/(c√s)`, `φe₁ = e₂`.
pub fn heisenberg(c: f64, s: f64) -> Result<AlmostContactMetricStructure> {
    let k = c * c * s;
    let (phi, xi, eta, g) = (
        ["0", "1", "0", "-1", "0", "0", "0", "y", "0"].map(String::from),
        ["0".to_string(), "0".to_string(), format!("{}", 1.0 / c)],
        [format!("-{c}*y"), "0".to_string(), format!("{c}")],
        [
            format!("{}*y*y + {k}", c * c),
            "0".to_string(),
            format!("-{}*y", c * c),
            "0".to_string(),
            format!("{k}"),
            "0".to_string(),
            format!("-{}*y", c * c),
            "0".to_string(),
            format!("{}", c * c),
        ],
    );
    model("sasakian_heisenberg", &["x", "y", "z"], &strs(&phi), &strs(&xi), &strs(&eta), &strs(&g))
}

/// `dt² + e^{2βt}(dx² + dy²)` with `ξ = ∂t`, `φ∂x = ∂y`, `φ∂y = −∂x`; type `(0, β)`.
pub fn kenmotsu_warped_with(beta: f64) -> Result<AlmostContactMetricStructure> {
    let w = format!("exp({}*t)", 2.0 * beta);
    let name = if beta == 1.0 {
        "kenmotsu_warped".to_string()
    } else {
        format!("kenmotsu_warped(beta={beta})")
    };
    model(
        &name,
        &["t", "x", "y"],
        &["0", "0", "0", "0", "0", "-1", "0", "1", "0"],
        &["1", "0", "0"],
        &["1", "0", "0"],
        &["1", "0", "0", "0", &w, "0", "0", "0", &w],
    )
}

/// Calibrated Heisenberg constants: `c = ½`, `s = 1` give type `(1, 0)`.
pub const HEISENBERG_C: f64 = 0.5;
pub const HEISENBERG_S: f64 = 1.0;

pub const BUILTIN_NAMES: [&str; 3] = ["sasakian_heisenberg", "kenmotsu_warped", "cosymplectic_flat"];

/// One of the built-in models, validated, with its type.
pub fn builtin_factor(name: &str) -> Result<TransSasakianFactor> {
    let (s, alpha, beta) = match name {
        "cosymplectic_flat" => (cosymplectic_flat()?, 0.0, 0.0),
        "sasakian_heisenberg" => (heisenberg(HEISENBERG_C, HEISENBERG_S)?, 1.0, 0.0),
        "kenmotsu_warped" => (kenmotsu_warped_with(1.0)?, 0.0, 1.0),
        _ => return Err(GeomError::UnknownModel(name.to_string())),
    };
    TransSasakianFactor::validated(s, alpha, beta, 1e-8)
}
