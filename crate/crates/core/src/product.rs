//! The Hermitian structure `(J_{a,b}, g_{a,b})` on a product of two almost
//! contact metric manifolds, and the closed forms for its connection, `∇J`
//! and curvature, each checked against the generic computation.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::check::{evaluate, CheckReport, IdentityStat, Residuals};
use crate::contact::{dot, TransSasakianFactor};
use crate::error::{GeomError, Result};
use crate::expr::{DiffMode, Expr};
use crate::geom::{lie_bracket, ChartDomain, EndomorphismField, MetricField, OneFormField, VectorField};
use crate::jet::Jet2;
use crate::riemann::{add_vec, apply, compose, lower_vec, nabla_vec, scale_vec, sub_vec, values, MetricAt};

/// `M₁ × M₂` with `J_{a,b}` and `g_{a,b}`; factor-1 coordinates come first.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductHermitian {
    pub f1: TransSasakianFactor,
    pub f2: TransSasakianFactor,
    pub a: f64,
    pub b: f64,
    /// `a² + b² − 1`.
    pub lambda: f64,
    pub chart: ChartDomain,
    pub j: EndomorphismField,
    pub g: MetricField,
    /// The product metric `g₁ ⊕ g₂`, whose connection is `∇¹ ⊕ ∇²`.
    pub block: MetricField,
    pub phi: [EndomorphismField; 2],
    pub xi: [VectorField; 2],
    pub eta: [OneFormField; 2],
    pub dims: [usize; 2],
    /// Set on the deliberately broken control structure.
    pub broken: bool,
}

fn lift_vec(comps: &[Expr], offset: usize, total: usize) -> Vec<Expr> {
    let mut out = vec![Expr::zero(); total];
    for (i, e) in comps.iter().enumerate() {
        out[offset + i] = e.shift_coords(offset);
    }
    out
}

fn lift_endo(e: &EndomorphismField, offset: usize, total: usize) -> EndomorphismField {
    let d = e.dim;
    EndomorphismField::from_fn(total, |k, l| {
        if (offset..offset + d).contains(&k) && (offset..offset + d).contains(&l) {
            e.get(k - offset, l - offset).shift_coords(offset)
        } else {
            Expr::zero()
        }
    })
}

fn lift_metric(g: &MetricField, offset: usize, k: usize, l: usize) -> Option<Expr> {
    let d = g.dim;
    if (offset..offset + d).contains(&k) && (offset..offset + d).contains(&l) {
        Some(g.get(k - offset, l - offset).shift_coords(offset))
    } else {
        None
    }
}

/// Build the product; both factors must have been validated.
pub fn build_product(f1: &TransSasakianFactor, f2: &TransSasakianFactor, a: f64, b: f64) -> Result<ProductHermitian> {
    for f in [f1, f2] {
        if !f.validated {
            return Err(GeomError::UnvalidatedFactor {
                name: f.name().to_string(),
                reason: "factor was not validated".into(),
            });
        }
    }
    assemble(f1, f2, a, b, false)
}

/// The negative control: `b` replaced by `2b` in the `Jξ₂` row only, so the
/// result is neither almost complex nor integrable.
pub fn build_broken_product(f1: &TransSasakianFactor, f2: &TransSasakianFactor, a: f64, b: f64) -> Result<ProductHermitian> {
    assemble(f1, f2, a, b, true)
}

fn assemble(f1: &TransSasakianFactor, f2: &TransSasakianFactor, a: f64, b: f64, broken: bool) -> Result<ProductHermitian> {
    if b == 0.0 {
        return Err(GeomError::ZeroB);
    }
    let (s1, s2) = (&f1.structure, &f2.structure);
    let (d1, d2) = (s1.dim(), s2.dim());
    let d = d1 + d2;
    let chart = s1.chart.product(&s2.chart)?;
    let phi = [lift_endo(&s1.phi, 0, d), lift_endo(&s2.phi, d1, d)];
    let xi = [
        VectorField::new(lift_vec(&s1.xi.comps, 0, d)),
        VectorField::new(lift_vec(&s2.xi.comps, d1, d)),
    ];
    let eta = [
        OneFormField::new(lift_vec(&s1.eta.comps, 0, d)),
        OneFormField::new(lift_vec(&s2.eta.comps, d1, d)),
    ];
    let lambda = a * a + b * b - 1.0;
    let b2 = if broken { 2.0 * b } else { b };
    // J = φ₁ + φ₂ + Σ c_{pq} ξ_p ⊗ η_q
    let c = [[-a / b, -(a * a + b2 * b2) / b2], [1.0 / b, a / b2]];
    let j = EndomorphismField::from_fn(d, |k, l| {
        let mut terms = vec![phi[0].get(k, l).clone(), phi[1].get(k, l).clone()];
        for (p, row) in c.iter().enumerate() {
            for (q, &cpq) in row.iter().enumerate() {
                let t = Expr::mul(xi[p].comps[k].clone(), eta[q].comps[l].clone());
                terms.push(Expr::scale(cpq, t));
            }
        }
        Expr::sum(terms)
    });
    let block = MetricField::symmetric(d, |k, l| {
        lift_metric(&s1.g, 0, k, l)
            .or_else(|| lift_metric(&s2.g, d1, k, l))
            .unwrap_or_else(Expr::zero)
    });
    let (e1, e2) = (&eta[0].comps, &eta[1].comps);
    let g = MetricField::symmetric(d, |k, l| {
        let mixed = Expr::add(Expr::mul(e1[k].clone(), e2[l].clone()), Expr::mul(e2[k].clone(), e1[l].clone()));
        Expr::sum([
            block.get(k, l).clone(),
            Expr::scale(a, mixed),
            Expr::scale(lambda, Expr::mul(e2[k].clone(), e2[l].clone())),
        ])
    });
    Ok(ProductHermitian {
        f1: f1.clone(),
        f2: f2.clone(),
        a,
        b,
        lambda,
        chart,
        j,
        g,
        block,
        phi,
        xi,
        eta,
        dims: [d1, d2],
        broken,
    })
}

/// Jets of the product structure at one point.
#[derive(Clone, Debug)]
pub struct ProductAt {
    pub metric: MetricAt,
    pub block: MetricAt,
    pub j: Vec<Jet2>,
    pub j0: Vec<f64>,
    pub phi: [Vec<Jet2>; 2],
    pub phi0: [Vec<f64>; 2],
    pub xi: [Vec<Jet2>; 2],
    pub xi0: [Vec<f64>; 2],
    pub eta: [Vec<Jet2>; 2],
    pub eta0: [Vec<f64>; 2],
    /// Columns `φ_i(∂_k)` not identically zero, spanning `D_i`.
    pub sections: [Vec<Vec<Jet2>>; 2],
}

/// `{ξ₁, Jξ₁, e₁…e_{2n₁}, f₁…f_{2n₂}}`, orthonormal for `g_{a,b}`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptedFrame {
    pub vectors: Vec<Vec<f64>>,
    /// Number of `e_j` (spanning `D₁`) and `f_k` (spanning `D₂`).
    pub ranks: [usize; 2],
}

impl AdaptedFrame {
    pub fn e(&self) -> &[Vec<f64>] {
        &self.vectors[2..2 + self.ranks[0]]
    }

    pub fn f(&self) -> &[Vec<f64>] {
        &self.vectors[2 + self.ranks[0]..]
    }
}

fn column<T: Clone>(a: &[T], l: usize, d: usize) -> Vec<T> {
    (0..d).map(|k| a[k * d + l].clone()).collect()
}

/// Gram–Schmidt within a subspace; exactly `rank` vectors are required.
fn orthonormalize(m: &MetricAt, cands: &[Vec<f64>], rank: usize) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(rank);
    for v in cands {
        if out.len() == rank {
            break;
        }
        let scale = m.inner(v, v).max(0.0).sqrt();
        if scale == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for e in &out {
                let c = m.inner(e, &w);
                w = sub_vec(&w, &scale_vec(e, c));
            }
        }
        let n = m.inner(&w, &w).max(0.0).sqrt();
        if n > 1e-10 * scale.max(1.0) {
            out.push(scale_vec(&w, 1.0 / n));
        }
    }
    if out.len() != rank {
        return Err(GeomError::IncompleteFrame {
            found: out.len(),
            dim: rank,
        });
    }
    Ok(out)
}

/// A seeded orthogonal `n × n` matrix (QR of a random matrix).
pub fn random_rotation(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
    let q = m.qr().q();
    (0..n * n).map(|k| q[(k / n, k % n)]).collect()
}

fn mix(vs: &[Vec<f64>], q: &[f64]) -> Vec<Vec<f64>> {
    let n = vs.len();
    (0..n)
        .map(|j| {
            let mut acc = vec![0.0; vs[0].len()];
            for (k, v) in vs.iter().enumerate() {
                acc = add_vec(&acc, &scale_vec(v, q[j * n + k]));
            }
            acc
        })
        .collect()
}

impl ProductHermitian {
    pub fn dim(&self) -> usize {
        self.dims[0] + self.dims[1]
    }

    pub fn alphas(&self) -> [f64; 2] {
        [self.f1.alpha, self.f2.alpha]
    }

    pub fn betas(&self) -> [f64; 2] {
        [self.f1.beta, self.f2.beta]
    }

    /// Complex dimension `m`.
    pub fn complex_dim(&self) -> usize {
        self.dim() / 2
    }

    pub fn label(&self) -> String {
        format!(
            "{} x {} (a={}, b={}){}",
            self.f1.name(),
            self.f2.name(),
            self.a,
            self.b,
            if self.broken { " [broken J]" } else { "" }
        )
    }

    pub fn at(&self, p: &[f64], mode: DiffMode) -> Result<ProductAt> {
        self.chart.check_point(p)?;
        let d = self.dim();
        let metric = MetricAt::from_field(&self.g, p, mode)?;
        let block = MetricAt::from_field(&self.block, p, mode)?;
        let j = self.j.at(p, mode)?;
        let phi = [self.phi[0].at(p, mode)?, self.phi[1].at(p, mode)?];
        let xi = [self.xi[0].at(p, mode)?, self.xi[1].at(p, mode)?];
        let eta = [self.eta[0].at(p, mode)?, self.eta[1].at(p, mode)?];
        let idx = [self.f1.structure.d_section_indices(), self.f2.structure.d_section_indices()];
        let offs = [0, self.dims[0]];
        let sections = [0, 1].map(|i| idx[i].iter().map(|&l| column(&phi[i], l + offs[i], d)).collect());
        Ok(ProductAt {
            j0: values(&j),
            phi0: [values(&phi[0]), values(&phi[1])],
            xi0: [values(&xi[0]), values(&xi[1])],
            eta0: [values(&eta[0]), values(&eta[1])],
            metric,
            block,
            j,
            phi,
            xi,
            eta,
            sections,
        })
    }
}

impl ProductAt {
    pub fn dim(&self) -> usize {
        self.metric.dim
    }

    pub fn eta_of(&self, i: usize, v: &[f64]) -> f64 {
        dot(&self.eta0[i], v)
    }

    pub fn phi_of(&self, i: usize, v: &[f64]) -> Vec<f64> {
        apply(&self.phi0[i], v)
    }

    /// `g_i` on vectors tangent to `M_i`.
    pub fn g_factor(&self, x: &[f64], y: &[f64]) -> f64 {
        self.block.inner(x, y)
    }

    /// `Φ_i(X, Y) = g_i(X, φ_i Y)`.
    pub fn big_phi(&self, i: usize, x: &[f64], y: &[f64]) -> f64 {
        self.block.inner(x, &self.phi_of(i, y))
    }

    /// `{ξ_i} ∪ {φ_i ∂_k}` as jet fields.
    pub fn spanning(&self, i: usize) -> Vec<Vec<Jet2>> {
        let mut v = vec![self.xi[i].clone()];
        v.extend(self.sections[i].iter().cloned());
        v
    }

    /// `∇_X J` for a tangent vector `X`.
    pub fn nabla_j(&self, x: &[f64]) -> Vec<f64> {
        values(&self.metric.nabla_endo_along(x, &self.j))
    }

    /// `∇_X Y` (generic, from `g_{a,b}`) for jet fields.
    pub fn nabla(&self, x: &[Jet2], y: &[Jet2]) -> Vec<f64> {
        values(&nabla_vec::<Jet2>(&self.metric.gamma, &lower_vec(x), y))
    }

    /// `∇^1 ⊕ ∇^2` for jet fields.
    pub fn nabla_block(&self, x: &[Jet2], y: &[Jet2]) -> Vec<f64> {
        values(&nabla_vec::<Jet2>(&self.block.gamma, &lower_vec(x), y))
    }

    pub fn adapted_frame(&self) -> Result<AdaptedFrame> {
        let m = &self.metric;
        let x1 = &self.xi0[0];
        let n = m.inner(x1, x1).sqrt();
        let x1: Vec<f64> = scale_vec(x1, 1.0 / n);
        let jx1 = apply(&self.j0, &x1);
        let ranks = [self.sections[0].len(), self.sections[1].len()];
        let mut vectors = vec![x1, jx1];
        for i in 0..2 {
            let cands: Vec<Vec<f64>> = self.sections[i].iter().map(|s| values(s)).collect();
            vectors.extend(orthonormalize(m, &cands, ranks[i])?);
        }
        Ok(AdaptedFrame { vectors, ranks })
    }

    /// The adapted frame with `e_j` and `f_k` mixed by seeded rotations.
    pub fn rotated_frame(&self, seed: u64) -> Result<AdaptedFrame> {
        let f = self.adapted_frame()?;
        let [r1, r2] = f.ranks;
        let e = mix(f.e(), &random_rotation(r1, seed));
        let ff = mix(f.f(), &random_rotation(r2, seed.wrapping_add(1)));
        let mut vectors = f.vectors[..2].to_vec();
        vectors.extend(e);
        vectors.extend(ff);
        Ok(AdaptedFrame { vectors, ranks: f.ranks })
    }
}

/// Keep the variant of `group` with the smallest residual as the counted
/// identity and note which variants are within tolerance.
fn resolve_variants(report: &mut CheckReport, group: &str) {
    let prefix = format!("{group}[");
    let variants: Vec<IdentityStat> = report
        .identities
        .iter()
        .filter(|s| s.name.starts_with(&prefix))
        .cloned()
        .collect();
    let Some(best) = variants.iter().min_by(|a, b| a.max.total_cmp(&b.max)) else {
        return;
    };
    let matching: Vec<&str> = variants
        .iter()
        .filter(|s| s.max < report.tol)
        .map(|s| &s.name[prefix.len()..s.name.len() - 1])
        .collect();
    let best_name = best.name[prefix.len()..best.name.len() - 1].to_string();
    report.note(format!(
        "{group}: closest variant `{best_name}` (max {:e}); variants within tol: [{}]",
        best.max,
        matching.join(", ")
    ));
    report.push(IdentityStat {
        name: group.to_string(),
        informational: false,
        ..best.clone()
    });
    report.refresh_verdict();
}

/// `J² = −Id`, Hermitian metric, the block structure of `g_{a,b}` and the
/// adapted frame.
pub fn structure_report(p: &ProductHermitian, points: &[Vec<f64>], tol: f64, mode: DiffMode) -> CheckReport {
    let d = p.dim();
    let d1 = p.dims[0];
    let product_case = p.a == 0.0 && p.b.abs() == 1.0;
    evaluate("structure", tol, points, |pt| {
        let c = p.at(pt, mode)?;
        let m = &c.metric;
        let mut r = Residuals::new();
        let mut j2 = compose(&c.j0, &c.j0, d);
        for k in 0..d {
            j2[k * d + k] += 1.0;
        }
        r.push("j_squared", m.endo_norm(&j2));
        let gj = compose(&m.gval, &c.j0, d);
        let mut herm = vec![0.0; d * d];
        for i in 0..d {
            for l in 0..d {
                let s: f64 = (0..d).map(|k| c.j0[k * d + i] * gj[k * d + l]).sum();
                herm[i * d + l] = s - m.gval[i * d + l];
            }
        }
        r.push("hermitian", m.bilinear_norm(&herm));
        for k in 0..d1 {
            for l in d1..d {
                let expected = p.a * c.eta0[0][k] * c.eta0[1][l];
                r.push("mixed_pairing", m.gval[k * d + l] - expected);
            }
        }
        r.push("xi2_length", m.inner(&c.xi0[1], &c.xi0[1]) - (p.a * p.a + p.b * p.b));
        if product_case {
            let dev = m.gval.iter().zip(&c.block.gval).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
            r.push("block_product", dev);
        }
        let f = c.adapted_frame()?;
        for (i, u) in f.vectors.iter().enumerate() {
            for (k, v) in f.vectors.iter().enumerate() {
                r.push("frame_gram", m.inner(u, v) - if i == k { 1.0 } else { 0.0 });
            }
        }
        for e in f.e() {
            r.push("frame_splitting", c.eta_of(0, e));
        }
        for e in f.f() {
            r.push("frame_splitting", c.eta_of(1, e));
        }
        Ok(r)
    })
}

/// Closed forms for `∇_X Y` in the four block cases, against the
/// Christoffel symbols of `g_{a,b}`.
pub fn connection_closed_form_report(p: &ProductHermitian, points: &[Vec<f64>], tol: f64, mode: DiffMode) -> CheckReport {
    let [al1, al2] = p.alphas();
    let [be1, be2] = p.betas();
    let (a, lambda) = (p.a, p.lambda);
    evaluate("connection", tol, points, |pt| {
        let c = p.at(pt, mode)?;
        let m = &c.metric;
        let s = [c.spanning(0), c.spanning(1)];
        let phi = |i: usize, v: &[f64]| c.phi_of(i, v);
        let phi2 = |i: usize, v: &[f64]| c.phi_of(i, &c.phi_of(i, v));
        let mut r = Residuals::new();
        for x in &s[0] {
            let x0 = values(x);
            for y in &s[0] {
                r.push("x1_y1", m.vector_norm(&sub_vec(&c.nabla(x, y), &c.nabla_block(x, y))));
                let y0 = values(y);
                let k1 = c.g_factor(&phi(0, &x0), &phi(0, &y0));
                let n = sub_vec(&c.xi0[1], &scale_vec(&c.xi0[0], a));
                let alt = add_vec(&c.nabla_block(x, y), &scale_vec(&n, a * be1 * k1 / (p.b * p.b)));
                r.info("x1_y1_koszul", m.vector_norm(&sub_vec(&c.nabla(x, y), &alt)));
            }
            for y in &s[1] {
                let y0 = values(y);
                let (ey, ex) = (c.eta_of(1, &y0), c.eta_of(0, &x0));
                let mut cf = scale_vec(&phi(0, &x0), al1 * ey);
                cf = add_vec(&cf, &scale_vec(&phi(1, &y0), al2 * ex));
                cf = add_vec(&cf, &scale_vec(&phi2(0, &x0), be1 * ey));
                cf = add_vec(&cf, &scale_vec(&phi2(1, &y0), be2 * ex));
                r.push("x1_y2", m.vector_norm(&sub_vec(&c.nabla(x, y), &scale_vec(&cf, -a))));
                let mut cf = scale_vec(&phi(0, &x0), al1 * ey);
                cf = add_vec(&cf, &scale_vec(&phi(1, &y0), al2 * ex));
                r.info("x1_y2_alpha_only", m.vector_norm(&sub_vec(&c.nabla(x, y), &scale_vec(&cf, -a))));
                // ∇_{Y₂} X₁ with the roles of the fourth formula.
                let (ex2, ey1) = (c.eta_of(1, &y0), c.eta_of(0, &x0));
                let mut cf = scale_vec(&phi(0, &x0), al1 * ex2);
                cf = add_vec(&cf, &scale_vec(&phi(1, &y0), al2 * ey1));
                cf = add_vec(&cf, &scale_vec(&phi2(0, &x0), be1 * ex2));
                cf = add_vec(&cf, &scale_vec(&phi2(1, &y0), be2 * ey1));
                r.push("x2_y1", m.vector_norm(&sub_vec(&c.nabla(y, x), &scale_vec(&cf, -a))));
                let mut cf = scale_vec(&phi(0, &x0), al1 * ex2);
                cf = add_vec(&cf, &scale_vec(&phi(1, &y0), al2 * ey1));
                r.info("x2_y1_alpha_only", m.vector_norm(&sub_vec(&c.nabla(y, x), &scale_vec(&cf, -a))));
            }
        }
        for x in &s[1] {
            let x0 = values(x);
            for y in &s[1] {
                let y0 = values(y);
                let mut corr = scale_vec(&add_vec(&scale_vec(&phi(1, &y0), al2), &scale_vec(&phi2(1, &y0), be2)), c.eta_of(1, &x0));
                corr = add_vec(
                    &corr,
                    &scale_vec(&add_vec(&scale_vec(&phi(1, &x0), al2), &scale_vec(&phi2(1, &x0), be2)), c.eta_of(1, &y0)),
                );
                let cf = sub_vec(&c.nabla_block(x, y), &scale_vec(&corr, lambda));
                r.push("x2_y2", m.vector_norm(&sub_vec(&c.nabla(x, y), &cf)));
                // Koszul with dη₂ = 2α₂Φ₂ and (∇η₂) symmetric part β₂ g₂(φ₂·, φ₂·).
                let sym = c.g_factor(&phi(1, &x0), &phi(1, &y0));
                let mut alt = sub_vec(
                    &c.nabla_block(x, y),
                    &scale_vec(&add_vec(&scale_vec(&phi(1, &y0), c.eta_of(1, &x0)), &scale_vec(&phi(1, &x0), c.eta_of(1, &y0))), lambda * al2),
                );
                let bb = p.b * p.b;
                alt = add_vec(&alt, &scale_vec(&c.xi0[0], be2 * sym * a / bb));
                alt = add_vec(&alt, &scale_vec(&c.xi0[1], be2 * sym * (1.0 - 1.0 / bb)));
                r.info("x2_y2_koszul", m.vector_norm(&sub_vec(&c.nabla(x, y), &alt)));
            }
        }
        for (name, i, k) in [("xi1_xi1", 0, 0), ("xi2_xi2", 1, 1), ("xi1_xi2", 0, 1), ("xi2_xi1", 1, 0)] {
            r.push(name, m.vector_norm(&c.nabla(&c.xi[i], &c.xi[k])));
        }
        Ok(r)
    })
}

/// Closed forms for `(∇_X J)Y` in the four block cases, plus `∇_{ξ_i} J = 0`.
///
/// Two printed forms are ambiguous and are evaluated in several readings:
/// the `ξ₂` coefficient of the first (`β₁²/b` as printed or `β₁/b`), and the
/// fourth, whose `φ₂²X₂` term is printed without `η₁(Y₁)` and whose last term
/// carries `β₁` where `β₂` may be meant. The reading closest to the generic
/// value is kept as the counted identity.
pub fn nabla_j_report(p: &ProductHermitian, points: &[Vec<f64>], tol: f64, mode: DiffMode) -> CheckReport {
    let [al1, al2] = p.alphas();
    let [be1, be2] = p.betas();
    let (a, b, lambda) = (p.a, p.b, p.lambda);
    let s2 = a * a + b * b;
    let mut report = evaluate("nabla_j", tol, points, |pt| {
        let c = p.at(pt, mode)?;
        let m = &c.metric;
        let sp: [Vec<Vec<f64>>; 2] = [0, 1].map(|i| c.spanning(i).iter().map(|v| values(v)).collect());
        let (xi1, xi2) = (&c.xi0[0], &c.xi0[1]);
        let phi = |i: usize, v: &[f64]| c.phi_of(i, v);
        let gf = |x: &[f64], y: &[f64]| c.g_factor(x, y);
        let mut r = Residuals::new();
        r.push("nabla_xi1_j", m.endo_norm(&c.nabla_j(xi1)));
        r.push("nabla_xi2_j", m.endo_norm(&c.nabla_j(xi2)));
        let lhs = |x: &[f64], y: &[f64]| apply(&c.nabla_j(x), y);
        let lin = |terms: &[(f64, &[f64])]| {
            let mut out = vec![0.0; c.dim()];
            for (k, v) in terms {
                out = add_vec(&out, &scale_vec(v, *k));
            }
            out
        };
        for x in &sp[0] {
            let px = phi(0, x);
            let ppx = phi(0, &px);
            let pppx = phi(0, &ppx);
            let ex = c.eta_of(0, x);
            for y in &sp[0] {
                let ey = c.eta_of(0, y);
                let big = c.big_phi(0, x, y);
                let gpp = gf(&px, &phi(0, y));
                let base = lin(&[
                    (al1 * gf(x, y), xi1),
                    (-al1 * ey, x),
                    (-(a / b) * al1 * big, xi1),
                    ((al1 / b) * big, xi2),
                    (-(a / b) * be1 * gpp, xi1),
                    (be1 * gf(&px, y), xi1),
                    (-be1 * ey, &px),
                    (-(a / b) * be1 * ey, x),
                    ((a / b) * be1 * ey * ex, xi1),
                ]);
                let l = lhs(x, y);
                let printed = add_vec(&base, &scale_vec(xi2, (be1 / b) * be1 * gpp));
                let single = add_vec(&base, &scale_vec(xi2, (be1 / b) * gpp));
                r.info("l3_i[printed]", m.vector_norm(&sub_vec(&l, &printed)));
                let bb = b * b;
                let bxy = gf(&px, y);
                let derived = lin(&[
                    (al1 * gf(x, y) - (a / b) * al1 * big + be1 * bxy + (a * a / bb) * be1 * bxy, xi1),
                    (-al1 * ey, x),
                    ((al1 / b) * big + (be1 / b) * gpp - (a / bb) * be1 * bxy, xi2),
                    (-be1 * ey, &px),
                    ((a / b) * be1 * ey, &ppx),
                ]);
                r.info("l3_i_koszul", m.vector_norm(&sub_vec(&l, &derived)));
                r.info("l3_i[single_beta1]", m.vector_norm(&sub_vec(&l, &single)));
            }
            for y in &sp[1] {
                let ey = c.eta_of(1, y);
                let cf = lin(&[
                    (a * al1 * ey * ex, xi1),
                    (-a * al1 * ey, x),
                    (b * al1 * ey, &px),
                    (-b * be1 * ey, x),
                    (b * be1 * ey * ex, xi1),
                    (a * be1 * ey, &pppx),
                ]);
                r.push("l3_iii", m.vector_norm(&sub_vec(&lhs(x, y), &cf)));
                let derived = lin(&[
                    (a * al1 * ey, &ppx),
                    (b * al1 * ey, &px),
                    ((s2 / b) * be1 * ey, &ppx),
                ]);
                r.info("l3_iii_koszul", m.vector_norm(&sub_vec(&lhs(x, y), &derived)));
            }
        }
        for x in &sp[1] {
            let px = phi(1, x);
            let ppx = phi(1, &px);
            let pppx = phi(1, &ppx);
            let ex = c.eta_of(1, x);
            for y in &sp[1] {
                let ey = c.eta_of(1, y);
                let big = c.big_phi(1, x, y);
                let inner = al2 * big + be2 * gf(x, y) - be2 * ex * ey;
                let cf = lin(&[
                    (al2 * (gf(x, y) + lambda * ex * ey), xi2),
                    (-s2 * al2 * ey, x),
                    (be2 * gf(&px, y), xi2),
                    (-s2 * be2 * ey, &px),
                    (-(s2 / b) * inner, xi1),
                    ((a / b) * inner, xi2),
                ]);
                r.push("l3_ii", m.vector_norm(&sub_vec(&lhs(x, y), &cf)));
                let bb = b * b;
                let gpxy = gf(&px, y);
                let derived = lin(&[
                    (al2 * (gf(x, y) + lambda * ex * ey), xi2),
                    (-s2 * al2 * ey, x),
                    (-be2 * ey, &px),
                    (-(a / b) * be2 * ey, &ppx),
                    (-(s2 / b) * al2 * big - (a / bb) * be2 * gpxy - (be2 / b) * gf(&px, &phi(1, y)), xi1),
                    ((a / b) * al2 * big + (be2 / bb) * gpxy, xi2),
                ]);
                r.info("l3_ii_koszul", m.vector_norm(&sub_vec(&lhs(x, y), &derived)));
            }
            for y in &sp[0] {
                let ey = c.eta_of(0, y);
                let l = lhs(x, y);
                let base = lin(&[
                    (a * al2 * ey * ex, xi2),
                    (-a * al2 * ey, x),
                    (-b * al2 * ey, &px),
                    ((a * a / b) * ey * be2, &ppx),
                ]);
                let derived = lin(&[
                    (a * al2 * ey * ex, xi2),
                    (-a * al2 * ey, x),
                    (-b * al2 * ey, &px),
                    (-(be2 / b) * ey, &ppx),
                ]);
                r.info("l3_iv_koszul", m.vector_norm(&sub_vec(&l, &derived)));
                // (coefficient of the φ₂²X₂ term, β in the last term)
                for (name, k, beta_last) in [
                    ("printed", (s2 / b) * be2, be1),
                    ("printed_beta2", (s2 / b) * be2, be2),
                    ("eta_restored", (s2 / b) * be2 * ey, be1),
                    ("eta_restored_beta2", (s2 / b) * be2 * ey, be2),
                    ("eta_restored_minus", -(s2 / b) * be2 * ey, be1),
                    ("eta_restored_minus_beta2", -(s2 / b) * be2 * ey, be2),
                ] {
                    let cf = add_vec(&add_vec(&base, &scale_vec(&ppx, k)), &scale_vec(&pppx, a * beta_last * ey));
                    r.info(&format!("l3_iv[{name}]"), m.vector_norm(&sub_vec(&l, &cf)));
                }
            }
        }
        Ok(r)
    });
    resolve_variants(&mut report, "l3_i");
    resolve_variants(&mut report, "l3_iv");
    report
}

/// Closed forms for the curvature of `g_{a,b}` on `D₁`, `D₂` and the `ξ`'s.
pub fn curvature_closed_form_report(p: &ProductHermitian, points: &[Vec<f64>], tol: f64, mode: DiffMode) -> CheckReport {
    let [al1, al2] = p.alphas();
    let [be1, be2] = p.betas();
    let (a, lambda) = (p.a, p.lambda);
    let d1 = p.dims[0];
    evaluate("curvature", tol, points, |pt| {
        let c = p.at(pt, mode)?;
        let m = &c.metric;
        let d = c.dim();
        let rt = m.curvature_tensor();
        let rb = c.block.curvature_tensor();
        let rg = |x: &[f64], y: &[f64], z: &[f64]| MetricAt::curvature_apply(&rt, x, y, z);
        let rf = |x: &[f64], y: &[f64], z: &[f64]| MetricAt::curvature_apply(&rb, x, y, z);
        let phi = |i: usize, v: &[f64]| c.phi_of(i, v);
        let phi2 = |i: usize, v: &[f64]| c.phi_of(i, &c.phi_of(i, v));
        let unit = |k: usize| -> Vec<f64> { (0..d).map(|i| if i == k { 1.0 } else { 0.0 }).collect() };
        // Z_i over ξ_i and the coordinate fields of M_i.
        let zs: [Vec<Vec<f64>>; 2] = [
            std::iter::once(c.xi0[0].clone()).chain((0..d1).map(unit)).collect(),
            std::iter::once(c.xi0[1].clone()).chain((d1..d).map(unit)).collect(),
        ];
        let mut r = Residuals::new();
        for k in 0..d {
            r.push("r_xi1_xi2", m.vector_norm(&rg(&c.xi0[0], &c.xi0[1], &unit(k))));
        }
        let sec = &c.sections;
        for u in &sec[0] {
            let u0 = values(u);
            for v in &sec[0] {
                let v0 = values(v);
                let big = c.big_phi(0, &u0, &v0);
                let n = sub_vec(&c.xi0[1], &scale_vec(&c.xi0[0], a));
                let bb = p.b * p.b;
                for z in &zs[0] {
                    let lhs = rg(&u0, &v0, z);
                    r.push("r11_z1", m.vector_norm(&sub_vec(&lhs, &rf(&u0, &v0, z))));
                    let pz = phi(0, z);
                    let mut cf = add_vec(&rf(&u0, &v0, z), &scale_vec(&n, -2.0 * a * al1 * be1 * c.eta_of(0, z) * big / bb));
                    let kv = c.g_factor(&phi(0, &v0), &pz);
                    let ku = c.g_factor(&phi(0, &u0), &pz);
                    cf = add_vec(&cf, &scale_vec(&sub_vec(&scale_vec(&phi2(0, &u0), kv), &scale_vec(&phi2(0, &v0), ku)), a * a * be1 * be1 / bb));
                    r.info("r11_z1_koszul", m.vector_norm(&sub_vec(&lhs, &cf)));
                }
                for z in &zs[1] {
                    let cf = add_vec(
                        &scale_vec(&phi(1, z), -2.0 * a * al1 * al2 * big),
                        &scale_vec(&phi2(1, z), -2.0 * a * be2 * al1 * big),
                    );
                    r.push("r11_z2", m.vector_norm(&sub_vec(&rg(&u0, &v0, z), &cf)));
                    let gpuv = c.g_factor(&phi(0, &u0), &v0);
                    let ez = c.eta_of(1, z);
                    let mut cf = scale_vec(&phi(1, z), -2.0 * a * al1 * al2 * big);
                    cf = add_vec(&cf, &scale_vec(&c.xi0[0], -2.0 * a * al1 * be1 * ez * gpuv));
                    cf = add_vec(&cf, &scale_vec(&n, 2.0 * a * a * al1 * be1 * ez * gpuv / bb));
                    r.info("r11_z2_koszul", m.vector_norm(&sub_vec(&rg(&u0, &v0, z), &cf)));
                }
                let br = values(&lie_bracket(u, v));
                let cf = scale_vec(&c.xi0[0], -be1 * c.eta_of(0, &br));
                r.push("r11_xi1", m.vector_norm(&sub_vec(&rg(&u0, &v0, &c.xi0[0]), &cf)));
                r.push("r11_xi2", m.vector_norm(&rg(&u0, &v0, &c.xi0[1])));
            }
        }
        for u in &sec[1] {
            let u0 = values(u);
            for v in &sec[1] {
                let v0 = values(v);
                let big = c.big_phi(1, &u0, &v0);
                for z in &zs[0] {
                    let cf = add_vec(
                        &scale_vec(&phi(0, z), -2.0 * a * al1 * al2 * big),
                        &scale_vec(&phi2(0, z), -2.0 * a * al2 * be1 * big),
                    );
                    r.push("r22_z1", m.vector_norm(&sub_vec(&rg(&u0, &v0, z), &cf)));
                    let gpuv = c.g_factor(&phi(1, &u0), &v0);
                    let n = sub_vec(&c.xi0[1], &scale_vec(&c.xi0[0], a));
                    let cf = add_vec(
                        &scale_vec(&phi(0, z), -2.0 * a * al1 * al2 * big),
                        &scale_vec(&n, -2.0 * a * al2 * be2 * c.eta_of(0, z) * gpuv / (p.b * p.b)),
                    );
                    r.info("r22_z1_koszul", m.vector_norm(&sub_vec(&rg(&u0, &v0, z), &cf)));
                }
                let ab = |w: &[f64]| add_vec(&scale_vec(&phi(1, w), al2), &scale_vec(&phi2(1, w), be2));
                let bb = p.b * p.b;
                let mvec = add_vec(&scale_vec(&c.xi0[0], a / bb), &scale_vec(&c.xi0[1], 1.0 - 1.0 / bb));
                let gpuv = c.g_factor(&phi(1, &u0), &v0);
                let r22_derived = |z: &[f64]| -> Vec<f64> {
                    let pz = phi(1, z);
                    let ez = c.eta_of(1, z);
                    let (ku, kv) = (c.g_factor(&phi(1, &u0), &pz), c.g_factor(&phi(1, &v0), &pz));
                    let (fu, fv) = (c.big_phi(1, &u0, z), c.big_phi(1, &v0, z));
                    let mut out = rf(&u0, &v0, z);
                    let mut aa = scale_vec(&pz, 2.0 * big);
                    aa = add_vec(&aa, &scale_vec(&phi(1, &v0), fu));
                    aa = sub_vec(&aa, &scale_vec(&phi(1, &u0), fv));
                    out = sub_vec(&out, &scale_vec(&aa, lambda * al2 * al2));
                    out = sub_vec(&out, &scale_vec(&c.xi0[1], 2.0 * lambda * al2 * be2 * ez * gpuv));
                    out = add_vec(&out, &scale_vec(&mvec, 2.0 * (a * a + bb) * al2 * be2 * ez * gpuv));
                    let bbt = sub_vec(&scale_vec(&phi2(1, &u0), kv), &scale_vec(&phi2(1, &v0), ku));
                    sub_vec(&out, &scale_vec(&bbt, (1.0 - 1.0 / bb) * be2 * be2))
                };
                for z in &zs[1] {
                    let mut corr = scale_vec(&ab(&u0), c.big_phi(1, &v0, z));
                    corr = sub_vec(&corr, &scale_vec(&ab(&v0), c.big_phi(1, &u0, z)));
                    corr = sub_vec(&corr, &scale_vec(&ab(z), 2.0 * al2 * big));
                    let cf = add_vec(&rf(&u0, &v0, z), &scale_vec(&corr, lambda));
                    r.push("r22_z2", m.vector_norm(&sub_vec(&rg(&u0, &v0, z), &cf)));
                    r.info("r22_z2_koszul", m.vector_norm(&sub_vec(&rg(&u0, &v0, z), &r22_derived(z))));
                }
                r.push("r22_xi1", m.vector_norm(&rg(&u0, &v0, &c.xi0[0])));
                let pu = phi(1, &u0);
                let ppv = phi2(1, &v0);
                let pppv = phi(1, &ppv);
                let coef = lambda
                    * (2.0 * al2 * be2 * c.g_factor(&pu, &ppv) - 2.0 * be2 * be2 * c.g_factor(&pu, &pppv));
                let cf = add_vec(&rf(&u0, &v0, &c.xi0[1]), &scale_vec(&c.xi0[1], coef));
                r.push("r22_xi2", m.vector_norm(&sub_vec(&rg(&u0, &v0, &c.xi0[1]), &cf)));
                r.info("r22_xi2_koszul", m.vector_norm(&sub_vec(&rg(&u0, &v0, &c.xi0[1]), &r22_derived(&c.xi0[1]))));
            }
        }
        Ok(r)
    })
}

/// `N_J(X,Y) = [JX,JY] − [X,Y] − J[JX,Y] − J[X,JY]` over coordinate pairs,
/// with the normality of both factors as the precondition.
pub fn integrability_report(p: &ProductHermitian, points: &[Vec<f64>], tol: f64, mode: DiffMode) -> CheckReport {
    let d = p.dim();
    let d1 = p.dims[0];
    evaluate("integrability", tol, points, |pt| {
        let c = p.at(pt, mode)?;
        let m = &c.metric;
        let mut r = Residuals::new();
        let coord: Vec<Vec<Jet2>> = (0..d)
            .map(|i| (0..d).map(|k| Jet2::constant(if k == i { 1.0 } else { 0.0 }, d)).collect())
            .collect();
        let jx: Vec<Vec<Jet2>> = coord.iter().map(|x| apply(&c.j, x)).collect();
        for i in 0..d {
            for k in (i + 1)..d {
                let mut n = values(&lie_bracket(&jx[i], &jx[k]));
                n = sub_vec(&n, &values(&lie_bracket(&coord[i], &coord[k])));
                n = sub_vec(&n, &apply(&c.j0, &values(&lie_bracket(&jx[i], &coord[k]))));
                n = sub_vec(&n, &apply(&c.j0, &values(&lie_bracket(&coord[i], &jx[k]))));
                r.push("nijenhuis", m.vector_norm(&n));
            }
        }
        for (idx, f, range) in [(1, &p.f1, 0..d1), (2, &p.f2, d1..d)] {
            let sub: Vec<f64> = pt[range].to_vec();
            let fc = f.structure.at(&sub, mode)?;
            let fd = sub.len();
            let fcoord: Vec<Vec<Jet2>> = (0..fd)
                .map(|i| (0..fd).map(|k| Jet2::constant(if k == i { 1.0 } else { 0.0 }, fd)).collect())
                .collect();
            for i in 0..fd {
                for k in (i + 1)..fd {
                    let n = fc.normality(&fcoord[i], &fcoord[k]);
                    r.push(&format!("factor{idx}_normality"), fc.metric.vector_norm(&n));
                }
            }
        }
        Ok(r)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check::Verdict;
    use crate::contact::builtin_factor;
    use crate::geom::sample_points;

    fn prod(n1: &str, n2: &str, a: f64, b: f64) -> ProductHermitian {
        build_product(&builtin_factor(n1).unwrap(), &builtin_factor(n2).unwrap(), a, b).unwrap()
    }

    #[test]
    fn frame_formulas() {
        let p = prod("sasakian_heisenberg", "kenmotsu_warped", 1.0, 1.0);
        let pt = sample_points(&p.chart, 1, 3).remove(0);
        let c = p.at(&pt, DiffMode::Jet).unwrap();
        let jxi1 = apply(&c.j0, &c.xi0[0]);
        let expect = sub_vec(&c.xi0[1], &c.xi0[0]);
        assert!(sub_vec(&jxi1, &expect).iter().all(|x| x.abs() < 1e-14));
        let p = prod("sasakian_heisenberg", "kenmotsu_warped", 0.0, 1.0);
        let c = p.at(&pt, DiffMode::Jet).unwrap();
        let jxi2 = apply(&c.j0, &c.xi0[1]);
        assert!(add_vec(&jxi2, &c.xi0[0]).iter().all(|x| x.abs() < 1e-14));
        let p = prod("cosymplectic_flat", "kenmotsu_warped", -2.0, 3.0);
        let c = p.at(&pt, DiffMode::Jet).unwrap();
        assert!((c.metric.inner(&c.xi0[1], &c.xi0[1]) - 13.0).abs() < 1e-12);
    }

    #[test]
    fn zero_b_and_unvalidated_factor() {
        let f = builtin_factor("cosymplectic_flat").unwrap();
        assert!(matches!(build_product(&f, &f, 1.0, 0.0), Err(GeomError::ZeroB)));
        let raw = TransSasakianFactor::unchecked(f.structure.clone(), 0.0, 0.0);
        assert!(matches!(build_product(&raw, &f, 1.0, 1.0), Err(GeomError::UnvalidatedFactor { .. })));
    }

    #[test]
    fn structural_invariants() {
        for (a, b) in [(0.0, 1.0), (1.0, 1.0), (-2.0, 3.0), (0.5, -1.0)] {
            let p = prod("sasakian_heisenberg", "kenmotsu_warped", a, b);
            let pts = sample_points(&p.chart, 10, 5);
            let r = structure_report(&p, &pts, 1e-9, DiffMode::Jet);
            assert_eq!(r.verdict, Verdict::Pass, "{r:#?}");
        }
    }

    #[test]
    fn closed_forms_on_a_mixed_product() {
        let f1 = crate::contact::TransSasakianFactor::validated(crate::contact::kenmotsu_warped_with(2.0).unwrap(), 0.0, 2.0, 1e-8).unwrap();
        let f2 = builtin_factor("sasakian_heisenberg").unwrap();
        for p in [prod("sasakian_heisenberg", "kenmotsu_warped", 1.0, 2.0), build_product(&f1, &f2, -2.0, 3.0).unwrap(), build_product(&f2, &f1, 0.5, -1.0).unwrap()] {
        let pts = sample_points(&p.chart, 6, 5);
        let r = connection_closed_form_report(&p, &pts, 1e-6, DiffMode::Jet);
        for s in &r.identities {
            println!("{} {:e}", s.name, s.max);
        }
        let r = nabla_j_report(&p, &pts, 1e-6, DiffMode::Jet);
        for s in &r.identities {
            println!("{} {:e}", s.name, s.max);
        }
        println!("{:?}", r.notes);
        let r = curvature_closed_form_report(&p, &pts, 1e-6, DiffMode::Jet);
        for s in &r.identities {
            println!("{} {:e}", s.name, s.max);
        }
        let r = integrability_report(&p, &pts, 1e-6, DiffMode::Jet);
        assert_eq!(r.verdict, Verdict::Pass, "{r:#?}");
        }
    }

    #[test]
    fn broken_j_is_not_integrable() {
        let f1 = builtin_factor("sasakian_heisenberg").unwrap();
        let f2 = builtin_factor("kenmotsu_warped").unwrap();
        let p = build_broken_product(&f1, &f2, 1.0, 2.0).unwrap();
        let pts = sample_points(&p.chart, 6, 5);
        let r = integrability_report(&p, &pts, 1e-6, DiffMode::Jet);
        assert!(r.identity("nijenhuis").unwrap().max > 0.1, "{r:#?}");
    }
}
