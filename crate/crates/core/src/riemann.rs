//! Levi-Civita connection, covariant derivatives, curvature and orthonormal
//! frames, all computed from the jets of a metric at a point.
//!
//! Conventions: `Γ[k*d*d + i*d + j] = Γ^k_{ij}`, endomorphisms are row-major
//! with `A[k*d + l] = A^k_l`, and `R(U,V)W = ∇_U∇_V W − ∇_V∇_U W − ∇_{[U,V]}W`.

use nalgebra::{DMatrix, DVector};

use crate::error::{GeomError, Result};
use crate::expr::DiffMode;
use crate::geom::{lie_bracket, EndomorphismField, MetricField, VectorField};
use crate::jet::{Differentiable, Jet1, Jet2, Scalar};

/// `A v` for a row-major endomorphism.
pub fn apply<T: Scalar>(a: &[T], v: &[T]) -> Vec<T> {
    let d = v.len();
    (0..d)
        .map(|k| {
            let mut acc = v[0].constant_like(0.0);
            for l in 0..d {
                acc.fma_assign(&a[k * d + l], &v[l]);
            }
            acc
        })
        .collect()
}

/// `A B`.
pub fn compose<T: Scalar>(a: &[T], b: &[T], d: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(d * d);
    for k in 0..d {
        for l in 0..d {
            let mut acc = a[0].constant_like(0.0);
            for m in 0..d {
                acc.fma_assign(&a[k * d + m], &b[m * d + l]);
            }
            out.push(acc);
        }
    }
    out
}

/// `[A, B] = AB − BA`.
pub fn commutator<T: Scalar>(a: &[T], b: &[T], d: usize) -> Vec<T> {
    let ab = compose(a, b, d);
    let ba = compose(b, a, d);
    ab.iter().zip(&ba).map(|(x, y)| x.minus(y)).collect()
}

pub fn sub_vec<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(x, y)| x.minus(y)).collect()
}

pub fn add_vec<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(x, y)| x.plus(y)).collect()
}

pub fn scale_vec<T: Scalar>(a: &[T], s: f64) -> Vec<T> {
    a.iter().map(|x| x.scaled(s)).collect()
}

/// `s * v` with a scalar of the same order as the components.
pub fn mul_vec<T: Scalar>(s: &T, v: &[T]) -> Vec<T> {
    v.iter().map(|x| s.times(x)).collect()
}

pub fn lower_vec<T: Differentiable>(v: &[T]) -> Vec<T::Deriv> {
    v.iter().map(|x| x.lower()).collect()
}

pub fn values<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.value()).collect()
}

/// Constant vector embedded at the order of `like`.
pub fn constant_vec<T: Scalar>(v: &[f64], like: &T) -> Vec<T> {
    v.iter().map(|&x| like.constant_like(x)).collect()
}

/// `(∇_X Y)^k = X^i (∂_i Y^k + Γ^k_{ij} Y^j)`; `X` and `Γ` are one order
/// below `Y`, and so is the result.
pub fn nabla_vec<T: Differentiable>(gamma: &[T::Deriv], x: &[T::Deriv], y: &[T]) -> Vec<T::Deriv> {
    let d = y.len();
    let yl = lower_vec(y);
    (0..d)
        .map(|k| {
            let mut acc = <T::Deriv as Scalar>::zero(d);
            for i in 0..d {
                let mut inner = y[k].partial(i);
                for j in 0..d {
                    inner.fma_assign(&gamma[k * d * d + i * d + j], &yl[j]);
                }
                acc.fma_assign(&x[i], &inner);
            }
            acc
        })
        .collect()
}

/// `(∇_X A)^k_l = X^i (∂_i A^k_l + Γ^k_{im} A^m_l − Γ^m_{il} A^k_m)`.
pub fn nabla_endo<T: Differentiable>(gamma: &[T::Deriv], x: &[T::Deriv], a: &[T]) -> Vec<T::Deriv> {
    let d = x.len();
    let al = lower_vec(a);
    let mut out = Vec::with_capacity(d * d);
    for k in 0..d {
        for l in 0..d {
            let mut acc = <T::Deriv as Scalar>::zero(d);
            for i in 0..d {
                let mut inner = a[k * d + l].partial(i);
                for m in 0..d {
                    inner.fma_assign(&gamma[k * d * d + i * d + m], &al[m * d + l]);
                    let t = gamma[m * d * d + i * d + l].times(&al[k * d + m]);
                    inner = inner.minus(&t);
                }
                acc.fma_assign(&x[i], &inner);
            }
            out.push(acc);
        }
    }
    out
}

/// Metric jets at a point together with the derived connection data.
#[derive(Clone, Debug)]
pub struct MetricAt {
    pub point: Vec<f64>,
    pub dim: usize,
    pub g: Vec<Jet2>,
    pub gval: Vec<f64>,
    /// Christoffel symbols with first derivatives.
    pub gamma: Vec<Jet1>,
    /// Christoffel symbol values.
    pub gamma0: Vec<f64>,
    /// Lower Cholesky factor of `g`, row-major.
    chol: Vec<f64>,
}

impl MetricAt {
    pub fn from_field(g: &MetricField, p: &[f64], mode: DiffMode) -> Result<Self> {
        if g.dim != p.len() {
            return Err(GeomError::ChartMismatch {
                expected: g.dim,
                found: p.len(),
            });
        }
        Self::new(g.at(p, mode)?, p)
    }

    pub fn new(g: Vec<Jet2>, p: &[f64]) -> Result<Self> {
        let d = p.len();
        let gval: Vec<f64> = g.iter().map(|x| x.value).collect();
        let m = DMatrix::from_row_slice(d, d, &gval);
        let chol = match m.clone().cholesky() {
            Some(c) => c,
            None => {
                let min = m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
                return Err(GeomError::SingularMetric {
                    point: p.to_vec(),
                    min_eigenvalue: min,
                });
            }
        };
        let inv = chol.inverse();
        let l = chol.l();
        let ginv: Vec<f64> = (0..d * d).map(|n| inv[(n / d, n % d)]).collect();

        // ∂_m g^{kl} = −g^{ka} ∂_m g_{ab} g^{bl}
        let mut ginv_jet: Vec<Jet1> = ginv.iter().map(|&v| Jet1::constant(v, d)).collect();
        for mm in 0..d {
            let dg: Vec<f64> = g.iter().map(|x| x.grad[mm]).collect();
            let t = compose(&compose(&ginv, &dg, d), &ginv, d);
            for n in 0..d * d {
                ginv_jet[n].grad[mm] = -t[n];
            }
        }

        // Γ^k_{ij} = g^{kl} ½(∂_i g_{jl} + ∂_j g_{il} − ∂_l g_{ij})
        let mut gamma = vec![Jet1::constant(0.0, d); d * d * d];
        for i in 0..d {
            for j in i..d {
                let s: Vec<Jet1> = (0..d)
                    .map(|l| {
                        g[j * d + l]
                            .partial(i)
                            .plus(&g[i * d + l].partial(j))
                            .minus(&g[i * d + j].partial(l))
                            .scaled(0.5)
                    })
                    .collect();
                for k in 0..d {
                    let mut acc = Jet1::constant(0.0, d);
                    for l in 0..d {
                        acc.fma_assign(&ginv_jet[k * d + l], &s[l]);
                    }
                    gamma[k * d * d + j * d + i] = acc.clone();
                    gamma[k * d * d + i * d + j] = acc;
                }
            }
        }
        let gamma0 = gamma.iter().map(|x| x.value).collect();
        Ok(Self {
            point: p.to_vec(),
            dim: d,
            g,
            gval,
            gamma,
            gamma0,
            chol: (0..d * d).map(|n| l[(n / d, n % d)]).collect(),
        })
    }

    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let d = self.dim;
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += self.gval[i * d + j] * x[i] * y[j];
            }
        }
        s
    }

    /// `g(X, ·)` as a covector.
    pub fn flat(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d).map(|j| (0..d).map(|i| self.gval[i * d + j] * x[i]).sum()).collect()
    }

    fn l_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.chol)
    }

    /// Components of `v` in a g-orthonormal frame (`c = Lᵀ v`).
    pub fn frame_components(&self, v: &[f64]) -> Vec<f64> {
        let c = self.l_matrix().transpose() * DVector::from_column_slice(v);
        c.iter().copied().collect()
    }

    /// Sup-norm of the components in a g-orthonormal frame.
    pub fn vector_norm(&self, v: &[f64]) -> f64 {
        self.frame_components(v).iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Max entry of `A` written in a g-orthonormal frame (`Lᵀ A L⁻ᵀ`).
    pub fn endo_norm(&self, a: &[f64]) -> f64 {
        let d = self.dim;
        let l = self.l_matrix();
        let am = DMatrix::from_row_slice(d, d, a);
        let lt = l.transpose();
        // X = A L⁻ᵀ solves X Lᵀ = A, i.e. L Xᵀ = Aᵀ.
        let xt = l
            .solve_lower_triangular(&am.transpose())
            .expect("Cholesky factor is invertible");
        (lt * xt.transpose()).amax()
    }

    /// Components of a covector on a g-orthonormal frame (`ω L⁻ᵀ`).
    pub fn covector_norm(&self, w: &[f64]) -> f64 {
        let l = self.l_matrix();
        l.solve_lower_triangular(&DVector::from_column_slice(w))
            .expect("Cholesky factor is invertible")
            .amax()
    }

    /// Max entry of a bilinear form on a g-orthonormal frame (`L⁻¹ B L⁻ᵀ`).
    pub fn bilinear_norm(&self, b: &[f64]) -> f64 {
        let d = self.dim;
        let l = self.l_matrix();
        let bm = DMatrix::from_row_slice(d, d, b);
        let y = l.solve_lower_triangular(&bm).expect("invertible");
        let z = l.solve_lower_triangular(&y.transpose()).expect("invertible");
        z.amax()
    }

    /// `R^l_{ijk}` stored at `l*d³ + i*d² + j*d + k`, so that
    /// `R(∂_i, ∂_j)∂_k = R^l_{ijk} ∂_l`.
    pub fn curvature_tensor(&self) -> Vec<f64> {
        let d = self.dim;
        let g = &self.gamma;
        let g0 = &self.gamma0;
        let at = |k: usize, i: usize, j: usize| k * d * d + i * d + j;
        let mut r = vec![0.0; d * d * d * d];
        for l in 0..d {
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        let mut v = g[at(l, j, k)].grad[i] - g[at(l, i, k)].grad[j];
                        for m in 0..d {
                            v += g0[at(l, i, m)] * g0[at(m, j, k)] - g0[at(l, j, m)] * g0[at(m, i, k)];
                        }
                        r[((l * d + i) * d + j) * d + k] = v;
                    }
                }
            }
        }
        r
    }

    /// The curvature operator `R(X, Y)` as a row-major endomorphism.
    pub fn curvature_operator(r: &[f64], x: &[f64], y: &[f64]) -> Vec<f64> {
        let d = x.len();
        let mut out = vec![0.0; d * d];
        for l in 0..d {
            for k in 0..d {
                let mut s = 0.0;
                for i in 0..d {
                    if x[i] == 0.0 {
                        continue;
                    }
                    for j in 0..d {
                        s += x[i] * y[j] * r[((l * d + i) * d + j) * d + k];
                    }
                }
                out[l * d + k] = s;
            }
        }
        out
    }

    /// `R(X, Y)Z` from the curvature tensor.
    pub fn curvature_apply(r: &[f64], x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        apply(&Self::curvature_operator(r, x, y), z)
    }

    /// `∇_X J` for a tangent vector `X` at the point, as a row-major
    /// endomorphism with first derivatives.
    pub fn nabla_endo_along(&self, x: &[f64], a: &[Jet2]) -> Vec<Jet1> {
        let xd = constant_vec(x, &Jet1::constant(0.0, self.dim));
        nabla_endo::<Jet2>(&self.gamma, &xd, a)
    }

    /// `(∇²_{U,V} A) = ∇_U(∇_V A) − ∇_{∇_U V} A` for tangent vectors `U, V`
    /// (extended as constant-coefficient fields; the result is tensorial).
    pub fn second_derivative_endo(&self, u: &[f64], v: &[f64], a: &[Jet2]) -> Vec<f64> {
        let d = self.dim;
        let nv = self.nabla_endo_along(v, a);
        let outer = nabla_endo::<Jet1>(&self.gamma0, u, &nv);
        // ∇_U V for constant-coefficient V is Γ(U, V).
        let mut w = vec![0.0; d];
        for (k, wk) in w.iter_mut().enumerate() {
            for i in 0..d {
                for j in 0..d {
                    *wk += self.gamma0[k * d * d + i * d + j] * u[i] * v[j];
                }
            }
        }
        let corr = values(&self.nabla_endo_along(&w, a));
        sub_vec(&outer, &corr)
    }

    /// g-orthonormal frame: `preferred` first, completed from `candidates`.
    pub fn gram_schmidt(&self, preferred: &[Vec<f64>], candidates: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let d = self.dim;
        let mut frame: Vec<Vec<f64>> = Vec::with_capacity(d);
        let orthogonalize = |frame: &[Vec<f64>], v: &[f64]| -> (Vec<f64>, f64) {
            let mut w = v.to_vec();
            // Two passes keep the result orthogonal to roundoff.
            for _ in 0..2 {
                for e in frame {
                    let c = self.inner(e, &w);
                    for (wi, ei) in w.iter_mut().zip(e) {
                        *wi -= c * ei;
                    }
                }
            }
            let n = self.inner(&w, &w).max(0.0).sqrt();
            (w, n)
        };
        for v in preferred {
            let scale = self.inner(v, v).max(0.0).sqrt();
            let (w, n) = orthogonalize(&frame, v);
            if scale == 0.0 || n <= 1e-10 * scale.max(1.0) {
                return Err(GeomError::DependentPreferredVectors);
            }
            frame.push(w.iter().map(|x| x / n).collect());
        }
        for v in candidates {
            if frame.len() == d {
                break;
            }
            let scale = self.inner(v, v).max(0.0).sqrt();
            if scale == 0.0 {
                continue;
            }
            let (w, n) = orthogonalize(&frame, v);
            if n <= 1e-10 * scale.max(1.0) {
                continue;
            }
            frame.push(w.iter().map(|x| x / n).collect());
        }
        if frame.len() != d {
            return Err(GeomError::IncompleteFrame {
                found: frame.len(),
                dim: d,
            });
        }
        Ok(frame)
    }

    /// Orthonormal frame completed from the coordinate basis in index order.
    pub fn orthonormal_frame(&self, preferred: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let d = self.dim;
        let basis: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|k| if k == i { 1.0 } else { 0.0 }).collect())
            .collect();
        self.gram_schmidt(preferred, &basis)
    }
}

/// Christoffel symbols of an expression metric at `p`.
pub fn christoffel(g: &MetricField, p: &[f64], mode: DiffMode) -> Result<Vec<f64>> {
    Ok(MetricAt::from_field(g, p, mode)?.gamma0)
}

fn field_dims(p: &[f64], fields: &[&VectorField]) -> Result<()> {
    for f in fields {
        if f.dim() != p.len() {
            return Err(GeomError::ChartMismatch {
                expected: p.len(),
                found: f.dim(),
            });
        }
    }
    Ok(())
}

/// `∇_X Y` at `p`.
pub fn covariant_derivative_vector(
    g: &MetricField,
    x: &VectorField,
    y: &VectorField,
    p: &[f64],
    mode: DiffMode,
) -> Result<Vec<f64>> {
    field_dims(p, &[x, y])?;
    let m = MetricAt::from_field(g, p, mode)?;
    let xs = lower_vec(&x.at(p, mode)?);
    Ok(values(&nabla_vec::<Jet2>(&m.gamma, &xs, &y.at(p, mode)?)))
}

/// `∇_X A` at `p`, row-major.
pub fn covariant_derivative_endo(
    g: &MetricField,
    a: &EndomorphismField,
    x: &VectorField,
    p: &[f64],
    mode: DiffMode,
) -> Result<Vec<f64>> {
    field_dims(p, &[x])?;
    let m = MetricAt::from_field(g, p, mode)?;
    let xs = lower_vec(&x.at(p, mode)?);
    Ok(values(&nabla_endo::<Jet2>(&m.gamma, &xs, &a.at(p, mode)?)))
}

/// `R(X, Y)Z` at `p` from Γ and ∂Γ.
pub fn curvature(
    g: &MetricField,
    x: &VectorField,
    y: &VectorField,
    z: &VectorField,
    p: &[f64],
    mode: DiffMode,
) -> Result<Vec<f64>> {
    field_dims(p, &[x, y, z])?;
    let m = MetricAt::from_field(g, p, mode)?;
    let r = m.curvature_tensor();
    let v = |f: &VectorField| -> Result<Vec<f64>> { Ok(values(&f.at(p, mode)?)) };
    Ok(MetricAt::curvature_apply(&r, &v(x)?, &v(y)?, &v(z)?))
}

/// `∇_X∇_Y Z − ∇_Y∇_X Z − ∇_{[X,Y]} Z` evaluated literally.
pub fn curvature_by_definition(
    g: &MetricField,
    x: &VectorField,
    y: &VectorField,
    z: &VectorField,
    p: &[f64],
    mode: DiffMode,
) -> Result<Vec<f64>> {
    field_dims(p, &[x, y, z])?;
    let m = MetricAt::from_field(g, p, mode)?;
    let (xs, ys, zs) = (x.at(p, mode)?, y.at(p, mode)?, z.at(p, mode)?);
    Ok(curvature_of_fields(&m, &xs, &ys, &zs))
}

/// The defining combination for jet-valued fields at the point of `m`.
pub fn curvature_of_fields(m: &MetricAt, x: &[Jet2], y: &[Jet2], z: &[Jet2]) -> Vec<f64> {
    let nyz = nabla_vec::<Jet2>(&m.gamma, &lower_vec(y), z);
    let nxz = nabla_vec::<Jet2>(&m.gamma, &lower_vec(x), z);
    let a = nabla_vec::<Jet1>(&m.gamma0, &values(x), &nyz);
    let b = nabla_vec::<Jet1>(&m.gamma0, &values(y), &nxz);
    let br = lie_bracket(x, y);
    let c = values(&nabla_vec::<Jet2>(&m.gamma, &br, z));
    sub_vec(&sub_vec(&a, &b), &c)
}

/// `(∇²_{U,V} A) = ∇_U(∇_V A) − ∇_{∇_U V} A` for expression fields.
pub fn second_covariant_derivative_endo(
    g: &MetricField,
    a: &EndomorphismField,
    u: &VectorField,
    v: &VectorField,
    p: &[f64],
    mode: DiffMode,
) -> Result<Vec<f64>> {
    field_dims(p, &[u, v])?;
    let m = MetricAt::from_field(g, p, mode)?;
    let (us, vs, aj) = (u.at(p, mode)?, v.at(p, mode)?, a.at(p, mode)?);
    let nva = nabla_endo::<Jet2>(&m.gamma, &lower_vec(&vs), &aj);
    let outer = nabla_endo::<Jet1>(&m.gamma0, &values(&us), &nva);
    let nuv = nabla_vec::<Jet2>(&m.gamma, &lower_vec(&us), &vs);
    let corr = values(&nabla_endo::<Jet2>(&m.gamma, &constant_vec(&values(&nuv), &nuv[0]), &aj));
    Ok(sub_vec(&outer, &corr))
}

/// g-orthonormal frame at `p` with `preferred` vectors first.
pub fn orthonormal_frame(g: &MetricField, p: &[f64], preferred: &[Vec<f64>], mode: DiffMode) -> Result<Vec<Vec<f64>>> {
    MetricAt::from_field(g, p, mode)?.orthonormal_frame(preferred)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Expr};

    fn warped() -> (Vec<String>, MetricField) {
        let c: Vec<String> = ["t", "x", "y"].iter().map(|s| s.to_string()).collect();
        let e = parse("exp(2*t)", &c).unwrap();
        let g = MetricField::symmetric(3, |i, j| match (i, j) {
            (0, 0) => Expr::constant(1.0),
            (1, 1) | (2, 2) => e.clone(),
            _ => Expr::zero(),
        });
        (c, g)
    }

    #[test]
    fn flat_metric_has_no_christoffels() {
        let g = MetricField::euclidean(3);
        assert!(christoffel(&g, &[0.1, 0.2, 0.3], DiffMode::Jet).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn warped_christoffels_at_origin() {
        // Γ^x_{tx} = 1 and Γ^t_{xx} = −e^{2t}, by hand from the Koszul formula.
        let (_, g) = warped();
        let gam = christoffel(&g, &[0.0, 0.3, -0.2], DiffMode::Jet).unwrap();
        let at = |k: usize, i: usize, j: usize| gam[k * 9 + i * 3 + j];
        assert!((at(1, 0, 1) - 1.0).abs() < 1e-15);
        assert!((at(1, 1, 0) - 1.0).abs() < 1e-15);
        assert!((at(0, 1, 1) + 1.0).abs() < 1e-15);
        assert!((at(0, 2, 2) + 1.0).abs() < 1e-15);
        assert!((at(2, 0, 2) - 1.0).abs() < 1e-15);
        assert_eq!(at(0, 0, 0), 0.0);
        let t: f64 = 0.3;
        let gam = christoffel(&g, &[t, 0.0, 0.0], DiffMode::Jet).unwrap();
        assert!((gam[3 + 1] + (2.0 * t).exp()).abs() < 1e-12);
    }

    #[test]
    fn warped_curvature_is_minus_one() {
        let (c, g) = warped();
        let f = |s: &[&str]| VectorField::new(s.iter().map(|e| parse(e, &c).unwrap()).collect());
        let r = curvature(&g, &f(&["1", "0", "0"]), &f(&["0", "1", "0"]), &f(&["0", "1", "0"]), &[0.0, 0.4, 0.1], DiffMode::Jet)
            .unwrap();
        assert!((r[0] + 1.0).abs() < 1e-13 && r[1].abs() < 1e-13 && r[2].abs() < 1e-13);
    }

    #[test]
    fn singular_metric_is_reported() {
        let g = MetricField::symmetric(2, |i, j| Expr::constant(if i == j { 1.0 } else { 2.0 }));
        match MetricAt::from_field(&g, &[0.0, 0.0], DiffMode::Jet) {
            Err(GeomError::SingularMetric { min_eigenvalue, .. }) => assert!((min_eigenvalue + 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn identity_is_parallel() {
        let (c, g) = warped();
        let x = VectorField::new(vec![parse("y", &c).unwrap(), Expr::constant(1.0), parse("t*x", &c).unwrap()]);
        let id = EndomorphismField::identity(3);
        let p = [0.2, -0.3, 0.5];
        assert!(covariant_derivative_endo(&g, &id, &x, &p, DiffMode::Jet).unwrap().iter().all(|v| v.abs() < 1e-15));
        assert!(second_covariant_derivative_endo(&g, &id, &x, &x, &p, DiffMode::Jet)
            .unwrap()
            .iter()
            .all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn euclidean_frames() {
        let m = MetricAt::from_field(&MetricField::euclidean(2), &[0.0, 0.0], DiffMode::Jet).unwrap();
        assert_eq!(m.orthonormal_frame(&[]).unwrap(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(m.orthonormal_frame(&[vec![2.0, 0.0]]).unwrap(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(
            m.orthonormal_frame(&[vec![1.0, 1.0], vec![2.0, 2.0]]),
            Err(GeomError::DependentPreferredVectors)
        );
    }

    #[test]
    fn frame_norms_are_orthonormal_components() {
        let g = MetricField::symmetric(2, |i, j| Expr::constant(match (i, j) {
            (0, 0) => 4.0,
            (0, 1) => 1.0,
            _ => 9.0,
        }));
        let m = MetricAt::from_field(&g, &[0.0, 0.0], DiffMode::Jet).unwrap();
        // ‖v‖_g is bounded by √d times the frame sup-norm.
        let v = [0.3, -0.7];
        let n = m.inner(&v, &v).sqrt();
        let s = m.vector_norm(&v);
        assert!(s <= n + 1e-15 && n <= s * 2f64.sqrt() + 1e-15);
        let id = [1.0, 0.0, 0.0, 1.0];
        assert!((m.endo_norm(&id) - 1.0).abs() < 1e-15);
        assert!((m.bilinear_norm(&[4.0, 1.0, 1.0, 9.0]) - 1.0).abs() < 1e-14);
    }
}
