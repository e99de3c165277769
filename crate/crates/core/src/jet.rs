//! Truncated Taylor arithmetic.
//!
//! [`Jet2`] carries the value, gradient and Hessian of a scalar at a point,
//! [`Jet1`] carries value and gradient. Geometry code is written once over the
//! [`Scalar`] trait and instantiated at three levels: expression fields are
//! evaluated as `Jet2`, one derivative (a connection, a bracket) turns them into
//! `Jet1`, and a second derivative lands in plain `f64`. This is what lets the
//! curvature and the second covariant derivative be computed from exact input
//! derivatives without any finite differencing.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Ring operations shared by `f64`, [`Jet1`] and [`Jet2`].
pub trait Scalar: Clone + fmt::Debug + Send + Sync {
    /// Zero of the given chart dimension.
    fn zero(dim: usize) -> Self;
    /// A constant with the same dimension as `self`.
    fn constant_like(&self, v: f64) -> Self;
    fn value(&self) -> f64;
    fn plus(&self, o: &Self) -> Self;
    fn minus(&self, o: &Self) -> Self;
    fn times(&self, o: &Self) -> Self;
    fn scaled(&self, s: f64) -> Self;
    /// `self += a * b`
    fn fma_assign(&mut self, a: &Self, b: &Self);
    /// `self += s * a`
    fn axpy_assign(&mut self, s: f64, a: &Self);

    fn negated(&self) -> Self {
        self.scaled(-1.0)
    }
}

/// A scalar that can be differentiated once, losing one order of the jet.
pub trait Differentiable: Scalar {
    type Deriv: Scalar;
    /// Partial derivative along coordinate `i`.
    fn partial(&self, i: usize) -> Self::Deriv;
    /// Drop the highest order.
    fn lower(&self) -> Self::Deriv;
}

impl Scalar for f64 {
    fn zero(_dim: usize) -> Self {
        0.0
    }
    fn constant_like(&self, v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn minus(&self, o: &Self) -> Self {
        self - o
    }
    fn times(&self, o: &Self) -> Self {
        self * o
    }
    fn scaled(&self, s: f64) -> Self {
        self * s
    }
    fn fma_assign(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
    fn axpy_assign(&mut self, s: f64, a: &Self) {
        *self += s * a;
    }
}

/// Value and gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet1 {
    pub value: f64,
    pub grad: Vec<f64>,
}

impl Jet1 {
    pub fn constant(v: f64, dim: usize) -> Self {
        Self { value: v, grad: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn recip(&self) -> Self {
        let r = 1.0 / self.value;
        let d = -r * r;
        Self {
            value: r,
            grad: self.grad.iter().map(|g| d * g).collect(),
        }
    }
}

impl Scalar for Jet1 {
    fn zero(dim: usize) -> Self {
        Self::constant(0.0, dim)
    }
    fn constant_like(&self, v: f64) -> Self {
        Self::constant(v, self.dim())
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn plus(&self, o: &Self) -> Self {
        Self {
            value: self.value + o.value,
            grad: self.grad.iter().zip(&o.grad).map(|(a, b)| a + b).collect(),
        }
    }
    fn minus(&self, o: &Self) -> Self {
        Self {
            value: self.value - o.value,
            grad: self.grad.iter().zip(&o.grad).map(|(a, b)| a - b).collect(),
        }
    }
    fn times(&self, o: &Self) -> Self {
        Self {
            value: self.value * o.value,
            grad: self
                .grad
                .iter()
                .zip(&o.grad)
                .map(|(a, b)| self.value * b + o.value * a)
                .collect(),
        }
    }
    fn scaled(&self, s: f64) -> Self {
        Self {
            value: self.value * s,
            grad: self.grad.iter().map(|g| g * s).collect(),
        }
    }
    fn fma_assign(&mut self, a: &Self, b: &Self) {
        self.value += a.value * b.value;
        for ((g, ga), gb) in self.grad.iter_mut().zip(&a.grad).zip(&b.grad) {
            *g += a.value * gb + b.value * ga;
        }
    }
    fn axpy_assign(&mut self, s: f64, a: &Self) {
        self.value += s * a.value;
        for (g, ga) in self.grad.iter_mut().zip(&a.grad) {
            *g += s * ga;
        }
    }
}

impl Differentiable for Jet1 {
    type Deriv = f64;
    fn partial(&self, i: usize) -> f64 {
        self.grad[i]
    }
    fn lower(&self) -> f64 {
        self.value
    }
}

/// Value, gradient and symmetric Hessian (row-major, `dim * dim`).
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

impl Jet2 {
    pub fn constant(v: f64, dim: usize) -> Self {
        Self {
            value: v,
            grad: vec![0.0; dim],
            hess: vec![0.0; dim * dim],
        }
    }

    /// The coordinate function `x_i`.
    pub fn variable(v: f64, i: usize, dim: usize) -> Self {
        let mut j = Self::constant(v, dim);
        j.grad[i] = 1.0;
        j
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn hess_at(&self, i: usize, j: usize) -> f64 {
        self.hess[i * self.dim() + j]
    }

    /// Compose with a scalar function given its value and first two derivatives
    /// at `self.value`.
    pub fn chain(&self, f: f64, df: f64, d2f: f64) -> Self {
        let d = self.dim();
        let mut hess = vec![0.0; d * d];
        for i in 0..d {
            for j in i..d {
                let h = df * self.hess[i * d + j] + d2f * self.grad[i] * self.grad[j];
                hess[i * d + j] = h;
                hess[j * d + i] = h;
            }
        }
        Self {
            value: f,
            grad: self.grad.iter().map(|g| df * g).collect(),
            hess,
        }
    }

    pub fn recip(&self) -> Self {
        let r = 1.0 / self.value;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    /// Natural logarithm; the caller guarantees a positive argument.
    pub fn ln(&self) -> Self {
        let x = self.value;
        self.chain(x.ln(), 1.0 / x, -1.0 / (x * x))
    }

    /// Square root; the caller guarantees a positive argument.
    pub fn sqrt(&self) -> Self {
        let s = self.value.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.value))
    }

    /// Integer power by the chain rule.
    pub fn powi(&self, n: i32) -> Self {
        let x = self.value;
        let nf = f64::from(n);
        self.chain(
            x.powi(n),
            nf * x.powi(n - 1),
            nf * (nf - 1.0) * x.powi(n - 2),
        )
    }
}

impl Scalar for Jet2 {
    fn zero(dim: usize) -> Self {
        Self::constant(0.0, dim)
    }
    fn constant_like(&self, v: f64) -> Self {
        Self::constant(v, self.dim())
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn plus(&self, o: &Self) -> Self {
        Self {
            value: self.value + o.value,
            grad: self.grad.iter().zip(&o.grad).map(|(a, b)| a + b).collect(),
            hess: self.hess.iter().zip(&o.hess).map(|(a, b)| a + b).collect(),
        }
    }
    fn minus(&self, o: &Self) -> Self {
        Self {
            value: self.value - o.value,
            grad: self.grad.iter().zip(&o.grad).map(|(a, b)| a - b).collect(),
            hess: self.hess.iter().zip(&o.hess).map(|(a, b)| a - b).collect(),
        }
    }
    fn times(&self, o: &Self) -> Self {
        let mut out = Self::constant(0.0, self.dim());
        out.fma_assign(self, o);
        out
    }
    fn scaled(&self, s: f64) -> Self {
        Self {
            value: self.value * s,
            grad: self.grad.iter().map(|g| g * s).collect(),
            hess: self.hess.iter().map(|h| h * s).collect(),
        }
    }
    fn fma_assign(&mut self, a: &Self, b: &Self) {
        let d = self.dim();
        self.value += a.value * b.value;
        for i in 0..d {
            self.grad[i] += a.value * b.grad[i] + b.value * a.grad[i];
        }
        for i in 0..d {
            for j in i..d {
                let h = a.value * b.hess[i * d + j]
                    + b.value * a.hess[i * d + j]
                    + a.grad[i] * b.grad[j]
                    + a.grad[j] * b.grad[i];
                self.hess[i * d + j] += h;
                if i != j {
                    self.hess[j * d + i] += h;
                }
            }
        }
    }
    fn axpy_assign(&mut self, s: f64, a: &Self) {
        self.value += s * a.value;
        for (g, ga) in self.grad.iter_mut().zip(&a.grad) {
            *g += s * ga;
        }
        for (h, ha) in self.hess.iter_mut().zip(&a.hess) {
            *h += s * ha;
        }
    }
}

impl Differentiable for Jet2 {
    type Deriv = Jet1;
    fn partial(&self, i: usize) -> Jet1 {
        let d = self.dim();
        Jet1 {
            value: self.grad[i],
            grad: self.hess[i * d..(i + 1) * d].to_vec(),
        }
    }
    fn lower(&self) -> Jet1 {
        Jet1 {
            value: self.value,
            grad: self.grad.clone(),
        }
    }
}

macro_rules! binary_ops {
    ($t:ty) => {
        impl Add for $t {
            type Output = $t;
            fn add(self, o: $t) -> $t {
                self.plus(&o)
            }
        }
        impl Sub for $t {
            type Output = $t;
            fn sub(self, o: $t) -> $t {
                self.minus(&o)
            }
        }
        impl Mul for $t {
            type Output = $t;
            fn mul(self, o: $t) -> $t {
                self.times(&o)
            }
        }
        impl Mul<f64> for $t {
            type Output = $t;
            fn mul(self, s: f64) -> $t {
                self.scaled(s)
            }
        }
        impl Neg for $t {
            type Output = $t;
            fn neg(self) -> $t {
                self.negated()
            }
        }
    };
}

binary_ops!(Jet1);
binary_ops!(Jet2);
