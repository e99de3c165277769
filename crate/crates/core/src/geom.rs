//! Charts, expression-defined tensor fields, brackets and differential forms.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GeomError, Result};
use crate::expr::{DiffMode, Expr};
use crate::jet::{Differentiable, Jet2, Scalar};

/// A single coordinate chart with a sampling box.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartDomain {
    pub coords: Vec<String>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl ChartDomain {
    /// Chart over `[-1, 1]^dim`.
    pub fn new(coords: Vec<String>) -> Result<Self> {
        if coords.is_empty() {
            return Err(GeomError::InvalidChart("a chart needs at least one coordinate".into()));
        }
        let mut seen = BTreeSet::new();
        for c in &coords {
            if !is_identifier(c) {
                return Err(GeomError::InvalidChart(format!("`{c}` is not an identifier")));
            }
            if ["sin", "cos", "exp", "log", "sqrt", "neg"].contains(&c.as_str()) {
                return Err(GeomError::InvalidChart(format!("`{c}` is a reserved function name")));
            }
            if !seen.insert(c.clone()) {
                return Err(GeomError::DuplicateCoordinate(c.clone()));
            }
        }
        let d = coords.len();
        Ok(Self {
            coords,
            lo: vec![-1.0; d],
            hi: vec![1.0; d],
        })
    }

    pub fn from_names(names: &[&str]) -> Result<Self> {
        Self::new(names.iter().map(|s| s.to_string()).collect())
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Shrink coordinates that occur under `exp` in any of `exprs` to `[-0.5, 0.5]`.
    pub fn shrink_exp_coords<'a, I: IntoIterator<Item = &'a Expr>>(&mut self, exprs: I) {
        let mut under = BTreeSet::new();
        for e in exprs {
            under.extend(e.coords_under_exp());
        }
        for i in under {
            if i < self.dim() {
                self.lo[i] = -0.5;
                self.hi[i] = 0.5;
            }
        }
    }

    pub fn set_box(&mut self, i: usize, lo: f64, hi: f64) -> Result<()> {
        if i >= self.dim() {
            return Err(GeomError::ChartMismatch {
                expected: self.dim(),
                found: i + 1,
            });
        }
        if !(lo <= hi) {
            return Err(GeomError::InvalidChart(format!(
                "box for `{}` has lo {lo} > hi {hi}",
                self.coords[i]
            )));
        }
        self.lo[i] = lo;
        self.hi[i] = hi;
        Ok(())
    }

    /// Concatenation of two charts (factor-1 coordinates first).
    pub fn product(&self, other: &ChartDomain) -> Result<Self> {
        let mut coords = Vec::with_capacity(self.dim() + other.dim());
        for c in &self.coords {
            coords.push(format!("{c}_1"));
        }
        for c in &other.coords {
            coords.push(format!("{c}_2"));
        }
        let mut chart = Self::new(coords)?;
        chart.lo = self.lo.iter().chain(&other.lo).copied().collect();
        chart.hi = self.hi.iter().chain(&other.hi).copied().collect();
        Ok(chart)
    }

    pub fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(GeomError::ChartMismatch {
                expected: self.dim(),
                found: p.len(),
            });
        }
        Ok(())
    }
}

/// `n` points drawn uniformly from the chart box by a seeded generator.
pub fn sample_points(domain: &ChartDomain, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            domain
                .lo
                .iter()
                .zip(&domain.hi)
                .map(|(&lo, &hi)| {
                    let u: f64 = rng.random();
                    lo + (hi - lo) * u
                })
                .collect()
        })
        .collect()
}

fn jets(exprs: &[Expr], p: &[f64], mode: DiffMode) -> Result<Vec<Jet2>> {
    exprs.iter().map(|e| e.jet_with(p, mode)).collect()
}

fn check_exprs(exprs: &[Expr], dim: usize) -> Result<()> {
    for e in exprs {
        if let Some(i) = e.max_coord() {
            if i >= dim {
                return Err(GeomError::ChartMismatch {
                    expected: dim,
                    found: i + 1,
                });
            }
        }
    }
    Ok(())
}

/// Vector field with one expression per coordinate direction.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub comps: Vec<Expr>,
}

impl VectorField {
    pub fn new(comps: Vec<Expr>) -> Self {
        Self { comps }
    }

    /// The coordinate field `∂_i`.
    pub fn coordinate(i: usize, dim: usize) -> Self {
        Self::new((0..dim).map(|k| Expr::constant(if k == i { 1.0 } else { 0.0 })).collect())
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn at(&self, p: &[f64], mode: DiffMode) -> Result<Vec<Jet2>> {
        jets(&self.comps, p, mode)
    }

    pub fn validate(&self, chart: &ChartDomain) -> Result<()> {
        if self.dim() != chart.dim() {
            return Err(GeomError::ChartMismatch {
                expected: chart.dim(),
                found: self.dim(),
            });
        }
        check_exprs(&self.comps, chart.dim())
    }
}

/// One-form with one expression per coordinate differential.
#[derive(Clone, Debug, PartialEq)]
pub struct OneFormField {
    pub comps: Vec<Expr>,
}

impl OneFormField {
    pub fn new(comps: Vec<Expr>) -> Self {
        Self { comps }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn at(&self, p: &[f64], mode: DiffMode) -> Result<Vec<Jet2>> {
        jets(&self.comps, p, mode)
    }

    pub fn as_form(&self, p: &[f64], mode: DiffMode) -> Result<KForm<Jet2>> {
        Ok(KForm::from_one_form(self.at(p, mode)?))
    }

    pub fn validate(&self, chart: &ChartDomain) -> Result<()> {
        if self.dim() != chart.dim() {
            return Err(GeomError::ChartMismatch {
                expected: chart.dim(),
                found: self.dim(),
            });
        }
        check_exprs(&self.comps, chart.dim())
    }
}

/// Endomorphism field, row-major: `entries[k * dim + l]` is `A^k_l`, so
/// column `l` is the image of `∂_l`.
#[derive(Clone, Debug, PartialEq)]
pub struct EndomorphismField {
    pub dim: usize,
    pub entries: Vec<Expr>,
}

impl EndomorphismField {
    pub fn new(dim: usize, entries: Vec<Expr>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(GeomError::ChartMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Ok(Self { dim, entries })
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> Expr) -> Self {
        let mut entries = Vec::with_capacity(dim * dim);
        for k in 0..dim {
            for l in 0..dim {
                entries.push(f(k, l));
            }
        }
        Self { dim, entries }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |k, l| Expr::constant(if k == l { 1.0 } else { 0.0 }))
    }

    pub fn get(&self, k: usize, l: usize) -> &Expr {
        &self.entries[k * self.dim + l]
    }

    /// The field `A(∂_l)`.
    pub fn column(&self, l: usize) -> VectorField {
        VectorField::new((0..self.dim).map(|k| self.get(k, l).clone()).collect())
    }

    pub fn at(&self, p: &[f64], mode: DiffMode) -> Result<Vec<Jet2>> {
        jets(&self.entries, p, mode)
    }

    pub fn validate(&self, chart: &ChartDomain) -> Result<()> {
        if self.dim != chart.dim() {
            return Err(GeomError::ChartMismatch {
                expected: chart.dim(),
                found: self.dim,
            });
        }
        check_exprs(&self.entries, chart.dim())
    }
}

/// Symmetric metric field; only `i <= j` entries are independent.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricField {
    pub dim: usize,
    pub entries: Vec<Expr>,
}

impl MetricField {
    /// Build from the upper triangle; `f(i, j)` is only called for `i <= j`.
    pub fn symmetric(dim: usize, f: impl Fn(usize, usize) -> Expr) -> Self {
        let mut entries = vec![Expr::zero(); dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let e = f(i, j);
                entries[j * dim + i] = e.clone();
                entries[i * dim + j] = e;
            }
        }
        Self { dim, entries }
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::symmetric(dim, |i, j| Expr::constant(if i == j { 1.0 } else { 0.0 }))
    }

    pub fn get(&self, i: usize, j: usize) -> &Expr {
        &self.entries[i * self.dim + j]
    }

    pub fn at(&self, p: &[f64], mode: DiffMode) -> Result<Vec<Jet2>> {
        let d = self.dim;
        let mut out = vec![Jet2::zero(d); d * d];
        for i in 0..d {
            for j in i..d {
                let v = self.entries[i * d + j].jet_with(p, mode)?;
                out[j * d + i] = v.clone();
                out[i * d + j] = v;
            }
        }
        Ok(out)
    }

    pub fn validate(&self, chart: &ChartDomain) -> Result<()> {
        if self.dim != chart.dim() {
            return Err(GeomError::ChartMismatch {
                expected: chart.dim(),
                found: self.dim,
            });
        }
        check_exprs(&self.entries, chart.dim())
    }
}

/// `[X, Y]^k = X^i ∂_i Y^k - Y^i ∂_i X^k`.
pub fn lie_bracket<T: Differentiable>(x: &[T], y: &[T]) -> Vec<T::Deriv> {
    let d = x.len();
    (0..d)
        .map(|k| {
            let mut acc = <T::Deriv as Scalar>::zero(d);
            for i in 0..d {
                acc.fma_assign(&x[i].lower(), &y[k].partial(i));
                let t = y[i].lower().times(&x[k].partial(i));
                acc = acc.minus(&t);
            }
            acc
        })
        .collect()
}

/// Lie bracket of two expression fields at a point.
pub fn lie_bracket_at(x: &VectorField, y: &VectorField, p: &[f64], mode: DiffMode) -> Result<Vec<f64>> {
    if x.dim() != y.dim() || x.dim() != p.len() {
        return Err(GeomError::ChartMismatch {
            expected: p.len(),
            found: if x.dim() != p.len() { x.dim() } else { y.dim() },
        });
    }
    let xs = x.at(p, mode)?;
    let ys = y.at(p, mode)?;
    Ok(lie_bracket(&xs, &ys).into_iter().map(|j| j.value).collect())
}

/// Strictly increasing multi-indices of length `k` from `0..d`, in lexicographic order.
pub fn multi_indices(d: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, d: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            cur.push(i);
            rec(i + 1, d, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= d {
        rec(0, d, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

/// Sign of the permutation sorting `idx`, or `None` if an index repeats.
pub fn sort_sign(idx: &[usize]) -> Option<(Vec<usize>, f64)> {
    let mut v = idx.to_vec();
    let mut sign = 1.0;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some((v, sign))
    }
}

/// A k-form at a point, stored on strictly increasing multi-indices.
#[derive(Clone, Debug, PartialEq)]
pub struct KForm<T> {
    pub dim: usize,
    pub degree: usize,
    pub comps: Vec<T>,
}

pub type KFormValue = KForm<f64>;

impl<T: Scalar> KForm<T> {
    pub fn zero(dim: usize, degree: usize, like: &T) -> Self {
        let n = multi_indices(dim, degree).len();
        Self {
            dim,
            degree,
            comps: vec![like.constant_like(0.0); n],
        }
    }

    pub fn scalar(v: T, dim: usize) -> Self {
        Self {
            dim,
            degree: 0,
            comps: vec![v],
        }
    }

    pub fn from_one_form(comps: Vec<T>) -> Self {
        Self {
            dim: comps.len(),
            degree: 1,
            comps,
        }
    }

    /// 2-form from the entries `m(i, j)` for `i < j`.
    pub fn from_two_form(dim: usize, m: impl Fn(usize, usize) -> T) -> Self {
        let comps = multi_indices(dim, 2).iter().map(|ij| m(ij[0], ij[1])).collect();
        Self { dim, degree: 2, comps }
    }

    pub fn indices(&self) -> Vec<Vec<usize>> {
        multi_indices(self.dim, self.degree)
    }

    /// Position of a strictly increasing multi-index in the storage.
    pub fn position(dim: usize, idx: &[usize]) -> usize {
        // Rank in lexicographic order of k-subsets.
        let k = idx.len();
        let mut rank = 0;
        let mut prev = 0;
        for (m, &i) in idx.iter().enumerate() {
            for j in prev..i {
                rank += binomial(dim - j - 1, k - m - 1);
            }
            prev = i + 1;
        }
        rank
    }

    /// Component on an arbitrary index tuple (antisymmetric extension).
    pub fn component(&self, idx: &[usize]) -> T {
        match sort_sign(idx) {
            Some((sorted, s)) => self.comps[Self::position(self.dim, &sorted)].scaled(s),
            None => self.comps[0].constant_like(0.0),
        }
    }

    pub fn plus(&self, o: &Self) -> Self {
        Self {
            dim: self.dim,
            degree: self.degree,
            comps: self.comps.iter().zip(&o.comps).map(|(a, b)| a.plus(b)).collect(),
        }
    }

    pub fn minus(&self, o: &Self) -> Self {
        Self {
            dim: self.dim,
            degree: self.degree,
            comps: self.comps.iter().zip(&o.comps).map(|(a, b)| a.minus(b)).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            degree: self.degree,
            comps: self.comps.iter().map(|a| a.scaled(s)).collect(),
        }
    }

    /// Multiply every component by a scalar of the same order.
    pub fn times_scalar(&self, f: &T) -> Self {
        Self {
            dim: self.dim,
            degree: self.degree,
            comps: self.comps.iter().map(|a| a.times(f)).collect(),
        }
    }

    pub fn values(&self) -> KFormValue {
        KForm {
            dim: self.dim,
            degree: self.degree,
            comps: self.comps.iter().map(|c| c.value()).collect(),
        }
    }
}

impl<T: Differentiable> KForm<T> {
    pub fn lower(&self) -> KForm<T::Deriv> {
        KForm {
            dim: self.dim,
            degree: self.degree,
            comps: self.comps.iter().map(|c| c.lower()).collect(),
        }
    }
}

impl KFormValue {
    pub fn sup_norm(&self) -> f64 {
        self.comps.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Alternating wedge product with shuffle signs (no factorial normalization).
pub fn wedge<T: Scalar>(a: &KForm<T>, b: &KForm<T>) -> Result<KForm<T>> {
    let d = a.dim;
    let k = a.degree + b.degree;
    if k > d || b.dim != d {
        return Err(GeomError::DegreeOverflow { degree: k, dim: d });
    }
    let like = a.comps.first().or(b.comps.first()).expect("forms have components");
    let mut out = KForm::zero(d, k, like);
    let ia = a.indices();
    let ib = b.indices();
    for (x, ca) in ia.iter().zip(&a.comps) {
        for (y, cb) in ib.iter().zip(&b.comps) {
            let joined: Vec<usize> = x.iter().chain(y).copied().collect();
            if let Some((sorted, s)) = sort_sign(&joined) {
                let pos = KForm::<T>::position(d, &sorted);
                let prod = ca.times(cb);
                out.comps[pos].axpy_assign(s, &prod);
            }
        }
    }
    Ok(out)
}

/// `ω ∧ … ∧ ω` (`n` factors); `n = 0` gives the constant 1.
pub fn wedge_power<T: Scalar>(w: &KForm<T>, n: usize) -> Result<KForm<T>> {
    let mut acc = KForm::scalar(w.comps[0].constant_like(1.0), w.dim);
    for _ in 0..n {
        acc = wedge(&acc, w)?;
    }
    Ok(acc)
}

/// `(dω)_{i_0…i_k} = Σ_m (-1)^m ∂_{i_m} ω_{i_0…î_m…i_k}`.
pub fn exterior_derivative<T: Differentiable>(w: &KForm<T>) -> Result<KForm<T::Deriv>> {
    let d = w.dim;
    let k = w.degree + 1;
    if k > d {
        return Err(GeomError::DegreeOverflow { degree: k, dim: d });
    }
    let like = w.comps[0].partial(0);
    let mut out = KForm::zero(d, k, &like);
    for (pos, idx) in multi_indices(d, k).iter().enumerate() {
        let mut acc = like.constant_like(0.0);
        for m in 0..k {
            let rest: Vec<usize> = idx.iter().enumerate().filter(|&(j, _)| j != m).map(|(_, &i)| i).collect();
            let c = &w.comps[KForm::<T>::position(d, &rest)];
            let s = if m % 2 == 0 { 1.0 } else { -1.0 };
            acc.axpy_assign(s, &c.partial(idx[m]));
        }
        out.comps[pos] = acc;
    }
    Ok(out)
}

fn det<T: Scalar>(m: &[T], n: usize) -> T {
    match n {
        0 => unreachable!("determinant of an empty matrix"),
        1 => m[0].clone(),
        2 => m[0].times(&m[3]).minus(&m[1].times(&m[2])),
        _ => {
            let mut acc = m[0].constant_like(0.0);
            let mut minor = Vec::with_capacity((n - 1) * (n - 1));
            for c in 0..n {
                minor.clear();
                for r in 1..n {
                    for cc in 0..n {
                        if cc != c {
                            minor.push(m[r * n + cc].clone());
                        }
                    }
                }
                let s = if c % 2 == 0 { 1.0 } else { -1.0 };
                let t = m[c].times(&det(&minor, n - 1));
                acc.axpy_assign(s, &t);
            }
            acc
        }
    }
}

/// `(A*ω)(X_1, …, X_k) = ω(A X_1, …, A X_k)` for a row-major endomorphism `A`.
pub fn endo_pullback<T: Scalar>(a: &[T], w: &KForm<T>) -> KForm<T> {
    let d = w.dim;
    let k = w.degree;
    if k == 0 {
        return w.clone();
    }
    let idx = multi_indices(d, k);
    let mut out = KForm::zero(d, k, &w.comps[0]);
    let mut minor = Vec::with_capacity(k * k);
    for (pos, cols) in idx.iter().enumerate() {
        let mut acc = w.comps[0].constant_like(0.0);
        for (rows, c) in idx.iter().zip(&w.comps) {
            minor.clear();
            for &r in rows {
                for &col in cols {
                    minor.push(a[r * d + col].clone());
                }
            }
            acc.fma_assign(c, &det(&minor, k));
        }
        out.comps[pos] = acc;
    }
    out
}
