//! Scalar expressions over chart coordinates.
//!
//! Grammar (whitespace insensitive):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | base ('^' ('-')? base)?
//! base   := number | ident | '(' expr ')' | func '(' expr ')'
//! func   := sin | cos | exp | log | sqrt | neg
//! ```
//!
//! Exponents must be constant. A leading minus on a literal folds into the
//! constant, so `render` followed by `parse` reproduces the tree exactly.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{GeomError, Result};
use crate::jet::{Jet2, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl UnaryOp {
    fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "neg",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "neg" => UnaryOp::Neg,
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }
}

/// Immutable expression tree.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Index into the chart coordinates.
    Coord(usize),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    /// Power with a constant exponent.
    Pow(Box<Expr>, f64),
}

/// How expression derivatives are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum DiffMode {
    /// Exact second-order jets.
    #[default]
    Jet,
    /// Richardson-extrapolated central differences with the given base step.
    FiniteDiff { step: f64 },
}

pub const DEFAULT_FD_STEP: f64 = 1e-3;

impl Expr {
    pub fn constant(v: f64) -> Self {
        Expr::Const(v)
    }

    pub fn coord(i: usize) -> Self {
        Expr::Coord(i)
    }

    pub fn zero() -> Self {
        Expr::Const(0.0)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    // Builders used when assembling composite fields. They fold literal zeros
    // and ones so products of block matrices stay small.

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x + y),
            (Some(x), _) if x == 0.0 => b,
            (_, Some(y)) if y == 0.0 => a,
            _ => Expr::Binary(BinaryOp::Add, Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x - y),
            (_, Some(y)) if y == 0.0 => a,
            (Some(x), _) if x == 0.0 => Expr::neg(b),
            _ => Expr::Binary(BinaryOp::Sub, Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x * y),
            (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::Const(0.0),
            (Some(x), _) if x == 1.0 => b,
            (_, Some(y)) if y == 1.0 => a,
            _ => Expr::Binary(BinaryOp::Mul, Box::new(a), Box::new(b)),
        }
    }

    pub fn scale(s: f64, a: Expr) -> Expr {
        Expr::mul(Expr::Const(s), a)
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::Binary(BinaryOp::Div, Box::new(a), Box::new(b))
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(c) => Expr::Const(-c),
            other => Expr::Unary(UnaryOp::Neg, Box::new(other)),
        }
    }

    pub fn unary(op: UnaryOp, a: Expr) -> Expr {
        Expr::Unary(op, Box::new(a))
    }

    pub fn pow(a: Expr, e: f64) -> Expr {
        Expr::Pow(Box::new(a), e)
    }

    /// Sum of a list, folding zeros.
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        terms.into_iter().fold(Expr::zero(), Expr::add)
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_coord(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Coord(i) => Some(*i),
            Expr::Unary(_, a) | Expr::Pow(a, _) => a.max_coord(),
            Expr::Binary(_, a, b) => match (a.max_coord(), b.max_coord()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    /// Re-index coordinates by adding `offset` (lifting into a product chart).
    pub fn shift_coords(&self, offset: usize) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Coord(i) => Expr::Coord(i + offset),
            Expr::Unary(op, a) => Expr::Unary(*op, Box::new(a.shift_coords(offset))),
            Expr::Binary(op, a, b) => Expr::Binary(
                *op,
                Box::new(a.shift_coords(offset)),
                Box::new(b.shift_coords(offset)),
            ),
            Expr::Pow(a, e) => Expr::Pow(Box::new(a.shift_coords(offset)), *e),
        }
    }

    /// Coordinates that appear anywhere inside an `exp(...)`.
    pub fn coords_under_exp(&self) -> BTreeSet<usize> {
        fn walk(e: &Expr, inside: bool, out: &mut BTreeSet<usize>) {
            match e {
                Expr::Const(_) => {}
                Expr::Coord(i) => {
                    if inside {
                        out.insert(*i);
                    }
                }
                Expr::Unary(op, a) => walk(a, inside || *op == UnaryOp::Exp, out),
                Expr::Pow(a, _) => walk(a, inside, out),
                Expr::Binary(_, a, b) => {
                    walk(a, inside, out);
                    walk(b, inside, out);
                }
            }
        }
        let mut out = BTreeSet::new();
        walk(self, false, &mut out);
        out
    }

    /// Fully parenthesized text that parses back to the same tree.
    pub fn render(&self, coords: &[String]) -> String {
        let mut s = String::new();
        self.render_into(coords, &mut s);
        s
    }

    fn render_into(&self, coords: &[String], s: &mut String) {
        match self {
            Expr::Const(c) => {
                if *c < 0.0 {
                    let _ = write!(s, "(-{:?})", -c);
                } else {
                    let _ = write!(s, "{c:?}");
                }
            }
            Expr::Coord(i) => match coords.get(*i) {
                Some(name) => s.push_str(name),
                None => {
                    let _ = write!(s, "x{i}");
                }
            },
            Expr::Unary(op, a) => {
                s.push_str(op.name());
                s.push('(');
                a.render_into(coords, s);
                s.push(')');
            }
            Expr::Binary(op, a, b) => {
                s.push('(');
                a.render_into(coords, s);
                s.push(' ');
                s.push(op.symbol());
                s.push(' ');
                b.render_into(coords, s);
                s.push(')');
            }
            Expr::Pow(a, e) => {
                s.push('(');
                a.render_into(coords, s);
                s.push_str(")^");
                if *e < 0.0 {
                    let _ = write!(s, "(-{:?})", -e);
                } else {
                    let _ = write!(s, "{e:?}");
                }
            }
        }
    }

    /// Plain evaluation.
    pub fn eval(&self, p: &[f64]) -> Result<f64> {
        let domain = |what: &str| GeomError::Domain {
            what: what.to_string(),
            point: p.to_vec(),
        };
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Coord(i) => *p.get(*i).ok_or(GeomError::ChartMismatch {
                expected: i + 1,
                found: p.len(),
            })?,
            Expr::Unary(op, a) => {
                let x = a.eval(p)?;
                match op {
                    UnaryOp::Neg => -x,
                    UnaryOp::Sin => x.sin(),
                    UnaryOp::Cos => x.cos(),
                    UnaryOp::Exp => x.exp(),
                    UnaryOp::Log => {
                        if x <= 0.0 {
                            return Err(domain("log of non-positive argument"));
                        }
                        x.ln()
                    }
                    UnaryOp::Sqrt => {
                        if x < 0.0 {
                            return Err(domain("sqrt of negative argument"));
                        }
                        x.sqrt()
                    }
                }
            }
            Expr::Binary(op, a, b) => {
                let x = a.eval(p)?;
                let y = b.eval(p)?;
                match op {
                    BinaryOp::Add => x + y,
                    BinaryOp::Sub => x - y,
                    BinaryOp::Mul => x * y,
                    BinaryOp::Div => {
                        if y == 0.0 {
                            return Err(domain("division by zero"));
                        }
                        x / y
                    }
                }
            }
            Expr::Pow(a, e) => {
                let x = a.eval(p)?;
                match small_integer(*e) {
                    Some(n) if n >= 0 => x.powi(n),
                    Some(n) => {
                        if x == 0.0 {
                            return Err(domain("division by zero"));
                        }
                        x.powi(n)
                    }
                    None if e.fract() == 0.0 && e.abs() < f64::from(i32::MAX) => x.powi(*e as i32),
                    None => {
                        if x <= 0.0 {
                            return Err(domain("non-integer power of non-positive base"));
                        }
                        (e * x.ln()).exp()
                    }
                }
            }
        };
        if !v.is_finite() {
            return Err(domain("non-finite value"));
        }
        Ok(v)
    }

    /// Exact second-order jet at `p`.
    pub fn jet(&self, p: &[f64]) -> Result<Jet2> {
        let d = p.len();
        let domain = |what: &str| GeomError::Domain {
            what: what.to_string(),
            point: p.to_vec(),
        };
        let j = match self {
            Expr::Const(c) => Jet2::constant(*c, d),
            Expr::Coord(i) => {
                if *i >= d {
                    return Err(GeomError::ChartMismatch {
                        expected: i + 1,
                        found: d,
                    });
                }
                Jet2::variable(p[*i], *i, d)
            }
            Expr::Unary(op, a) => {
                let x = a.jet(p)?;
                match op {
                    UnaryOp::Neg => x.negated(),
                    UnaryOp::Sin => x.sin(),
                    UnaryOp::Cos => x.cos(),
                    UnaryOp::Exp => x.exp(),
                    UnaryOp::Log => {
                        if x.value <= 0.0 {
                            return Err(domain("log of non-positive argument"));
                        }
                        x.ln()
                    }
                    UnaryOp::Sqrt => {
                        if x.value <= 0.0 {
                            return Err(domain("sqrt of non-positive argument"));
                        }
                        x.sqrt()
                    }
                }
            }
            Expr::Binary(op, a, b) => {
                let x = a.jet(p)?;
                let y = b.jet(p)?;
                match op {
                    BinaryOp::Add => x.plus(&y),
                    BinaryOp::Sub => x.minus(&y),
                    BinaryOp::Mul => x.times(&y),
                    BinaryOp::Div => {
                        if y.value == 0.0 {
                            return Err(domain("division by zero"));
                        }
                        x.times(&y.recip())
                    }
                }
            }
            Expr::Pow(a, e) => {
                let x = a.jet(p)?;
                match small_integer(*e) {
                    Some(n) => {
                        let mut acc = Jet2::constant(1.0, d);
                        for _ in 0..n.unsigned_abs() {
                            acc = acc.times(&x);
                        }
                        if n < 0 {
                            if acc.value == 0.0 {
                                return Err(domain("division by zero"));
                            }
                            acc = acc.recip();
                        }
                        acc
                    }
                    None if e.fract() == 0.0 && e.abs() < f64::from(i32::MAX) => {
                        if x.value == 0.0 && *e < 2.0 {
                            return Err(domain("division by zero"));
                        }
                        x.powi(*e as i32)
                    }
                    None => {
                        if x.value <= 0.0 {
                            return Err(domain("non-integer power of non-positive base"));
                        }
                        x.ln().scaled(*e).exp()
                    }
                }
            }
        };
        if !j.value.is_finite() || j.grad.iter().chain(&j.hess).any(|v| !v.is_finite()) {
            return Err(domain("non-finite value"));
        }
        Ok(j)
    }

    /// Jet built from Richardson-extrapolated central differences of [`Expr::eval`].
    pub fn jet_fd(&self, p: &[f64], step: f64) -> Result<Jet2> {
        let d = p.len();
        let f0 = self.eval(p)?;
        let mut q = p.to_vec();
        let mut f = |shifts: &[(usize, f64)]| -> Result<f64> {
            for &(i, s) in shifts {
                q[i] = p[i] + s;
            }
            let v = self.eval(&q);
            for &(i, _) in shifts {
                q[i] = p[i];
            }
            v
        };
        let mut jet = Jet2::constant(f0, d);
        for i in 0..d {
            let mut first = [0.0; 2];
            let mut second = [0.0; 2];
            for (k, h) in [step, 0.5 * step].into_iter().enumerate() {
                let fp = f(&[(i, h)])?;
                let fm = f(&[(i, -h)])?;
                first[k] = (fp - fm) / (2.0 * h);
                second[k] = (fp - 2.0 * f0 + fm) / (h * h);
            }
            jet.grad[i] = (4.0 * first[1] - first[0]) / 3.0;
            jet.hess[i * d + i] = (4.0 * second[1] - second[0]) / 3.0;
            for j in 0..i {
                let mut mixed = [0.0; 2];
                for (k, h) in [step, 0.5 * step].into_iter().enumerate() {
                    let fpp = f(&[(i, h), (j, h)])?;
                    let fpm = f(&[(i, h), (j, -h)])?;
                    let fmp = f(&[(i, -h), (j, h)])?;
                    let fmm = f(&[(i, -h), (j, -h)])?;
                    mixed[k] = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
                }
                let h = (4.0 * mixed[1] - mixed[0]) / 3.0;
                jet.hess[i * d + j] = h;
                jet.hess[j * d + i] = h;
            }
        }
        Ok(jet)
    }

    /// Jet according to the selected differentiation mode.
    pub fn jet_with(&self, p: &[f64], mode: DiffMode) -> Result<Jet2> {
        match mode {
            DiffMode::Jet => self.jet(p),
            DiffMode::FiniteDiff { step } => self.jet_fd(p, step),
        }
    }
}

fn small_integer(e: f64) -> Option<i32> {
    if e.fract() == 0.0 && e.abs() <= 8.0 {
        Some(e as i32)
    } else {
        None
    }
}

const FUNCTIONS: [&str; 6] = ["sin", "cos", "exp", "log", "sqrt", "neg"];

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    coords: &'a [String],
}

fn base_expected() -> Vec<String> {
    ["number", "identifier", "(", "-"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut k = i + 1;
                if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < bytes.len() && bytes[k].is_ascii_digit() {
                    i = k;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let lit = &text[start..i];
            let v: f64 = lit.parse().map_err(|_| GeomError::Syntax {
                offset: start,
                expected: vec!["number".into()],
            })?;
            toks.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            toks.push((Tok::Ident(text[start..i].to_string()), start));
        } else if "+-*/^()".contains(c) {
            toks.push((Tok::Sym(c), i));
            i += 1;
        } else {
            return Err(GeomError::Syntax {
                offset: i,
                expected: vec![
                    "number".into(),
                    "identifier".into(),
                    "operator".into(),
                    "(".into(),
                    ")".into(),
                ],
            });
        }
    }
    toks.push((Tok::End, text.len()));
    Ok(toks)
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek() == &Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            Err(GeomError::Syntax {
                offset: self.offset(),
                expected: vec![c.to_string()],
            })
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => BinaryOp::Add,
                Tok::Sym('-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => BinaryOp::Mul,
                Tok::Sym('/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.peek() == &Tok::Sym('-') {
            self.bump();
            let inner = self.factor()?;
            return Ok(match inner {
                Expr::Const(c) => Expr::Const(-c),
                other => Expr::Unary(UnaryOp::Neg, Box::new(other)),
            });
        }
        let base = self.base()?;
        if self.peek() != &Tok::Sym('^') {
            return Ok(base);
        }
        self.bump();
        let at = self.offset();
        let negative = if self.peek() == &Tok::Sym('-') {
            self.bump();
            true
        } else {
            false
        };
        let exponent = self.base()?;
        let e = constant_value(&exponent).ok_or_else(|| GeomError::Syntax {
            offset: at,
            expected: vec!["constant exponent".into()],
        })?;
        Ok(Expr::Pow(Box::new(base), if negative { -e } else { e }))
    }

    fn base(&mut self) -> Result<Expr> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if FUNCTIONS.contains(&name.as_str()) {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    let op = UnaryOp::from_name(&name).expect("listed function");
                    Ok(Expr::Unary(op, Box::new(arg)))
                } else if let Some(i) = self.coords.iter().position(|c| *c == name) {
                    Ok(Expr::Coord(i))
                } else {
                    Err(GeomError::UnknownIdentifier(name))
                }
            }
            _ => {
                self.pos = self.pos.saturating_sub(0);
                Err(GeomError::Syntax {
                    offset: at,
                    expected: base_expected(),
                })
            }
        }
    }
}

/// Evaluate a coordinate-free tree.
fn constant_value(e: &Expr) -> Option<f64> {
    if e.max_coord().is_some() {
        return None;
    }
    e.eval(&[]).ok()
}

/// Parse `text` over the named chart coordinates.
pub fn parse(text: &str, coords: &[String]) -> Result<Expr> {
    let mut seen = BTreeSet::new();
    for c in coords {
        if !seen.insert(c.as_str()) {
            return Err(GeomError::DuplicateCoordinate(c.clone()));
        }
    }
    if text.trim().is_empty() {
        return Err(GeomError::Syntax {
            offset: 0,
            expected: base_expected(),
        });
    }
    let toks = tokenize(text)?;
    let mut p = Parser { toks, pos: 0, coords };
    let e = p.expr()?;
    if p.peek() != &Tok::End {
        return Err(GeomError::Syntax {
            offset: p.offset(),
            expected: ["+", "-", "*", "/", "^", "end of input"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        });
    }
    Ok(e)
}
