//! Manifest schema, defaults and validation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tsgeom::contact::{builtin_factor, model, TransSasakianFactor, BUILTIN_NAMES};
use tsgeom::expr::{DiffMode, DEFAULT_FD_STEP};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_COUNT: usize = 64;
pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_GRID: [(f64, f64); 4] = [(0.0, 1.0), (1.0, 1.0), (-2.0, 3.0), (0.5, -1.0)];

pub const CHECKS: [&str; 13] = [
    "axioms",
    "trans_sasakian",
    "transverse",
    "structure",
    "connection",
    "nabla_j",
    "curvature",
    "integrability",
    "codifferential",
    "harmonicity",
    "astheno",
    "energy",
    "table1",
];

/// Checks that act on the product and need two factors.
pub const PRODUCT_CHECKS: [&str; 9] = [
    "structure",
    "connection",
    "nabla_j",
    "curvature",
    "integrability",
    "codifferential",
    "harmonicity",
    "astheno",
    "energy",
];

/// A configuration problem; reported with exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "at `{}`: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum FactorSpec {
    Builtin {
        builtin: String,
    },
    Custom {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
        coords: Vec<String>,
        g: Vec<String>,
        phi: Vec<String>,
        xi: Vec<String>,
        eta: Vec<String>,
        alpha: f64,
        beta: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductSpec {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Control {
    /// The deliberately non-integrable `J` (b doubled in the `Jξ₂` terms).
    BrokenJ,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    pub count: Option<usize>,
    pub seed: Option<u64>,
    /// Per-coordinate sampling boxes, keyed by product coordinate name
    /// (`x_1`, `t_2`, …).
    #[serde(rename = "box")]
    pub boxes: Option<BTreeMap<String, [f64; 2]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Jet,
    Fd,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSpec {
    pub mode: Option<ModeName>,
    pub fd_step: Option<f64>,
    pub tol: Option<f64>,
}

/// The manifest as written.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawManifest {
    #[serde(default)]
    pub factors: Vec<FactorSpec>,
    pub product: Option<ProductSpec>,
    pub grid: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub checks: Vec<String>,
    pub sampling: Option<SamplingSpec>,
    pub numerics: Option<NumericsSpec>,
    pub control: Option<Control>,
}

/// A manifest with every default resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub factors: Vec<FactorSpec>,
    pub grid: Vec<(f64, f64)>,
    pub checks: Vec<String>,
    pub count: usize,
    pub seed: u64,
    pub boxes: BTreeMap<String, [f64; 2]>,
    pub mode: ModeName,
    pub fd_step: f64,
    pub tol: f64,
    pub control: Option<Control>,
}

/// Command-line overrides applied after loading.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub mode: Option<ModeName>,
    pub fd_step: Option<f64>,
    pub grid: Vec<(f64, f64)>,
}

impl Manifest {
    /// The resolved manifest in the input schema's shape.
    pub fn echo(&self) -> serde_json::Value {
        let mut v = serde_json::json!({
            "factors": self.factors,
            "grid": self.grid.iter().map(|&(a, b)| [a, b]).collect::<Vec<_>>(),
            "checks": self.checks,
            "sampling": { "count": self.count, "seed": self.seed, "box": self.boxes },
            "numerics": { "mode": self.mode, "fd_step": self.fd_step, "tol": self.tol },
        });
        if let Some(c) = self.control {
            v["control"] = serde_json::json!(c);
        }
        v
    }

    pub fn diff_mode(&self) -> DiffMode {
        match self.mode {
            ModeName::Jet => DiffMode::Jet,
            ModeName::Fd => DiffMode::FiniteDiff { step: self.fd_step },
        }
    }

    /// The manifest used by the `table1` subcommand.
    pub fn table1() -> Self {
        resolve(RawManifest {
            checks: vec!["table1".into()],
            ..RawManifest::default()
        })
        .expect("the built-in table manifest is valid")
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        if let Some(t) = o.tol {
            self.tol = t;
        }
        if let Some(n) = o.samples {
            self.count = n;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(m) = o.mode {
            self.mode = m;
        }
        if let Some(h) = o.fd_step {
            self.fd_step = h;
        }
        if !o.grid.is_empty() {
            self.grid = o.grid.clone();
        }
        validate_numbers(self)
    }
}

fn validate_numbers(m: &Manifest) -> Result<(), ConfigError> {
    if m.count < 1 {
        return Err(ConfigError::new("sampling.count", "must be at least 1"));
    }
    if !(m.tol > 0.0 && m.tol.is_finite()) {
        return Err(ConfigError::new("numerics.tol", "must be a positive number"));
    }
    if !(m.fd_step > 0.0 && m.fd_step.is_finite()) {
        return Err(ConfigError::new("numerics.fd_step", "must be a positive number"));
    }
    for (i, &(a, b)) in m.grid.iter().enumerate() {
        if b == 0.0 {
            return Err(ConfigError::new(format!("grid[{i}]"), "b must be nonzero"));
        }
        if !a.is_finite() || !b.is_finite() {
            return Err(ConfigError::new(format!("grid[{i}]"), "a and b must be finite"));
        }
    }
    Ok(())
}

/// Parse a manifest from JSON text.
pub fn parse_manifest(text: &str) -> Result<Manifest, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawManifest = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { String::new() } else { path };
        ConfigError::new(path, e.into_inner().to_string())
    })?;
    resolve(raw)
}

pub fn load_manifest(path: &Path) -> Result<Manifest, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
    parse_manifest(&text)
}

pub fn resolve(raw: RawManifest) -> Result<Manifest, ConfigError> {
    if raw.factors.len() > 2 {
        return Err(ConfigError::new("factors", "at most two factors are supported"));
    }
    for (i, f) in raw.factors.iter().enumerate() {
        build_factor(f).map_err(|e| {
            let path = if e.path.is_empty() { format!("factors[{i}]") } else { format!("factors[{i}].{}", e.path) };
            ConfigError::new(path, e.message)
        })?;
    }
    for (i, c) in raw.checks.iter().enumerate() {
        if !CHECKS.contains(&c.as_str()) {
            return Err(ConfigError::new(
                format!("checks[{i}]"),
                format!("unknown check `{c}`, expected one of {}", CHECKS.join(", ")),
            ));
        }
        if PRODUCT_CHECKS.contains(&c.as_str()) && raw.factors.len() != 2 {
            return Err(ConfigError::new(
                format!("checks[{i}]"),
                format!("check `{c}` needs exactly two factors"),
            ));
        }
        if ["axioms", "trans_sasakian", "transverse"].contains(&c.as_str()) && raw.factors.is_empty() {
            return Err(ConfigError::new(format!("checks[{i}]"), format!("check `{c}` needs a factor")));
        }
    }
    if raw.product.is_some() && raw.grid.is_some() {
        return Err(ConfigError::new("product", "give either `product` or `grid`, not both"));
    }
    let grid = match (&raw.product, &raw.grid) {
        (Some(p), _) => vec![(p.a, p.b)],
        (None, Some(g)) if g.is_empty() => return Err(ConfigError::new("grid", "must not be empty")),
        (None, Some(g)) => g.iter().map(|x| (x[0], x[1])).collect(),
        (None, None) => DEFAULT_GRID.to_vec(),
    };
    if let Some(p) = &raw.product {
        if p.b == 0.0 {
            return Err(ConfigError::new("product.b", "b must be nonzero"));
        }
    }
    let sampling = raw.sampling.unwrap_or_default();
    let numerics = raw.numerics.unwrap_or_default();
    let m = Manifest {
        factors: raw.factors,
        grid,
        checks: raw.checks,
        count: sampling.count.unwrap_or(DEFAULT_COUNT),
        seed: sampling.seed.unwrap_or(DEFAULT_SEED),
        boxes: sampling.boxes.unwrap_or_default(),
        mode: numerics.mode.unwrap_or(ModeName::Jet),
        fd_step: numerics.fd_step.unwrap_or(DEFAULT_FD_STEP),
        tol: numerics.tol.unwrap_or(DEFAULT_TOL),
        control: raw.control,
    };
    validate_numbers(&m)?;
    let names: Vec<String> = m
        .factors
        .iter()
        .enumerate()
        .flat_map(|(i, f)| {
            let (s, _, _) = build_structure(f).expect("factors were checked above");
            s.chart.coords.iter().map(|c| format!("{c}_{}", i + 1)).collect::<Vec<_>>()
        })
        .collect();
    for (name, [lo, hi]) in &m.boxes {
        if !names.contains(name) {
            return Err(ConfigError::new(
                format!("sampling.box.{name}"),
                format!("unknown coordinate, expected one of {}", names.join(", ")),
            ));
        }
        if !(lo <= hi) {
            return Err(ConfigError::new(format!("sampling.box.{name}"), "lo must not exceed hi"));
        }
    }
    Ok(m)
}

/// Parse the structure of a factor without validating its type.
pub fn build_structure(f: &FactorSpec) -> Result<(tsgeom::contact::AlmostContactMetricStructure, f64, f64), ConfigError> {
    match f {
        FactorSpec::Builtin { builtin } => {
            if !BUILTIN_NAMES.contains(&builtin.as_str()) {
                return Err(ConfigError::new(
                    "builtin",
                    format!("unknown built-in `{builtin}`, expected one of {}", BUILTIN_NAMES.join(", ")),
                ));
            }
            let fac = builtin_factor(builtin).map_err(|e| ConfigError::new("builtin", e.to_string()))?;
            Ok((fac.structure, fac.alpha, fac.beta))
        }
        FactorSpec::Custom {
            name,
            dim,
            coords,
            g,
            phi,
            xi,
            eta,
            alpha,
            beta,
        } => {
            fn v(x: &[String]) -> Vec<&str> {
                x.iter().map(String::as_str).collect()
            }
            if let Some(d) = dim {
                if *d != coords.len() {
                    return Err(ConfigError::new("dim", format!("dim is {d} but {} coordinates are given", coords.len())));
                }
            }
            for (field, table) in [("g", g), ("phi", phi), ("xi", xi), ("eta", eta)] {
                for (k, text) in table.iter().enumerate() {
                    tsgeom::expr::parse(text, coords).map_err(|e| ConfigError::new(format!("{field}[{k}]"), e.to_string()))?;
                }
            }
            let s = model(name, &v(coords), &v(phi), &v(xi), &v(eta), &v(g))
                .map_err(|e| ConfigError::new("", e.to_string()))?;
            Ok((s, *alpha, *beta))
        }
    }
}

/// The factor with its declared type, not yet validated.
pub fn build_factor(f: &FactorSpec) -> Result<TransSasakianFactor, ConfigError> {
    let (s, alpha, beta) = build_structure(f)?;
    Ok(TransSasakianFactor::unchecked(s, alpha, beta))
}

/// Parse `a,b`.
pub fn parse_ab(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `a,b`, got `{s}`"))?;
    let a: f64 = a.trim().parse().map_err(|_| format!("bad a in `{s}`"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("bad b in `{s}`"))?;
    if b == 0.0 {
        return Err("b must be nonzero".into());
    }
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_manifest_resolves_defaults() {
        let m = parse_manifest(
            r#"{"factors":[{"builtin":"cosymplectic_flat"},{"builtin":"cosymplectic_flat"}],"checks":["harmonicity"]}"#,
        )
        .unwrap();
        assert_eq!(m.tol, 1e-6);
        assert_eq!(m.count, 64);
        assert_eq!(m.seed, 7);
        assert_eq!(m.mode, ModeName::Jet);
        assert_eq!(m.grid, DEFAULT_GRID.to_vec());
    }

    #[test]
    fn zero_b_is_rejected() {
        let e = parse_manifest(r#"{"factors":[{"builtin":"cosymplectic_flat"},{"builtin":"cosymplectic_flat"}],"product":{"a":1,"b":0}}"#)
            .unwrap_err();
        assert_eq!(e.path, "product.b");
    }

    #[test]
    fn typo_in_custom_factor_reports_position() {
        let text = r#"{"factors":[{"name":"f","coords":["x","y","z"],
            "g":["1","0","0","0","1","0","0","0","1+"],
            "phi":["0","-1","0","1","0","0","0","0","0"],
            "xi":["0","0","1"],"eta":["0","0","1"],"alpha":0,"beta":0}]}"#;
        let e = parse_manifest(text).unwrap_err();
        assert_eq!(e.path, "factors[0].g[8]");
        assert!(e.message.contains("offset 2"), "{e}");
    }

    #[test]
    fn schema_errors_carry_a_path() {
        let e = parse_manifest(r#"{"sampling":{"count":"many"}}"#).unwrap_err();
        assert_eq!(e.path, "sampling.count");
        let e = parse_manifest(r#"{"checks":["bogus"]}"#).unwrap_err();
        assert_eq!(e.path, "checks[0]");
    }

    #[test]
    fn ab_flag() {
        assert_eq!(parse_ab("-2, 3"), Ok((-2.0, 3.0)));
        assert!(parse_ab("1,0").is_err());
        assert!(parse_ab("1").is_err());
    }
}
