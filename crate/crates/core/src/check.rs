//! Residual bookkeeping: per-identity statistics over sample points and the
//! three-way verdict.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Inconclusive,
    Fail,
}

impl Verdict {
    /// Pass below `tol`, fail above `100 tol`, inconclusive in between.
    pub fn from_residual(max: f64, tol: f64) -> Self {
        if max.is_nan() || max > 100.0 * tol {
            Verdict::Fail
        } else if max < tol {
            Verdict::Pass
        } else {
            Verdict::Inconclusive
        }
    }

    pub fn worst(self, other: Verdict) -> Verdict {
        self.max(other)
    }

    pub fn label(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Inconclusive => "inconclusive",
            Verdict::Fail => "fail",
        }
    }
}

/// Statistics of one identity over all sample points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityStat {
    pub name: String,
    pub max: f64,
    pub mean: f64,
    pub worst_point: Vec<f64>,
    pub verdict: Verdict,
    /// Reported but excluded from the check verdict.
    pub informational: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub tol: f64,
    pub verdict: Verdict,
    pub identities: Vec<IdentityStat>,
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn new(check: &str, tol: f64) -> Self {
        Self {
            check: check.to_string(),
            tol,
            verdict: Verdict::Pass,
            identities: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn identity(&self, name: &str) -> Option<&IdentityStat> {
        self.identities.iter().find(|s| s.name == name)
    }

    /// Largest residual among identities whose name starts with `prefix`.
    pub fn max_with_prefix(&self, prefix: &str) -> f64 {
        self.identities
            .iter()
            .filter(|s| s.name.starts_with(prefix))
            .fold(0.0, |m, s| if s.max.is_nan() { f64::INFINITY } else { m.max(s.max) })
    }

    /// Largest residual over the identities that count toward the verdict.
    pub fn max_residual(&self) -> f64 {
        self.identities
            .iter()
            .filter(|s| !s.informational)
            .fold(0.0, |m, s| if s.max.is_nan() { f64::INFINITY } else { m.max(s.max) })
    }

    pub fn push(&mut self, stat: IdentityStat) {
        if !stat.informational {
            self.verdict = self.verdict.worst(stat.verdict);
        }
        self.identities.push(stat);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    /// Recompute the verdict from scratch.
    pub fn refresh_verdict(&mut self) {
        let mut v = Verdict::Pass;
        for s in &self.identities {
            if !s.informational {
                v = v.worst(s.verdict);
            }
        }
        if self.notes.iter().any(|n| n.starts_with("error")) {
            v = Verdict::Fail;
        }
        self.verdict = v;
    }

    /// Fold another report's identities in, prefixing their names.
    pub fn absorb(&mut self, prefix: &str, other: CheckReport) {
        for mut s in other.identities {
            s.name = format!("{prefix}{}", s.name);
            self.push(s);
        }
        for n in other.notes {
            self.notes.push(format!("{prefix}{n}"));
        }
        self.refresh_verdict();
    }
}

/// Named residuals at one point, in a fixed order. Repeated names keep the max.
#[derive(Clone, Debug, Default)]
pub struct Residuals {
    entries: Vec<(String, f64, bool)>,
}

impl Residuals {
    pub fn new() -> Self {
        Self::default()
    }

    fn put(&mut self, name: &str, v: f64, info: bool) {
        let v = if v.is_nan() { f64::INFINITY } else { v.abs() };
        match self.entries.iter_mut().find(|e| e.0 == name) {
            Some(e) => e.1 = e.1.max(v),
            None => self.entries.push((name.to_string(), v, info)),
        }
    }

    pub fn push(&mut self, name: &str, v: f64) {
        self.put(name, v, false);
    }

    /// Reported for information only.
    pub fn info(&mut self, name: &str, v: f64) {
        self.put(name, v, true);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.0 == name).map(|e| e.1)
    }

    pub fn extend(&mut self, other: Residuals) {
        for (n, v, i) in other.entries {
            self.put(&n, v, i);
        }
    }
}

/// Evaluate `f` at every point (in parallel) and aggregate in point order.
pub fn evaluate<F>(check: &str, tol: f64, points: &[Vec<f64>], f: F) -> CheckReport
where
    F: Fn(&[f64]) -> Result<Residuals> + Sync,
{
    let results: Vec<Result<Residuals>> = points.par_iter().map(|p| f(p)).collect();
    aggregate(check, tol, points, results)
}

pub fn aggregate(check: &str, tol: f64, points: &[Vec<f64>], results: Vec<Result<Residuals>>) -> CheckReport {
    struct Acc {
        name: String,
        max: f64,
        sum: f64,
        count: usize,
        worst: Vec<f64>,
        info: bool,
    }
    let mut accs: Vec<Acc> = Vec::new();
    let mut report = CheckReport::new(check, tol);
    let mut errors = 0usize;
    for (p, r) in points.iter().zip(results) {
        match r {
            Ok(res) => {
                for (name, v, info) in res.entries {
                    let acc = match accs.iter_mut().position(|a| a.name == name) {
                        Some(i) => &mut accs[i],
                        None => {
                            accs.push(Acc {
                                name,
                                max: -1.0,
                                sum: 0.0,
                                count: 0,
                                worst: Vec::new(),
                                info,
                            });
                            accs.last_mut().expect("just pushed")
                        }
                    };
                    acc.sum += v;
                    acc.count += 1;
                    if v > acc.max {
                        acc.max = v;
                        acc.worst = p.clone();
                    }
                }
            }
            Err(e) => {
                errors += 1;
                if errors <= 3 {
                    report.note(format!("error at {p:?}: {e}"));
                }
            }
        }
    }
    if errors > 3 {
        report.note(format!("error: {errors} points failed to evaluate"));
    }
    for a in accs {
        let mean = if a.count > 0 { a.sum / a.count as f64 } else { 0.0 };
        report.push(IdentityStat {
            verdict: Verdict::from_residual(a.max, tol),
            name: a.name,
            max: a.max.max(0.0),
            mean,
            worst_point: a.worst,
            informational: a.info,
        });
    }
    report.refresh_verdict();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::GeomError;

    #[test]
    fn three_way_verdict() {
        assert_eq!(Verdict::from_residual(1e-9, 1e-6), Verdict::Pass);
        assert_eq!(Verdict::from_residual(1e-5, 1e-6), Verdict::Inconclusive);
        assert_eq!(Verdict::from_residual(1e-3, 1e-6), Verdict::Fail);
        assert_eq!(Verdict::from_residual(f64::NAN, 1e-6), Verdict::Fail);
    }

    #[test]
    fn aggregation_keeps_point_order_and_worst_point() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let r = evaluate("t", 1e-3, &pts, |p| {
            let mut r = Residuals::new();
            r.push("a", p[0] * 1e-4);
            r.info("b", 1.0);
            Ok(r)
        });
        let a = r.identity("a").unwrap();
        assert_eq!(a.worst_point, vec![4.0]);
        assert!((a.mean - 2e-4).abs() < 1e-18);
        assert_eq!(a.verdict, Verdict::Pass);
        assert_eq!(r.identity("b").unwrap().verdict, Verdict::Fail);
        assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn errors_fail_the_check() {
        let pts = vec![vec![0.0]];
        let r = evaluate("t", 1e-3, &pts, |_| Err(GeomError::ZeroB));
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.notes.len(), 1);
    }
}
