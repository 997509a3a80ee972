//! Bookkeeping for the acceptance run: each criterion prints one
//! `PASS`/`FAIL` line as soon as it is decided.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub id: String,
    pub pass: bool,
    pub line: String,
}

#[derive(Debug, Default)]
pub struct Report {
    checks: Vec<Check>,
    quiet: bool,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    /// A report that records without printing.
    pub fn silent() -> Self {
        Self { checks: Vec::new(), quiet: true }
    }

    fn record(&mut self, id: &str, pass: bool, body: String) -> bool {
        let line = format!("{} {id}: {body}", if pass { "PASS" } else { "FAIL" });
        if !self.quiet {
            println!("{line}");
        }
        self.checks.push(Check { id: id.into(), pass, line });
        pass
    }

    /// Passes when `measured ≤ limit`; NaN fails.
    pub fn at_most(&mut self, id: &str, what: &str, measured: f64, limit: f64) -> bool {
        self.record(id, measured <= limit, format!("{what} = {measured:.3e} (limit {limit:.0e})"))
    }

    /// Passes when `measured ≥ floor`; NaN fails.
    pub fn at_least(&mut self, id: &str, what: &str, measured: f64, floor: f64) -> bool {
        self.record(id, measured >= floor, format!("{what} = {measured:.3e} (floor {floor:.0e})"))
    }

    pub fn holds(&mut self, id: &str, what: &str, ok: bool, detail: impl AsRef<str>) -> bool {
        self.record(id, ok, format!("{what}; {}", detail.as_ref()))
    }

    pub fn info(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("INFO {}", line.as_ref());
        }
    }

    pub fn checks(&self) -> &[Check] {
        &self.checks
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.pass).count()
    }

    pub fn summary(&self) -> String {
        let mut s = format!("{} checks, {} passed, {} failed", self.checks.len(), self.checks.len() - self.failures(), self.failures());
        for c in self.checks.iter().filter(|c| !c.pass) {
            let _ = write!(s, "\n  failed: {}", c.id);
        }
        s
    }
}

/// First index from which every later entry lies within `tol` of `target`.
pub fn settles_at(values: &[f64], target: f64, tol: f64) -> Option<usize> {
    let last_out = values.iter().rposition(|v| !((v - target).abs() <= tol));
    match last_out {
        None => Some(0),
        Some(i) if i + 1 < values.len() => Some(i + 1),
        Some(_) => None,
    }
}

/// First index from which the 6-decimal rendering no longer changes.
pub fn stable_digits_from(values: &[f64]) -> usize {
    let r: Vec<String> = values.iter().map(|v| format!("{v:.6}")).collect();
    let last = r.last().cloned().unwrap_or_default();
    r.iter().rposition(|x| *x != last).map_or(0, |i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_fails_both_directions() {
        let mut r = Report::silent();
        assert!(!r.at_most("a", "x", f64::NAN, 1.0));
        assert!(!r.at_least("b", "x", f64::NAN, 1.0));
        assert!(r.at_most("c", "x", 1.0, 1.0));
        assert_eq!(r.failures(), 2);
        assert!(r.summary().contains("failed: a") && r.summary().contains("failed: b"));
    }

    #[test]
    fn settling_index() {
        assert_eq!(settles_at(&[5.0, 1.0, 1.001, 0.9995], 1.0, 2e-3), Some(1));
        assert_eq!(settles_at(&[1.0, 1.0], 1.0, 1e-9), Some(0));
        assert_eq!(settles_at(&[1.0, 3.0], 1.0, 1e-3), None);
    }

    #[test]
    fn digit_stability() {
        assert_eq!(stable_digits_from(&[1.0, 1.5, 1.2500001, 1.25]), 2);
        assert_eq!(stable_digits_from(&[0.3]), 0);
    }
}
