//! Named residual checks collected into certificates.

use alloc::string::String;
use alloc::vec::Vec;

/// One certified relation: a residual compared against a threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub axiom: String,
    /// The relation being checked, written out as a formula.
    pub anchor: String,
    pub residual: f64,
    pub threshold: f64,
}

impl Check {
    pub fn new(axiom: impl Into<String>, anchor: impl Into<String>, residual: f64, threshold: f64) -> Self {
        Check { axiom: axiom.into(), anchor: anchor.into(), residual, threshold }
    }

    /// Residual finite and within the threshold.
    pub fn passed(&self) -> bool {
        self.residual.is_finite() && self.residual <= self.threshold
    }
}

/// An ordered list of checks; passes iff every check passes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Certificate {
    pub checks: Vec<Check>,
}

impl Certificate {
    pub fn new() -> Self {
        Certificate { checks: Vec::new() }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn extend(&mut self, other: Certificate) {
        self.checks.extend(other.checks);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn failing(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed())
    }

    /// Axiom names of the failing checks, in order.
    pub fn failing_axioms(&self) -> Vec<&str> {
        self.failing().map(|c| c.axiom.as_str()).collect()
    }

    pub fn residual(&self, axiom: &str) -> Option<f64> {
        self.checks.iter().find(|c| c.axiom == axiom).map(|c| c.residual)
    }

    /// Largest residual among checks whose axiom starts with `prefix`.
    pub fn worst_with_prefix(&self, prefix: &str) -> f64 {
        self.checks.iter().filter(|c| c.axiom.starts_with(prefix)).fold(0.0, |m, c| {
            if c.residual.is_finite() {
                m.max(c.residual)
            } else {
                f64::INFINITY
            }
        })
    }
}

/// Verdicts of the two equivalent formulations of the same structure.
#[derive(Clone, Debug, PartialEq)]
pub struct Equivalence {
    pub state_side: Certificate,
    pub cstar_side: Certificate,
}

impl Equivalence {
    pub fn agree(&self) -> bool {
        self.state_side.passed() == self.cstar_side.passed()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_follows_thresholds() {
        let mut c = Certificate::new();
        c.push(Check::new("a", "x = y", 1e-12, 1e-8));
        assert!(c.passed());
        c.push(Check::new("b", "x = z", 1e-3, 1e-8));
        assert!(!c.passed());
        assert_eq!(c.failing_axioms(), alloc::vec!["b"]);
        c.push(Check::new("c", "x = w", f64::NAN, 1e-8));
        assert_eq!(c.failing_axioms(), alloc::vec!["b", "c"]);
    }
}
