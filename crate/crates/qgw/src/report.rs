use std::fmt::Write as _;

use qgw_core::report::{Certificate, Check};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Error,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Error => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<String>,
    pub axiom: String,
    pub anchor: String,
    /// `null` when the residual is not finite.
    pub residual: Option<f64>,
    pub threshold: f64,
    pub passed: bool,
}

impl CheckJson {
    pub fn new(side: Option<&str>, c: &Check) -> Self {
        CheckJson {
            side: side.map(str::to_owned),
            axiom: c.axiom.clone(),
            anchor: c.anchor.clone(),
            residual: c.residual.is_finite().then_some(c.residual),
            threshold: c.threshold,
            passed: c.passed(),
        }
    }
}

/// Machine-readable outcome of one command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub verdict: Verdict,
    pub tolerance: f64,
    pub checks: Vec<CheckJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<f64>,
}

impl Report {
    pub fn new(command: &str, tolerance: f64) -> Self {
        Report {
            command: command.to_owned(),
            verdict: Verdict::Pass,
            tolerance,
            checks: Vec::new(),
            notes: Vec::new(),
            error: None,
            timing_ms: None,
        }
    }

    pub fn push(&mut self, side: Option<&str>, c: &Check) {
        self.checks.push(CheckJson::new(side, c));
    }

    pub fn extend(&mut self, side: Option<&str>, cert: &Certificate) {
        for c in &cert.checks {
            self.push(side, c);
        }
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    /// Pass iff every check passed, unless an error was recorded.
    pub fn settle(&mut self) {
        self.verdict = if self.error.is_some() {
            Verdict::Error
        } else if self.checks.iter().all(|c| c.passed) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let verdict = match self.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Error => "ERROR",
        };
        let _ = writeln!(out, "{}: {verdict} (tolerance {:e})", self.command, self.tolerance);
        for c in &self.checks {
            let name = match &c.side {
                Some(s) => format!("[{s}] {}", c.axiom),
                None => c.axiom.clone(),
            };
            let pad = 34usize.saturating_sub(name.chars().count());
            let residual = c.residual.map_or_else(|| "non-finite".to_owned(), |r| format!("{r:.3e}"));
            let mark = if c.passed { "ok  " } else { "FAIL" };
            let _ = writeln!(out, "  {mark} {name}{:pad$} {residual:>10} <= {:.1e}   {}", "", c.threshold, c.anchor);
        }
        for n in &self.notes {
            let _ = writeln!(out, "  note: {n}");
        }
        if let Some(e) = &self.error {
            let _ = writeln!(out, "  error: {e}");
        }
        if let Some(t) = self.timing_ms {
            let _ = writeln!(out, "  time: {t:.1} ms");
        }
        out
    }
}
