//! Machine-readable check records and the report document.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Error;
use crate::sampling::Residual;

pub const TOOL_NAME: &str = "nclb";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Inconclusive => "inconclusive",
        }
    }

    pub fn from_bool(ok: bool) -> Status {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub status: Status,
    pub max_residual: Option<f64>,
    pub samples_used: usize,
    pub seed: u64,
    pub skipped_samples: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl CheckReport {
    pub fn new(check: &str, status: Status, seed: u64) -> Self {
        CheckReport {
            check: check.to_string(),
            status,
            max_residual: None,
            samples_used: 0,
            seed,
            skipped_samples: 0,
            metrics: BTreeMap::new(),
            message: None,
        }
    }

    /// Pass iff `r.max <= tol`.
    pub fn from_residual(check: &str, r: &Residual, tol: f64, seed: u64) -> Self {
        let mut c = CheckReport::new(check, Status::from_bool(r.max <= tol), seed);
        c.max_residual = Some(r.max);
        c.samples_used = r.samples_used;
        c.skipped_samples = r.skipped;
        c.metric("tolerance", tol)
    }

    /// Inconclusive errors map to `inconclusive`, everything else to `fail`.
    pub fn from_error(check: &str, e: &Error, seed: u64) -> Self {
        let status = if matches!(e, Error::Inconclusive(_)) { Status::Inconclusive } else { Status::Fail };
        let mut c = CheckReport::new(check, status, seed);
        c.message = Some(e.to_string());
        c
    }

    pub fn metric(mut self, key: &str, value: impl Serialize) -> Self {
        self.metrics.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    pub fn with_message(mut self, m: impl Into<String>) -> Self {
        self.message = Some(m.into());
        self
    }

    /// Folds another residual into this record, failing if it exceeds `tol`.
    pub fn absorb(mut self, key: &str, r: &Residual, tol: f64) -> Self {
        self.max_residual = Some(self.max_residual.map_or(r.max, |m| m.max(r.max)));
        self.samples_used += r.samples_used;
        self.skipped_samples += r.skipped;
        if r.max > tol && self.status == Status::Pass {
            self.status = Status::Fail;
        }
        self.metric(key, r.max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub parameters: BTreeMap<String, String>,
    pub checks: Vec<CheckReport>,
    pub overall: Status,
}

/// Fail if any check fails, otherwise inconclusive if any is, otherwise pass.
pub fn overall(checks: &[CheckReport]) -> Status {
    if checks.iter().any(|c| c.status == Status::Fail) {
        Status::Fail
    } else if checks.iter().any(|c| c.status == Status::Inconclusive) {
        Status::Inconclusive
    } else {
        Status::Pass
    }
}

impl ReportDoc {
    pub fn new(command: &str, seed: u64, parameters: BTreeMap<String, String>, checks: Vec<CheckReport>) -> Self {
        ReportDoc {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            command: command.into(),
            seed,
            parameters,
            overall: overall(&checks),
            checks,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}  seed={}", self.tool, self.command, self.seed);
        for (k, v) in &self.parameters {
            let _ = writeln!(out, "  {k} = {v}");
        }
        let w = self.checks.iter().map(|c| c.check.len()).max().unwrap_or(5).max(5);
        let _ = writeln!(out, "{:<w$}  {:<12}  {:>12}  {:>8}  {:>7}", "check", "status", "max_residual", "samples", "skipped");
        for c in &self.checks {
            let r = c.max_residual.map_or("-".to_string(), |r| format!("{r:.3e}"));
            let _ = writeln!(
                out,
                "{:<w$}  {:<12}  {:>12}  {:>8}  {:>7}",
                c.check,
                c.status.as_str(),
                r,
                c.samples_used,
                c.skipped_samples
            );
            if let Some(m) = &c.message {
                let _ = writeln!(out, "{:<w$}  {m}", "");
            }
        }
        let _ = writeln!(out, "overall: {}", self.overall.as_str());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overall_status_rules() {
        let p = CheckReport::new("a", Status::Pass, 1);
        let f = CheckReport::new("b", Status::Fail, 1);
        let i = CheckReport::new("c", Status::Inconclusive, 1);
        assert_eq!(overall(&[p.clone()]), Status::Pass);
        assert_eq!(overall(&[p.clone(), i.clone()]), Status::Inconclusive);
        assert_eq!(overall(&[i, f, p]), Status::Fail);
        assert_eq!(overall(&[]), Status::Pass);
    }

    #[test]
    fn json_schema_fields() {
        let r = Residual { max: 1e-13, samples_used: 10, skipped: 2 };
        let c = CheckReport::from_residual("x", &r, 1e-12, 7);
        let doc = ReportDoc::new("model verify", 7, BTreeMap::new(), vec![c]);
        let v: Value = serde_json::from_str(&doc.to_json()).unwrap();
        let c0 = &v["checks"][0];
        for k in ["check", "status", "max_residual", "samples_used", "seed", "skipped_samples"] {
            assert!(c0.get(k).is_some(), "{k}");
        }
        assert_eq!(c0["status"], "pass");
        assert_eq!(v["overall"], "pass");
        assert_eq!(doc.to_json(), doc.clone().to_json());
    }

    #[test]
    fn inconclusive_errors() {
        let c = CheckReport::from_error("x", &Error::Inconclusive("none".into()), 0);
        assert_eq!(c.status, Status::Inconclusive);
        let c = CheckReport::from_error("x", &Error::Verification("bad".into()), 0);
        assert_eq!(c.status, Status::Fail);
    }
}
