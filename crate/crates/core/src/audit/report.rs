use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::batch::csv_field;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    /// Reported without a pass/fail threshold.
    Info,
}

impl Verdict {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Self::Pass
        } else {
            Self::Fail
        }
    }

    pub fn is_fail(self) -> bool {
        self == Self::Fail
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pass => "PASS",
            Self::Fail => "FAIL",
            Self::Info => "INFO",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Result of one audit check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub check: String,
    pub params: BTreeMap<String, String>,
    pub stats: BTreeMap<String, f64>,
    pub threshold: f64,
    pub verdict: Verdict,
    pub seed: u64,
    pub trials: u64,
}

impl AuditReport {
    pub(crate) fn new(check: &str, seed: u64, trials: u64) -> Self {
        Self {
            check: check.to_string(),
            params: BTreeMap::new(),
            stats: BTreeMap::new(),
            threshold: f64::NAN,
            verdict: Verdict::Info,
            seed,
            trials,
        }
    }

    pub(crate) fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub(crate) fn stat(mut self, key: &str, value: f64) -> Self {
        self.stats.insert(key.to_string(), value);
        self
    }

    pub fn stat_value(&self, key: &str) -> Option<f64> {
        self.stats.get(key).copied()
    }
}

/// CSV with columns `check, param_*, stat_*, threshold, verdict, seed,
/// trials`; each `header` line is written first, prefixed with `# `.
pub fn reports_to_csv(reports: &[AuditReport], header: &[String]) -> String {
    let params: BTreeSet<&str> = reports.iter().flat_map(|r| r.params.keys().map(String::as_str)).collect();
    let stats: BTreeSet<&str> = reports.iter().flat_map(|r| r.stats.keys().map(String::as_str)).collect();
    let mut out = String::new();
    for line in header {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    let mut cols = vec!["check".to_string()];
    cols.extend(params.iter().map(|p| format!("param_{p}")));
    cols.extend(stats.iter().map(|s| format!("stat_{s}")));
    cols.extend(["threshold", "verdict", "seed", "trials"].map(String::from));
    out.push_str(&cols.join(","));
    out.push('\n');
    for r in reports {
        let mut row = vec![csv_field(&r.check)];
        row.extend(params.iter().map(|p| r.params.get(*p).map(|v| csv_field(v)).unwrap_or_default()));
        row.extend(stats.iter().map(|s| r.stats.get(*s).map(|v| v.to_string()).unwrap_or_default()));
        row.push(r.threshold.to_string());
        row.push(r.verdict.to_string());
        row.push(r.seed.to_string());
        row.push(r.trials.to_string());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// JSON object `{ "config": ..., "version": ..., "reports": [...] }`.
/// Non-finite statistics are written as strings.
pub fn reports_to_json(reports: &[AuditReport], config: serde_json::Value) -> Result<String> {
    let reports: Vec<serde_json::Value> = reports
        .iter()
        .map(|r| {
            let stats: serde_json::Map<String, serde_json::Value> =
                r.stats.iter().map(|(k, v)| (k.clone(), json_number(*v))).collect();
            serde_json::json!({
                "check": r.check,
                "params": r.params,
                "stats": stats,
                "threshold": json_number(r.threshold),
                "verdict": r.verdict,
                "seed": r.seed,
                "trials": r.trials,
            })
        })
        .collect();
    let doc = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "reports": reports,
    });
    Ok(serde_json::to_string_pretty(&doc)?)
}

fn json_number(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v).map(serde_json::Value::Number).unwrap_or_else(|| v.to_string().into())
}
