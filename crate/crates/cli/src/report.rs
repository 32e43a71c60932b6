//! Machine-readable run reports: one record per executed check with the
//! verified identity, max residual, tolerance and verdict, plus an
//! environment block pinning seed and version so identical runs produce
//! byte-identical JSON.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Environment {
    pub seed: u64,
    pub version: String,
    pub suite: String,
    pub dimension: usize,
    pub rng: String,
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Witness {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

/// Outcome semantics: `pass`/`fail` gate the exit code; `info:*` records
/// carry classification results (a "none" verdict is data, not a failure).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CheckRecord {
    pub id: String,
    /// The identity or condition the check verifies, in plain notation.
    pub anchor: String,
    pub samples: usize,
    pub residual: f64,
    pub tol: f64,
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Report {
    pub environment: Environment,
    pub checks: Vec<CheckRecord>,
}

impl Report {
    pub fn failed(&self) -> bool {
        self.checks.iter().any(|c| c.verdict == "fail" || c.verdict == "error")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "suite {} | seed {} | dim {} | version {} | rng {}\n",
            self.environment.suite,
            self.environment.seed,
            self.environment.dimension,
            self.environment.version,
            self.environment.rng,
        ));
        for c in &self.checks {
            out.push_str(&format!(
                "[{:>4}] {:<40} residual {:>12.3e}  tol {:>8.1e}  samples {:>4}  :: {}\n",
                c.verdict, c.id, c.residual, c.tol, c.samples, c.anchor
            ));
            if let Some(w) = &c.witness {
                out.push_str(&format!("        witness x = {:?}, u = {:?}\n", w.x, w.u));
            }
        }
        let fails = self.checks.iter().filter(|c| c.verdict == "fail").count();
        out.push_str(&format!("{} checks, {} failed\n", self.checks.len(), fails));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> Report {
        Report {
            environment: Environment {
                seed: 7,
                version: "0.1.0".into(),
                suite: "tensors".into(),
                dimension: 2,
                rng: "chacha8".into(),
                tolerances: BTreeMap::new(),
            },
            checks: vec![CheckRecord {
                id: "metric.homogeneity".into(),
                anchor: "g(x, lambda u) = g(x, u)".into(),
                samples: 40,
                residual: 1.2e-9,
                tol: 1e-8,
                verdict: "pass".into(),
                witness: None,
            }],
        }
    }

    #[test]
    fn json_roundtrip_is_byte_identical() {
        let report = sample_report();
        let json = report.to_json();
        let parsed: Report = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.to_json(), json);
    }

    #[test]
    fn empty_report_has_environment() {
        let mut report = sample_report();
        report.checks.clear();
        let json = report.to_json();
        assert!(json.contains("\"seed\": 7"));
        assert!(!report.failed());
    }

    #[test]
    fn text_format_carries_anchors() {
        let report = sample_report();
        let text = report.to_text();
        assert!(text.contains("g(x, lambda u) = g(x, u)"));
    }
}
