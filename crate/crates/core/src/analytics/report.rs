use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default pass line in standard errors.
pub const Z_PASS: f64 = 3.0;

/// One Monte Carlo estimate against its analytic target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub experiment: String,
    pub params: serde_json::Value,
    /// e.g. "Y_t(H)·Y_s(G) @ (1, 0.5)"
    pub observable: String,
    pub estimate: f64,
    pub stderr: f64,
    pub target: f64,
    pub z_score: f64,
    pub pass: bool,
}

impl Comparison {
    pub fn new(
        experiment: impl Into<String>,
        params: serde_json::Value,
        observable: impl Into<String>,
        estimate: f64,
        stderr: f64,
        target: f64,
    ) -> Self {
        let z_score = z_score(estimate, stderr, target);
        Comparison {
            experiment: experiment.into(),
            params,
            observable: observable.into(),
            estimate,
            stderr,
            target,
            z_score,
            pass: z_score.abs() <= Z_PASS,
        }
    }
}

pub fn z_score(estimate: f64, stderr: f64, target: f64) -> f64 {
    let d = estimate - target;
    if stderr > 0.0 {
        d / stderr
    } else if d == 0.0 {
        0.0
    } else {
        d.signum() * f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub comparisons: Vec<Comparison>,
    /// Free-form extra results (fits, tables).
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

#[derive(Serialize)]
struct FlatRow<'a> {
    experiment: &'a str,
    observable: &'a str,
    estimate: f64,
    stderr: f64,
    target: f64,
    z_score: f64,
    pass: bool,
}

impl AnalysisReport {
    pub fn push(&mut self, c: Comparison) {
        self.comparisons.push(c);
    }

    pub fn all_pass(&self) -> bool {
        self.comparisons.iter().all(|c| c.pass)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Flat mirror without the params blocks.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for c in &self.comparisons {
            w.serialize(FlatRow {
                experiment: &c.experiment,
                observable: &c.observable,
                estimate: c.estimate,
                stderr: c.stderr,
                target: c.target,
                z_score: c.z_score,
                pass: c.pass,
            })?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z_and_pass() {
        let c = Comparison::new("x", serde_json::json!({}), "Y", 1.3, 0.1, 1.0);
        assert!((c.z_score - 3.0).abs() < 1e-12);
        let c = Comparison::new("x", serde_json::json!({}), "Y", 1.31, 0.1, 1.0);
        assert!(!c.pass);
        assert_eq!(z_score(0.0, 0.0, 0.0), 0.0);
        assert_eq!(z_score(1.0, 0.0, 0.0), f64::INFINITY);
    }

    #[test]
    fn json_round_trip_and_csv() {
        let mut r = AnalysisReport::default();
        r.push(Comparison::new("c2", serde_json::json!({"n": 128}), "Var Y_0(H)", 0.2, 0.01, 0.21));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("report.json");
        r.write_json(&p).unwrap();
        assert_eq!(AnalysisReport::read_json(&p).unwrap(), r);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("experiment,observable,estimate,stderr,target,z_score,pass\n"));
    }
}
