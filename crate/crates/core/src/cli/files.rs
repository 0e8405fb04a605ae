//! JSON file formats read and written by the command-line tool.
//!
//! Network file:
//!
//! ```json
//! { "n": 1,
//!   "alphabets": { "x": 2, "y": 2, "x_i": [2], "y_i": [2], "yhat_i": [2] },
//!   "channel": [ ... ] }
//! ```
//!
//! `channel` has `(|X|·∏|X_i|)·(|Y|·∏|Y_i|)` entries: one slice per input
//! tuple `(x, x_1..x_n)`, each holding `p(y, y_1..y_n | inputs)` over output
//! tuples, all tuples row-major with the rightmost index fastest.
//!
//! Distribution file: `p_x`, `p_x_i` (one array per relay) and `q_i` (one
//! flat array per relay, rows `(x_i, y_i)` input-major, columns `ŷ_i`).

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::network::{Alphabets, CodingDistribution, RelayNetworkSpec, STOCHASTIC_TOL};
use crate::optimize::{Objective, RestartTrace};
use crate::rate::{RateReport, CLOSURE_SLACK};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphabetsFile {
    pub x: usize,
    pub y: usize,
    #[serde(default)]
    pub x_i: Vec<usize>,
    #[serde(default)]
    pub y_i: Vec<usize>,
    #[serde(default)]
    pub yhat_i: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub n: usize,
    pub alphabets: AlphabetsFile,
    pub channel: Vec<f64>,
}

impl NetworkFile {
    pub fn from_spec(spec: &RelayNetworkSpec) -> Self {
        let ab = spec.alphabets();
        Self {
            n: spec.relays(),
            alphabets: AlphabetsFile {
                x: ab.x,
                y: ab.y,
                x_i: ab.x_i,
                y_i: ab.y_i,
                yhat_i: ab.yhat_i,
            },
            channel: spec.channel().to_vec(),
        }
    }

    pub fn to_spec(&self) -> Result<RelayNetworkSpec> {
        let ab = &self.alphabets;
        for (key, len) in [("x_i", ab.x_i.len()), ("y_i", ab.y_i.len()), ("yhat_i", ab.yhat_i.len())] {
            if len != self.n {
                return Err(Error::ShapeMismatch {
                    what: format!("alphabets.{key}"),
                    expected: self.n,
                    found: len,
                });
            }
        }
        RelayNetworkSpec::new(
            Alphabets {
                x: ab.x,
                y: ab.y,
                x_i: ab.x_i.clone(),
                y_i: ab.y_i.clone(),
                yhat_i: ab.yhat_i.clone(),
            },
            self.channel.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionFile {
    pub p_x: Vec<f64>,
    #[serde(default)]
    pub p_x_i: Vec<Vec<f64>>,
    #[serde(default)]
    pub q_i: Vec<Vec<f64>>,
}

impl DistributionFile {
    pub fn from_distribution(d: &CodingDistribution) -> Self {
        Self {
            p_x: d.p_x.clone(),
            p_x_i: d.p_xi.clone(),
            q_i: d.q.clone(),
        }
    }

    pub fn to_distribution(&self) -> CodingDistribution {
        CodingDistribution {
            p_x: self.p_x.clone(),
            p_xi: self.p_x_i.clone(),
            q: self.q_i.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigests {
    pub network_sha256: String,
    pub distribution_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub stochastic: f64,
    pub closure_slack: f64,
    pub lp_pivot: f64,
    pub lp_feasibility: f64,
    pub oracle_agreement: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            stochastic: STOCHASTIC_TOL,
            closure_slack: CLOSURE_SLACK,
            lp_pivot: crate::lp::PIVOT_TOL,
            lp_feasibility: crate::lp::FEASIBILITY_TOL,
            oracle_agreement: super::ORACLE_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationSummary {
    pub objective: Objective,
    pub seed: u64,
    pub restarts: usize,
    pub best_rate: f64,
    pub traces: Vec<RestartTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    pub discrepancy: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Machine-readable evaluation record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub tool: String,
    pub version: String,
    pub inputs: InputDigests,
    pub tolerances: Tolerances,
    pub report: RateReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimization: Option<OptimizationSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<Vec<OracleCheck>>,
}

impl ReportFile {
    pub fn new(report: RateReport, network_bytes: &[u8], distribution_bytes: &[u8]) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: InputDigests {
                network_sha256: sha256_hex(network_bytes),
                distribution_sha256: sha256_hex(distribution_bytes),
            },
            tolerances: Tolerances::default(),
            report,
            optimization: None,
            oracle: None,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Pretty JSON with a trailing newline, re-parsed before returning so an
/// emitted document always reads back under its own schema.
pub fn to_json<T>(value: &T) -> Result<String>
where
    T: Serialize + for<'de> Deserialize<'de> + PartialEq,
{
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Internal(format!("serialization failed: {e}")))?;
    text.push('\n');
    let back: T = serde_json::from_str(&text)
        .map_err(|e| Error::Internal(format!("emitted document does not parse: {e}")))?;
    if back != *value {
        return Err(Error::Internal("emitted document does not round-trip".into()));
    }
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn network_file_shape_errors() {
        let f: NetworkFile = serde_json::from_str(
            r#"{"n":1,"alphabets":{"x":2,"y":2,"x_i":[2],"y_i":[],"yhat_i":[2]},"channel":[]}"#,
        )
        .unwrap();
        assert!(matches!(f.to_spec(), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn point_to_point_defaults() {
        let f: NetworkFile = serde_json::from_str(
            r#"{"n":0,"alphabets":{"x":2,"y":2},"channel":[0.9,0.1,0.1,0.9]}"#,
        )
        .unwrap();
        let spec = f.to_spec().unwrap();
        assert_eq!(spec.relays(), 0);
        assert_eq!(NetworkFile::from_spec(&spec), f);
    }

    #[test]
    fn unknown_keys_rejected() {
        let r: std::result::Result<DistributionFile, _> =
            serde_json::from_str(r#"{"p_x":[1.0],"px":[1.0]}"#);
        assert!(r.is_err());
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
