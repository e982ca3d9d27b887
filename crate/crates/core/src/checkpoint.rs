//! Checksummed policy checkpoints.
//!
//! File layout: `{"checksum": "<hex sha256>", "payload": {...}}`. The
//! checksum covers the compact JSON serialization of the payload with
//! object keys in sorted order.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::decision::ACTION_DIM;
use crate::discriminator::Discriminator;
use crate::error::{check_dim, Error, Result};
use crate::persist::{read_to_string, write_atomic};
use crate::policy::{Matrix, PolicyParams};
use crate::stats::RunningStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Ailrs,
    Bc,
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algo::Ailrs => "ailrs",
            Algo::Bc => "bc",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub algo: Algo,
    pub iteration: usize,
    pub policy: PolicyParams,
    pub stats: RunningStats,
    pub discriminator: Option<Discriminator>,
    pub config: RunConfig,
    pub master_seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Payload {
    algo: Algo,
    iteration: usize,
    p: usize,
    n: usize,
    /// Row-major `p x n`.
    theta: Vec<f64>,
    mu: Vec<f64>,
    var: Vec<f64>,
    count: u64,
    discriminator: Option<Discriminator>,
    config: RunConfig,
    master_seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope {
    checksum: String,
    payload: Value,
}

fn digest(payload: &Value) -> String {
    let canonical = serde_json::to_string(payload).expect("json value serializes");
    let hash = Sha256::digest(canonical.as_bytes());
    hash.iter().map(|b| format!("{b:02x}")).collect()
}

impl Checkpoint {
    pub fn state_dim(&self) -> usize {
        self.policy.state_dim()
    }

    pub fn to_json(&self) -> Result<String> {
        let payload = Payload {
            algo: self.algo,
            iteration: self.iteration,
            p: self.policy.action_dim(),
            n: self.policy.state_dim(),
            theta: self.policy.theta.data.clone(),
            mu: self.stats.mean.clone(),
            var: self.stats.var.clone(),
            count: self.stats.count,
            discriminator: self.discriminator.clone(),
            config: self.config.clone(),
            master_seed: self.master_seed,
        };
        let payload = serde_json::to_value(&payload).map_err(|e| Error::Data(e.to_string()))?;
        let envelope = Envelope {
            checksum: digest(&payload),
            payload,
        };
        serde_json::to_string_pretty(&envelope).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        Self::parse(&read_to_string(path)?, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Checkpoint> {
        let bad = |reason: String| Error::malformed(path, reason);
        let envelope: Envelope = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        if digest(&envelope.payload) != envelope.checksum {
            return Err(bad("field `checksum` does not match the payload".into()));
        }
        let p: Payload =
            serde_json::from_value(envelope.payload).map_err(|e| bad(format!("payload: {e}")))?;
        if p.p != ACTION_DIM {
            return Err(bad(format!("field `p` is {}, expected {ACTION_DIM}", p.p)));
        }
        for (name, len, want) in [
            ("theta", p.theta.len(), p.p * p.n),
            ("mu", p.mu.len(), p.n),
            ("var", p.var.len(), p.n),
        ] {
            if len != want {
                return Err(bad(format!(
                    "field `{name}` has {len} values, expected {want}"
                )));
            }
        }
        if p.var.iter().any(|&v| !(v >= 0.0)) {
            return Err(bad("field `var` has a negative or non-finite entry".into()));
        }
        if let Some(d) = &p.discriminator {
            if d.params.state_dim != p.n || d.params.action_dim != p.p {
                return Err(bad(
                    "field `discriminator` dimensions disagree with (p, n)".into()
                ));
            }
        }
        Ok(Checkpoint {
            algo: p.algo,
            iteration: p.iteration,
            policy: PolicyParams {
                theta: Matrix {
                    rows: p.p,
                    cols: p.n,
                    data: p.theta,
                },
            },
            stats: RunningStats {
                mean: p.mu,
                var: p.var,
                count: p.count,
            },
            discriminator: p.discriminator,
            config: p.config,
            master_seed: p.master_seed,
        })
    }

    /// Fail unless the policy can act on observations of `obs_dim`.
    pub fn check_compatible(&self, obs_dim: usize) -> Result<()> {
        check_dim("checkpoint state dimension", obs_dim, self.state_dim())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discriminator::DiscriminatorConfig;
    use crate::seed::stream;

    fn sample(with_disc: bool) -> Checkpoint {
        let n = 5;
        let theta: Vec<f64> = (0..3 * n).map(|i| (i as f64 * 0.37).sin() / 3.0).collect();
        let stats = RunningStats {
            mean: vec![0.1, -2.5, 1e-17, 3.0, std::f64::consts::PI],
            var: vec![1.0 / 3.0, 2.0, 0.0, 1e-300, 7.25],
            count: 1234,
        };
        let disc = with_disc.then(|| {
            let cfg = DiscriminatorConfig {
                hidden: vec![4],
                ..Default::default()
            };
            Discriminator::new(n, 3, cfg, &mut stream(1, "x")).unwrap()
        });
        Checkpoint {
            algo: Algo::Ailrs,
            iteration: 40,
            policy: PolicyParams {
                theta: Matrix::from_rows(3, n, theta).unwrap(),
            },
            stats,
            discriminator: disc,
            config: RunConfig::default(),
            master_seed: 99,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for with_disc in [false, true] {
            let ck = sample(with_disc);
            let back = Checkpoint::parse(&ck.to_json().unwrap(), Path::new("c.json")).unwrap();
            assert_eq!(back, ck);
            for (a, b) in back.policy.theta.data.iter().zip(&ck.policy.theta.data) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt_1").join("checkpoint.json");
        let ck = sample(true);
        ck.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ck);
    }

    #[test]
    fn detects_tampering_and_truncation() {
        let text = sample(false).to_json().unwrap();
        let path = Path::new("c.json");
        let err = Checkpoint::parse(&text[..text.len() / 2], path).unwrap_err();
        assert!(matches!(err, Error::Malformed { .. }));
        let tampered = text.replacen("\"iteration\": 40", "\"iteration\": 41", 1);
        assert_ne!(tampered, text);
        let msg = Checkpoint::parse(&tampered, path).unwrap_err().to_string();
        assert!(msg.contains("checksum"), "{msg}");
    }

    #[test]
    fn names_inconsistent_fields() {
        let mut value: Value = serde_json::from_str(&sample(false).to_json().unwrap()).unwrap();
        value["payload"]["mu"] = serde_json::json!([0.0, 1.0]);
        value["checksum"] = Value::String(digest(&value["payload"]));
        let msg = Checkpoint::parse(&value.to_string(), Path::new("c.json"))
            .unwrap_err()
            .to_string();
        assert!(msg.contains("`mu`"), "{msg}");
    }

    #[test]
    fn dimension_check_on_use() {
        let ck = sample(false);
        assert!(ck.check_compatible(5).is_ok());
        assert!(matches!(
            ck.check_compatible(28),
            Err(Error::Dimension { .. })
        ));
    }
}
