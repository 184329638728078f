//! Run manifests: the single file that makes a run reproducible.
//!
//! A manifest freezes the fully-resolved model config (after any
//! hidden-width substitution), training settings, dataset paths with
//! checksums, and artifact names. `train --manifest` replays it and
//! must produce bit-identical checkpoints and metric columns.

use std::path::{Path, PathBuf};

use entangle::ModelConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_PREFIX: &str = "model";
pub const METRICS_FILE: &str = "metrics.csv";

/// Dataset provenance: where the inputs live and what bytes they held.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub name: String,
    pub graphs: PathBuf,
    pub encodings: PathBuf,
    pub graphs_fnv1a: String,
    pub encodings_fnv1a: String,
    pub val_frac: f64,
    pub test_frac: f64,
}

/// Optimizer and scheduler settings, captured verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub lr: f64,
    pub patience: usize,
    pub factor: f64,
    pub floor: f64,
    pub max_epochs: usize,
    pub monitor: String,
    pub exec: String,
}

/// File names inside the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactSection {
    pub checkpoint: String,
    pub metrics: String,
}

impl Default for ArtifactSection {
    fn default() -> Self {
        ArtifactSection { checkpoint: CHECKPOINT_PREFIX.into(), metrics: METRICS_FILE.into() }
    }
}

/// Everything needed to replay one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub name: String,
    pub seed: u64,
    pub data: DataSection,
    /// Fully-resolved model; `model.seed` always equals `seed`.
    pub model: ModelConfig,
    /// Present only when the requested hidden width was substituted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requested_d_hidden: Option<usize>,
    pub train: TrainSection,
    pub artifacts: ArtifactSection,
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, self.render())
            .map_err(|source| CliError::File { path: path.clone(), source })?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<RunManifest, CliError> {
        let bytes = std::fs::read(path)
            .map_err(|source| CliError::File { path: path.to_path_buf(), source })?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::Manifest {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }

    /// Recomputes both dataset checksums and fails on any drift.
    pub fn verify_checksums(&self) -> Result<(), CliError> {
        for (path, recorded) in [
            (&self.data.graphs, &self.data.graphs_fnv1a),
            (&self.data.encodings, &self.data.encodings_fnv1a),
        ] {
            let actual = file_checksum(path)?;
            if actual != *recorded {
                return Err(CliError::ChecksumMismatch {
                    path: path.clone(),
                    recorded: recorded.clone(),
                    actual,
                });
            }
        }
        Ok(())
    }
}

/// FNV-1a over the raw bytes, rendered as fixed-width hex.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn file_checksum(path: &Path) -> Result<String, CliError> {
    let bytes =
        std::fs::read(path).map_err(|source| CliError::File { path: path.to_path_buf(), source })?;
    Ok(format!("{:016x}", fnv1a64(&bytes)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use entangle::encoder::EncoderKind;
    use entangle::model::{Readout, Task};
    use entangle::mpnn::{LayerKind, Regime};

    fn sample() -> RunManifest {
        RunManifest {
            name: "demo".into(),
            seed: 7,
            data: DataSection {
                name: "mult".into(),
                graphs: "data/mult.jsonl".into(),
                encodings: "data/mult.rw.jsonl".into(),
                graphs_fnv1a: "00bc614e00000000".into(),
                encodings_fnv1a: "00000000deadbeef".into(),
                val_frac: 0.1,
                test_frac: 0.1,
            },
            model: ModelConfig {
                encoder: EncoderKind::Tensor,
                joint: true,
                mlp_depth: 1,
                d_in: 2,
                k: 4,
                d_hidden: 16,
                layer: LayerKind::Sage,
                regime: Regime::Sparse { k: 1 },
                layers: 1,
                epsilon: 0.0,
                decoder_hidden: 16,
                readout: Readout::Sum,
                task: Task::Regression { dim: 1 },
                seed: 7,
            },
            requested_d_hidden: Some(17),
            train: TrainSection {
                lr: 1e-3,
                patience: 25,
                factor: 0.5,
                floor: 1e-5,
                max_epochs: 100,
                monitor: "validation".into(),
                exec: "parallel".into(),
            },
            artifacts: ArtifactSection::default(),
        }
    }

    #[test]
    fn render_parse_is_identity() {
        let m = sample();
        let text = m.render();
        let back: RunManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.render(), text);
    }

    #[test]
    fn unknown_manifest_field_is_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&sample().render()).unwrap();
        v.as_object_mut().unwrap().insert("extra".into(), 1.into());
        let err = serde_json::from_value::<RunManifest>(v).unwrap_err();
        assert!(err.to_string().contains("extra"), "{err}");
    }

    #[test]
    fn fnv_matches_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn checksum_mismatch_names_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let graphs = dir.path().join("g.jsonl");
        let encodings = dir.path().join("e.jsonl");
        std::fs::write(&graphs, b"{}\n").unwrap();
        std::fs::write(&encodings, b"{}\n").unwrap();

        let mut m = sample();
        m.data.graphs = graphs.clone();
        m.data.encodings = encodings.clone();
        m.data.graphs_fnv1a = file_checksum(&graphs).unwrap();
        m.data.encodings_fnv1a = file_checksum(&encodings).unwrap();
        m.verify_checksums().unwrap();

        std::fs::write(&graphs, b"{\"n\":1}\n").unwrap();
        let err = m.verify_checksums().unwrap_err();
        assert!(err.to_string().contains("g.jsonl"), "{err}");
    }
}
