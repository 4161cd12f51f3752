//! Binary checkpoint: magic, version, `(D, H, G, K, G')` header, then every
//! parameter tensor row-major as little-endian f64. A JSON manifest sits
//! next to it.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::baseline::{BaselineParams, BASELINE_HIDDEN};
use super::model::{NetworkDims, NetworkParams};
use super::train::{TrainConfig, TrainHistory};
use super::Parameters;
use crate::encoder::{sidecar_path, ByteCursor, EncoderConfig};
use crate::error::{Error, Result};
use crate::io;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CHARIENN";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub network: NetworkParams,
    /// The n-gram baseline, when one was trained. Its input is `g`
    /// followed by `G'` entity n-gram buckets.
    pub baseline: Option<BaselineParams>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub dims: NetworkDims,
    pub ngram_dim: usize,
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    pub history: TrainHistory,
    pub baseline_history: Option<TrainHistory>,
}

impl Checkpoint {
    fn ngram_dim(&self) -> usize {
        self.baseline
            .as_ref()
            .map_or(0, |b| b.input_dim() - self.network.dims().global_dim)
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint, manifest: &CheckpointManifest) -> Result<()> {
    let dims = ckpt.network.dims();
    if let Some(b) = &ckpt.baseline {
        if b.input_dim() < dims.global_dim || b.hidden.output_dim() != BASELINE_HIDDEN {
            return Err(Error::dim("baseline input", dims.global_dim, b.input_dim()));
        }
    }
    let mut w = io::create(path)?;
    let err = |e| Error::io(path, e);
    w.write_all(CHECKPOINT_MAGIC).map_err(err)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes()).map_err(err)?;
    let header = [
        dims.input_dim,
        dims.hidden,
        dims.global_dim,
        dims.global_hidden,
        ckpt.ngram_dim(),
    ];
    for d in header {
        w.write_all(&(d as u32).to_le_bytes()).map_err(err)?;
    }
    let mut tensors = ckpt.network.tensors();
    if let Some(b) = &ckpt.baseline {
        tensors.extend(b.tensors());
    }
    for t in tensors {
        for v in t {
            w.write_all(&v.to_le_bytes()).map_err(err)?;
        }
    }
    w.flush().map_err(err)?;
    io::write_json(&sidecar_path(path), manifest)
}

pub fn load_checkpoint(path: &Path) -> Result<(Checkpoint, CheckpointManifest)> {
    let mut bytes = Vec::new();
    io::open(path)?.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    let mut cur = ByteCursor { bytes: &bytes, pos: 0 };
    let bad = |detail: String| Error::Format {
        what: "checkpoint",
        detail,
    };
    if cur.take(8)? != CHECKPOINT_MAGIC {
        return Err(bad(format!("{}: bad magic", path.display())));
    }
    let version = cur.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let mut header = [0usize; 5];
    for h in header.iter_mut() {
        *h = cur.u32()? as usize;
    }
    let [input_dim, hidden, global_dim, global_hidden, ngram_dim] = header;
    let mut network = NetworkParams::zeros(NetworkDims {
        input_dim,
        hidden,
        global_dim,
        global_hidden,
    });
    let mut baseline = (ngram_dim > 0).then(|| BaselineParams::zeros(global_dim + ngram_dim, BASELINE_HIDDEN));
    for t in network.tensors_mut() {
        t.copy_from_slice(&cur.f64s(t.len())?);
    }
    if let Some(b) = baseline.as_mut() {
        for t in b.tensors_mut() {
            t.copy_from_slice(&cur.f64s(t.len())?);
        }
    }
    if cur.pos != bytes.len() {
        return Err(bad(format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    let manifest: CheckpointManifest = io::read_json(&sidecar_path(path))?;
    if manifest.dims != network.dims() {
        return Err(bad("manifest dimensions disagree with the binary header".into()));
    }
    Ok((Checkpoint { network, baseline }, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_layout() {
        let dims = NetworkDims {
            input_dim: 5,
            hidden: 3,
            global_dim: 8,
            global_hidden: 2,
        };
        let net = NetworkParams::init(dims, 0.1, 3);
        let base = BaselineParams::init(8 + 4, BASELINE_HIDDEN, 0.1, 4);
        let ckpt = Checkpoint {
            network: net.clone(),
            baseline: Some(base.clone()),
        };
        let manifest = CheckpointManifest {
            format_version: CHECKPOINT_VERSION,
            dims,
            ngram_dim: 4,
            encoder: EncoderConfig::default(),
            train: TrainConfig::default(),
            history: TrainHistory::default(),
            baseline_history: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_checkpoint(&path, &ckpt, &manifest).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..8], CHECKPOINT_MAGIC);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 5);
        assert_eq!(u32::from_le_bytes(bytes[28..32].try_into().unwrap()), 4);
        let n = net.num_parameters() + base.num_parameters();
        assert_eq!(bytes.len(), 8 + 4 + 20 + 8 * n);
        // first tensor value is W_lstm[0, 0]
        assert_eq!(f64::from_le_bytes(bytes[32..40].try_into().unwrap()), net.lstm.weight.data[0]);

        let (back, m) = load_checkpoint(&path).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(m, manifest);
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        std::fs::write(&path, b"NOTACKPT\x01\x00\x00\x00").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Format { .. })));
    }
}
