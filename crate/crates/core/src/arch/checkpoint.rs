//! Binary checkpoint format.
//!
//! ```text
//! "HTMT1"                      5 bytes magic
//! manifest length              u32 little-endian
//! manifest                     UTF-8 JSON (mode, encoder spec, taxonomy hash, shapes)
//! parameters                   f64 little-endian, tensors in declaration order
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{ArchitectureMode, DropoutPlacement, MtlNetwork, NetworkSpec, TaxonomyBinding};
use crate::encoder::EncoderSpec;
use crate::error::{Error, Result};
use crate::nn::Parameterized;

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"HTMT1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub mode: ArchitectureMode,
    pub encoder: EncoderSpec,
    pub dropout: f64,
    pub dropout_placement: DropoutPlacement,
    pub cascade_logit_dropout: bool,
    pub num_makes: usize,
    pub num_models: usize,
    /// Hex string; JSON numbers cannot carry a full u64 portably.
    pub taxonomy_hash: String,
    pub param_shapes: Vec<Vec<usize>>,
}

impl MtlNetwork {
    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let spec = self.spec();
        let manifest = CheckpointManifest {
            mode: spec.mode,
            encoder: spec.encoder.clone(),
            dropout: spec.dropout,
            dropout_placement: spec.dropout_placement,
            cascade_logit_dropout: spec.cascade_logit_dropout,
            num_makes: self.num_makes(),
            num_models: self.num_models(),
            taxonomy_hash: format!("{:016x}", self.taxonomy_hash()),
            param_shapes: self.params().iter().map(|t| t.shape().to_vec()).collect(),
        };
        let json = serde_json::to_vec(&manifest).expect("manifest serializes");
        let mut out = Vec::with_capacity(9 + json.len() + 8 * self.parameter_count());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for t in self.params() {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::Checkpoint(msg.to_string());
        if bytes.len() < 9 || &bytes[..5] != CHECKPOINT_MAGIC {
            return Err(bad("missing HTMT1 magic"));
        }
        let len = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
        let json = bytes.get(9..9 + len).ok_or_else(|| bad("truncated manifest"))?;
        let manifest: CheckpointManifest = serde_json::from_slice(json)?;
        let hash = u64::from_str_radix(&manifest.taxonomy_hash, 16).map_err(|_| bad("bad taxonomy hash"))?;

        let spec = NetworkSpec {
            encoder: manifest.encoder,
            mode: manifest.mode,
            dropout: manifest.dropout,
            dropout_placement: manifest.dropout_placement,
            cascade_logit_dropout: manifest.cascade_logit_dropout,
            taxonomy: Some(TaxonomyBinding {
                num_makes: manifest.num_makes,
                num_models: manifest.num_models,
                hash,
            }),
        };
        let mut net = spec.build(0)?;
        let mut payload = &bytes[9 + len..];
        let mut params = net.params_mut();
        if params.len() != manifest.param_shapes.len() {
            return Err(bad("parameter tensor count does not match the architecture"));
        }
        for (p, shape) in params.iter_mut().zip(&manifest.param_shapes) {
            if p.shape() != shape.as_slice() {
                return Err(bad("parameter shape does not match the architecture"));
            }
            let n = p.len() * 8;
            if payload.len() < n {
                return Err(bad("truncated parameter data"));
            }
            for (v, chunk) in p.data_mut().iter_mut().zip(payload[..n].chunks_exact(8)) {
                *v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
            }
            payload = &payload[n..];
        }
        if !payload.is_empty() {
            return Err(bad("trailing bytes after parameters"));
        }
        Ok(net)
    }
}

pub fn save_checkpoint(net: &MtlNetwork, path: &Path) -> Result<()> {
    std::fs::write(path, net.to_checkpoint_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<MtlNetwork> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    MtlNetwork::from_checkpoint_bytes(&bytes)
}
