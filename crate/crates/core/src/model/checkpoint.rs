use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::transmodality::TransModality;
use crate::autodiff::Tensor;
use crate::data::Modality;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "transmodality-checkpoint";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StoredTensor {
    name: String,
    shape: Vec<usize>,
    /// Base64 of little-endian f64 values.
    data: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    format: String,
    version: u32,
    config: ModelConfig,
    seed: u64,
    dims: BTreeMap<Modality, usize>,
    num_classes: usize,
    params: Vec<StoredTensor>,
}

fn encode(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|x| x.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

fn decode(name: &str, text: &str) -> Result<Vec<f64>> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| Error::Schema(format!("checkpoint tensor `{name}`: bad base64: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Schema(format!("checkpoint tensor `{name}` has {} bytes, not whole f64s", bytes.len())));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

impl TransModality {
    pub fn to_checkpoint_json(&self) -> Result<String> {
        let params = self
            .params
            .ids()
            .map(|id| {
                let t = self.params.get(id);
                StoredTensor { name: self.params.name(id).to_owned(), shape: t.shape().to_vec(), data: encode(t.data()) }
            })
            .collect();
        let ckpt = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: 1,
            config: self.config.clone(),
            seed: self.seed,
            dims: self.dims.clone(),
            num_classes: self.num_classes,
            params,
        };
        serde_json::to_string_pretty(&ckpt).map_err(|e| Error::json("serializing checkpoint", e))
    }

    pub fn from_checkpoint_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint =
            serde_json::from_str(text).map_err(|e| Error::Schema(format!("malformed checkpoint: {e}")))?;
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != 1 {
            return Err(Error::Schema(format!("unsupported checkpoint `{}` version {}", ckpt.format, ckpt.version)));
        }
        let mut model = TransModality::new(&ckpt.config, &ckpt.dims, ckpt.num_classes, ckpt.seed)?;
        if ckpt.params.len() != model.params.len() {
            return Err(Error::Schema(format!(
                "checkpoint has {} tensors, the configured model has {}",
                ckpt.params.len(),
                model.params.len()
            )));
        }
        for stored in ckpt.params {
            let id = model
                .params
                .find(&stored.name)
                .ok_or_else(|| Error::Schema(format!("checkpoint tensor `{}` is not a model parameter", stored.name)))?;
            let data = decode(&stored.name, &stored.data)?;
            let t = Tensor::new(stored.shape, data)
                .map_err(|e| Error::Schema(format!("checkpoint tensor `{}`: {e}", stored.name)))?;
            model.params.set(id, t).map_err(|e| Error::Schema(format!("checkpoint tensor `{}`: {e}", stored.name)))?;
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = self.to_checkpoint_json()?;
        fs::write(path, text + "\n").map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_checkpoint_json(&text)
    }
}
