//! Versioned JSON format for network parameters.
//!
//! ```json
//! {"format": "sail-nn", "version": 1, "model": "policy",
//!  "layers": [{"kind": "Dense", "inputs": 4, "outputs": 32}, ...],
//!  "params": [{"name": "policy.hidden0.weight", "shape": [4, 32],
//!              "trainable": true, "values": [...]}, ...]}
//! ```
//!
//! Values are written as 64-bit floats with shortest round-trip formatting,
//! so `f64` parameters reload bit-exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layers::LayerConfig;
use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const FORMAT_NAME: &str = "sail-nn";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub trainable: bool,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub model: String,
    pub layers: Vec<LayerConfig>,
    pub params: Vec<ParamRecord>,
}

impl ModelFile {
    pub fn capture<T: Scalar>(
        model: &str,
        layers: Vec<LayerConfig>,
        store: &ParamStore<T>,
        ids: &[ParamId],
    ) -> Self {
        let params = ids
            .iter()
            .map(|&id| {
                let p = store.get(id);
                ParamRecord {
                    name: p.name.clone(),
                    shape: p.tensor.shape().to_vec(),
                    trainable: p.trainable,
                    values: p.tensor.data().iter().map(|v| v.as_f64()).collect(),
                }
            })
            .collect();
        ModelFile {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            model: model.into(),
            layers,
            params,
        }
    }

    /// Copies the recorded values into `ids`, checking names and shapes.
    pub fn restore<T: Scalar>(&self, store: &mut ParamStore<T>, ids: &[ParamId]) -> Result<()> {
        if ids.len() != self.params.len() {
            return Err(Error::Validation(format!(
                "model `{}` stores {} parameters, expected {}",
                self.model,
                self.params.len(),
                ids.len()
            )));
        }
        for (&id, rec) in ids.iter().zip(&self.params) {
            let p = store.get(id);
            if p.name != rec.name || p.tensor.shape() != rec.shape.as_slice() {
                return Err(Error::Validation(format!(
                    "parameter `{}` {:?} does not match `{}` {:?}",
                    rec.name,
                    rec.shape,
                    p.name,
                    p.tensor.shape()
                )));
            }
            let data = rec.values.iter().map(|&v| T::lit(v)).collect();
            let tensor = Tensor::new(rec.shape.clone(), data)?;
            store.set_value(id, tensor);
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model file serializes")
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if file.format != FORMAT_NAME || file.version != FORMAT_VERSION {
            return Err(Error::Validation(format!(
                "unsupported model format {} v{}",
                file.format, file.version
            )));
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}
