//! Self-describing JSON checkpoints: named blocks with shapes plus string
//! metadata, under a format tag and version.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::param::ParamStore;
use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const FORMAT: &str = "rcqa-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub kind: String,
    pub meta: BTreeMap<String, String>,
    pub params: Vec<ParamBlock>,
}

impl Checkpoint {
    pub fn from_store<T: Scalar>(
        kind: &str,
        meta: BTreeMap<String, String>,
        store: &ParamStore<T>,
    ) -> Self {
        Checkpoint {
            format: FORMAT.to_string(),
            version: VERSION,
            kind: kind.to_string(),
            meta,
            params: store
                .iter()
                .map(|p| ParamBlock {
                    name: p.name.clone(),
                    shape: p.value.shape().to_vec(),
                    values: p.value.data().iter().map(|v| v.to_f64_lossy()).collect(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str, expected_kind: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        if ckpt.format != FORMAT {
            return Err(Error::invalid(format!(
                "not a checkpoint (format {:?})",
                ckpt.format
            )));
        }
        if ckpt.version != VERSION {
            return Err(Error::invalid(format!(
                "unsupported checkpoint version {} (expected {VERSION})",
                ckpt.version
            )));
        }
        if ckpt.kind != expected_kind {
            return Err(Error::invalid(format!(
                "checkpoint holds a {} model, expected {expected_kind}",
                ckpt.kind
            )));
        }
        for b in &ckpt.params {
            if b.shape.iter().product::<usize>() != b.values.len() {
                return Err(Error::invalid(format!(
                    "block {} declares shape {:?} but has {} values",
                    b.name,
                    b.shape,
                    b.values.len()
                )));
            }
        }
        Ok(ckpt)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path, expected_kind: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, expected_kind)
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::invalid(format!("checkpoint metadata lacks {key}")))
    }

    /// Copies every block into a store with the same layout, checking names
    /// and shapes.
    pub fn load_into<T: Scalar>(&self, store: &mut ParamStore<T>) -> Result<()> {
        if self.params.len() != store.len() {
            return Err(Error::invalid(format!(
                "checkpoint has {} blocks, model has {}",
                self.params.len(),
                store.len()
            )));
        }
        for block in &self.params {
            let id = store
                .find(&block.name)
                .ok_or_else(|| Error::invalid(format!("unknown block {}", block.name)))?;
            if store.value(id).shape() != block.shape.as_slice() {
                return Err(Error::ShapeMismatch {
                    op: "checkpoint",
                    left: block.shape.clone(),
                    right: store.value(id).shape().to_vec(),
                });
            }
            *store.value_mut(id) = Tensor::new(
                block.shape.clone(),
                block.values.iter().map(|&v| T::of(v)).collect(),
            )?;
        }
        Ok(())
    }
}
