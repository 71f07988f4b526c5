//! Parameter files.
//!
//! A parameter file is JSON with a fixed header and a list of tensors, each
//! giving its name, its shape, then its values in row-major order:
//!
//! ```json
//! { "format": "opd-params", "version": 1, "kind": "policy", "meta": {...},
//!   "tensors": [ { "name": "input.weight", "shape": [64, 27], "values": [...] } ] }
//! ```
//!
//! `meta` carries whatever the owning model needs to rebuild its shape.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Module;
use crate::error::{Error, Result};

pub const PARAM_FORMAT: &str = "opd-params";
pub const PARAM_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamFile {
    pub format: String,
    pub version: u32,
    pub kind: String,
    #[serde(default)]
    pub meta: serde_json::Value,
    pub tensors: Vec<TensorRecord>,
}

impl ParamFile {
    pub fn from_module<M: Module + ?Sized>(kind: &str, meta: serde_json::Value, module: &M) -> Self {
        Self {
            format: PARAM_FORMAT.into(),
            version: PARAM_VERSION,
            kind: kind.into(),
            meta,
            tensors: module
                .named_params()
                .into_iter()
                .map(|(name, p)| TensorRecord {
                    name,
                    shape: p.shape.clone(),
                    values: p.value.clone(),
                })
                .collect(),
        }
    }

    /// Copies tensor values into a module with the same names and shapes.
    pub fn load_into<M: Module + ?Sized>(&self, module: &mut M) -> Result<()> {
        let mut named = module.named_params_mut();
        if named.len() != self.tensors.len() {
            return Err(Error::shape(format!(
                "file has {} tensors, model expects {}",
                self.tensors.len(),
                named.len()
            )));
        }
        for ((name, p), rec) in named.iter_mut().zip(&self.tensors) {
            if *name != rec.name || p.shape != rec.shape || rec.values.len() != p.len() {
                return Err(Error::shape(format!(
                    "tensor {} {:?} does not match model tensor {name} {:?}",
                    rec.name, rec.shape, p.shape
                )));
            }
            if rec.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("tensor {} has non-finite values", rec.name)));
            }
            p.value.copy_from_slice(&rec.values);
            p.zero_grad();
        }
        Ok(())
    }

    pub fn check_header(&self, kind: &str) -> Result<()> {
        if self.format != PARAM_FORMAT || self.version != PARAM_VERSION {
            return Err(Error::Serde(format!(
                "unsupported parameter file {} v{}",
                self.format, self.version
            )));
        }
        if self.kind != kind {
            return Err(Error::Serde(format!("expected a {kind} file, found {}", self.kind)));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
