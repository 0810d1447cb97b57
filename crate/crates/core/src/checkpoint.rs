//! Versioned JSON container for fitted parameters.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Latent, ModelKind, Params, Variant};
use crate::optim::TrainConfig;

pub const FORMAT: &str = "sldm-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Column-major values.
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub variant: Variant,
    pub config: TrainConfig,
    pub seed: u64,
    pub n_nodes: usize,
    pub k: usize,
    /// Original node identifiers, by index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn new(params: &Params, config: &TrainConfig, labels: Option<Vec<String>>) -> Self {
        Self {
            format: FORMAT.to_string(),
            version: FORMAT_VERSION,
            variant: params.variant(),
            config: config.clone(),
            seed: config.seed,
            n_nodes: params.n_nodes(),
            k: params.k(),
            labels,
            tensors: params
                .tensors()
                .into_iter()
                .map(|t| NamedTensor {
                    name: t.name.to_string(),
                    rows: t.rows,
                    cols: t.cols,
                    data: t.data.to_vec(),
                })
                .collect(),
        }
    }

    fn tensor(&self, name: &str, rows: usize, cols: usize) -> Result<&NamedTensor> {
        let t = self
            .tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{name}`")))?;
        if t.rows != rows || t.cols != cols || t.data.len() != rows * cols {
            return Err(Error::Checkpoint(format!(
                "tensor `{name}` should be {rows}x{cols}, found {}x{} with {} values",
                t.rows,
                t.cols,
                t.data.len()
            )));
        }
        if t.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Checkpoint(format!("tensor `{name}` has non-finite values")));
        }
        Ok(t)
    }

    fn matrix(&self, name: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_column_slice(rows, cols, &self.tensor(name, rows, cols)?.data))
    }

    /// Rebuild and validate the parameters.
    pub fn params(&self) -> Result<Params> {
        if self.format != FORMAT {
            return Err(Error::Checkpoint(format!("unknown format `{}`", self.format)));
        }
        if self.version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {} (expected {FORMAT_VERSION})",
                self.version
            )));
        }
        let (n, k) = (self.n_nodes, self.k);
        let v = self.variant;
        let roles = v.n_roles();
        let latent = match v.kind {
            ModelKind::Sldm => Latent::Free {
                positions: v
                    .role_names()
                    .iter()
                    .map(|r| self.matrix(r, k, n))
                    .collect::<Result<_>>()?,
            },
            ModelKind::Slim => Latent::Archetypal {
                basis: self.matrix("basis", k, k)?,
                logits: ["z_logits", "w_logits", "u_logits"][..roles]
                    .iter()
                    .map(|r| self.matrix(r, k, n))
                    .collect::<Result<_>>()?,
                gates: self.matrix("gates", k, roles * n)?,
            },
        };
        let effects = v
            .effect_names()
            .iter()
            .map(|e| Ok(DVector::from_column_slice(&self.tensor(e, n, 1)?.data)))
            .collect::<Result<_>>()?;
        if let Some(l) = &self.labels {
            if l.len() != n {
                return Err(Error::Checkpoint(format!("{} labels for {n} nodes", l.len())));
            }
        }
        Params::from_parts(v, latent, effects).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(out, self)?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        serde_json::from_reader(input).map_err(|e| Error::Checkpoint(format!("malformed checkpoint: {e}")))
    }
}
