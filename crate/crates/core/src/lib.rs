//! Skellam latent distance models for signed weighted networks.
//!
//! The crate covers the whole pipeline: edge-list ingestion and hold-out
//! splits ([`graph`]), the Skellam likelihood ([`skellam`]), free and
//! archetypal parameterizations ([`model`]), Adam fitting on node blocks
//! ([`optim`]), spectral initialization ([`init`]), synthetic networks
//! ([`generate`]), link-prediction scoring ([`eval`]) and layout export
//! ([`viz`]).

pub mod checkpoint;
pub mod error;
pub mod eval;
pub mod generate;
pub mod graph;
pub mod init;
pub mod model;
pub mod optim;
pub mod skellam;
pub mod tensor;
pub mod viz;

pub use error::{Error, ErrorClass, Result};
pub use graph::SignedGraph;
pub use model::{ModelKind, Params, Topology, Variant};
