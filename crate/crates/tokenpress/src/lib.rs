//! File formats, bundle loading, result serialization and the synthetic
//! validation harness around [`tokenpress_core`].
//!
//! A document is described by a TOML [`manifest`] that points at one
//! [`tensor`] file per exported tensor. [`run`] compresses a loaded
//! document in parallel and writes a self-describing results directory
//! ([`output`]); [`masks`] renders per-sub-image graymaps from it.

pub mod config;
pub mod error;
pub mod harness;
pub mod manifest;
pub mod masks;
pub mod output;
pub mod run;
pub mod tensor;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use manifest::{load_bundle, write_bundle, Document, ExportInfo, Manifest, SubImageEntry};
pub use run::{compress_document_parallel, run_baseline, run_compress};
pub use tensor::{FormatError, Tensor};
