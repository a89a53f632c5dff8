//! Parameter-free, deterministic compression of vision-transformer patch
//! tokens guided by token-level correlation.
//!
//! For each sub-image of a high-resolution document the crate
//!
//! 1. measures *information density* from how many near-duplicate keys each
//!    patch has ([`density`]),
//! 2. keeps the upper IQR outliers of deep-layer CLS attention and samples
//!    `round(d * N)` further tokens from low-layer CLS attention
//!    ([`selection`]),
//! 3. folds each retained token's nearest neighbours into it with an
//!    attention-weighted sum ([`aggregation`]).
//!
//! [`pipeline`] ties the steps together and [`corpus`] summarizes the
//! resulting compression ratios. The crate is `no_std` and needs only
//! `alloc`.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod aggregation;
pub mod corpus;
pub mod density;
pub mod error;
pub mod matrix;
pub mod pipeline;
pub mod selection;
pub mod stats;

pub use aggregation::{aggregate, AggregationConfig, KeyLayer};
pub use corpus::{corpus_stats, corpus_stats_from_ratios, CorpusStats, DatasetStats};
pub use density::{compute_density, DensityConfig, DensityReport};
pub use error::{Error, Result};
pub use matrix::{
    normalize_rows, similarity_matrix, AttentionVector, KeyMatrix, SimilarityMatrix, TokenMatrix,
};
pub use pipeline::{
    compress_document, compress_subimage, CompressionConfig, CompressionResult, DocumentEntry,
    GridShape, Provenance, SubImageBundle,
};
pub use selection::{
    global_select, local_sample_count, local_select, merge_indices, SelectionConfig,
    SelectionResult,
};
pub use stats::{quantile, FiveNumberSummary, QuantileMethod};
