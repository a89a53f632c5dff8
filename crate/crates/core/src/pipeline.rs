//! End-to-end compression of one sub-image and of a whole document.
//!
//! Per sub-image: density on low-layer keys, global branch on deep-layer
//! attention, local branch on low-layer attention, merge, then aggregation.
//! The resized global image of a document is passed through unchanged.

use alloc::vec::Vec;

use crate::aggregation::{aggregate, AggregationConfig, KeyLayer};
use crate::density::{compute_density, DensityConfig, DensityReport};
use crate::error::{Error, Result};
use crate::matrix::{AttentionVector, KeyMatrix, TokenMatrix};
use crate::selection::{
    global_select, local_sample_count, local_select_with, merge_indices, sampler_rng,
    SelectionConfig, SelectionResult,
};

/// Patch grid of a sub-image, `rows * cols = N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridShape {
    pub rows: usize,
    pub cols: usize,
}

impl GridShape {
    pub fn new(rows: usize, cols: usize) -> Self {
        GridShape { rows, cols }
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn check(&self, n_tokens: usize) -> Result<()> {
        if self.rows.checked_mul(self.cols) != Some(n_tokens) {
            return Err(Error::GridMismatch {
                rows: self.rows,
                cols: self.cols,
                n_tokens,
            });
        }
        Ok(())
    }
}

/// Every tensor the pipeline needs for one sub-image.
#[derive(Debug, Clone, PartialEq)]
pub struct SubImageBundle {
    y_last: TokenMatrix,
    keys_low: KeyMatrix,
    attn_low: AttentionVector,
    keys_deep: KeyMatrix,
    attn_deep: AttentionVector,
    grid: GridShape,
    is_global: bool,
}

impl SubImageBundle {
    pub fn new(
        y_last: TokenMatrix,
        keys_low: KeyMatrix,
        attn_low: AttentionVector,
        keys_deep: KeyMatrix,
        attn_deep: AttentionVector,
        grid: GridShape,
        is_global: bool,
    ) -> Result<Self> {
        let n = y_last.rows();
        for (what, found) in [
            ("keys_low rows", keys_low.rows()),
            ("attn_low length", attn_low.len()),
            ("keys_deep rows", keys_deep.rows()),
            ("attn_deep length", attn_deep.len()),
        ] {
            if found != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    found,
                });
            }
        }
        grid.check(n)?;
        Ok(SubImageBundle {
            y_last,
            keys_low,
            attn_low,
            keys_deep,
            attn_deep,
            grid,
            is_global,
        })
    }

    pub fn n_tokens(&self) -> usize {
        self.y_last.rows()
    }

    pub fn y_last(&self) -> &TokenMatrix {
        &self.y_last
    }

    pub fn keys_low(&self) -> &KeyMatrix {
        &self.keys_low
    }

    pub fn attn_low(&self) -> &AttentionVector {
        &self.attn_low
    }

    pub fn keys_deep(&self) -> &KeyMatrix {
        &self.keys_deep
    }

    pub fn attn_deep(&self) -> &AttentionVector {
        &self.attn_deep
    }

    pub fn grid(&self) -> GridShape {
        self.grid
    }

    pub fn is_global(&self) -> bool {
        self.is_global
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CompressionConfig {
    pub density: DensityConfig,
    pub selection: SelectionConfig,
    pub aggregation: AggregationConfig,
}

impl CompressionConfig {
    pub fn validate(&self) -> Result<()> {
        self.density.validate()?;
        self.selection.validate()
    }
}

/// Why a retained token was kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Global,
    Local,
    Both,
    Fallback,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Global => "global",
            Provenance::Local => "local",
            Provenance::Both => "both",
            Provenance::Fallback => "fallback",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BranchCounts {
    pub global: usize,
    pub local: usize,
    pub both: usize,
    pub fallback: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressionResult {
    /// Sorted retained indices `L`.
    pub retained_indices: Vec<usize>,
    /// One row per entry of `retained_indices`.
    pub compressed_tokens: TokenMatrix,
    pub density_report: DensityReport,
    pub selection: SelectionResult,
    /// Parallel to `retained_indices`.
    pub provenance: Vec<Provenance>,
    /// Local-branch sample size `m`.
    pub sampled_count: usize,
    pub n_tokens: usize,
    pub ratio: f64,
    /// Generator stream the local branch drew from.
    pub stream: u64,
}

impl CompressionResult {
    pub fn n_retained(&self) -> usize {
        self.retained_indices.len()
    }

    pub fn branch_counts(&self) -> BranchCounts {
        let mut c = BranchCounts::default();
        for p in &self.provenance {
            match p {
                Provenance::Global => c.global += 1,
                Provenance::Local => c.local += 1,
                Provenance::Both => c.both += 1,
                Provenance::Fallback => c.fallback += 1,
            }
        }
        c
    }
}

/// Tags each merged index by which branch produced it.
pub fn provenance_of(selection: &SelectionResult) -> Vec<Provenance> {
    selection
        .merged_indices
        .iter()
        .map(|i| {
            let g = selection.global_indices.binary_search(i).is_ok();
            let l = selection.local_indices.binary_search(i).is_ok();
            match (g, l) {
                (true, true) => Provenance::Both,
                (true, false) => Provenance::Global,
                (false, true) => Provenance::Local,
                (false, false) => Provenance::Fallback,
            }
        })
        .collect()
}

/// Compresses one sub-image using generator stream 0.
pub fn compress_subimage(
    bundle: &SubImageBundle,
    cfg: &CompressionConfig,
) -> Result<CompressionResult> {
    compress_subimage_stream(bundle, cfg, 0)
}

pub fn compress_subimage_stream(
    bundle: &SubImageBundle,
    cfg: &CompressionConfig,
    stream: u64,
) -> Result<CompressionResult> {
    if bundle.is_global {
        return Err(Error::GlobalImageRejected);
    }
    cfg.validate()?;
    let n = bundle.n_tokens();

    let density_report = compute_density(&bundle.keys_low, &cfg.density)?;
    let global = global_select(&bundle.attn_deep, &cfg.selection)?;
    let m = local_sample_count(density_report.density, n);
    let mut rng = sampler_rng(cfg.selection.seed, stream);
    let local = local_select_with(&bundle.attn_low, m, &mut rng)?;
    let selection = merge_indices(&global, &local, &bundle.attn_low, &cfg.selection)?;

    finish(bundle, cfg, density_report, selection, m, stream)
}

/// Aggregates an externally chosen selection into a [`CompressionResult`].
/// Used for baselines so they share the output shape of the adaptive path.
pub fn compress_with_selection(
    bundle: &SubImageBundle,
    cfg: &CompressionConfig,
    density_report: DensityReport,
    selection: SelectionResult,
    sampled_count: usize,
    stream: u64,
) -> Result<CompressionResult> {
    if bundle.is_global {
        return Err(Error::GlobalImageRejected);
    }
    finish(
        bundle,
        cfg,
        density_report,
        selection,
        sampled_count,
        stream,
    )
}

fn finish(
    bundle: &SubImageBundle,
    cfg: &CompressionConfig,
    density_report: DensityReport,
    selection: SelectionResult,
    sampled_count: usize,
    stream: u64,
) -> Result<CompressionResult> {
    let n = bundle.n_tokens();
    let keys = match cfg.aggregation.key_layer {
        KeyLayer::Deep => &bundle.keys_deep,
        KeyLayer::Low => &bundle.keys_low,
    };
    let weights = bundle.attn_deep.normalized();
    let compressed_tokens = aggregate(
        &bundle.y_last,
        keys,
        &weights,
        &selection.merged_indices,
        &cfg.aggregation,
    )?;
    let provenance = provenance_of(&selection);
    let retained_indices = selection.merged_indices.clone();
    Ok(CompressionResult {
        ratio: retained_indices.len() as f64 / n as f64,
        retained_indices,
        compressed_tokens,
        density_report,
        selection,
        provenance,
        sampled_count,
        n_tokens: n,
        stream,
    })
}

/// Output for one input bundle of a document.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum DocumentEntry {
    /// The global image, tokens untouched.
    Global(TokenMatrix),
    Compressed(CompressionResult),
}

impl DocumentEntry {
    pub fn tokens(&self) -> &TokenMatrix {
        match self {
            DocumentEntry::Global(t) => t,
            DocumentEntry::Compressed(r) => &r.compressed_tokens,
        }
    }
}

/// Index of the single global bundle, if any.
pub fn find_global(bundles: &[SubImageBundle]) -> Result<Option<usize>> {
    let mut found = None;
    for (i, b) in bundles.iter().enumerate() {
        if b.is_global {
            if let Some(first) = found {
                return Err(Error::MultipleGlobalImages { first, second: i });
            }
            found = Some(i);
        }
    }
    Ok(found)
}

/// Compresses bundle `index` of a document. Bundle `i` always samples from
/// stream `i`, so results do not depend on evaluation order.
pub fn compress_document_entry(
    index: usize,
    bundle: &SubImageBundle,
    cfg: &CompressionConfig,
) -> Result<DocumentEntry> {
    if bundle.is_global {
        Ok(DocumentEntry::Global(bundle.y_last.clone()))
    } else {
        compress_subimage_stream(bundle, cfg, index as u64).map(DocumentEntry::Compressed)
    }
}

pub fn compress_document(
    bundles: &[SubImageBundle],
    cfg: &CompressionConfig,
) -> Result<Vec<DocumentEntry>> {
    find_global(bundles)?;
    bundles
        .iter()
        .enumerate()
        .map(|(i, b)| compress_document_entry(i, b, cfg))
        .collect()
}
