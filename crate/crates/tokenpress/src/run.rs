//! End-to-end runs: load a manifest, compress, write a results directory.

use std::path::Path;

use log::info;
use rayon::prelude::*;
use tokenpress_core::pipeline::{compress_document_entry, compress_with_selection, find_global};
use tokenpress_core::selection::sampler_rng;
use tokenpress_core::{compute_density, CompressionConfig, DocumentEntry, SubImageBundle};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::harness::{baseline_select, BaselineMethod};
use crate::manifest::{load_bundle, Document};
use crate::output::{write_results, MethodInfo, ResultsIndex};

/// Compresses every bundle on the rayon pool. Bundle `i` samples from
/// stream `i`, so the output equals the sequential
/// [`tokenpress_core::compress_document`] regardless of scheduling.
pub fn compress_document_parallel(
    bundles: &[SubImageBundle],
    cfg: &CompressionConfig,
) -> Result<Vec<DocumentEntry>> {
    find_global(bundles).map_err(|e| Error::core("document", e))?;
    cfg.validate().map_err(|e| Error::core("config", e))?;
    bundles
        .par_iter()
        .enumerate()
        .map(|(i, b)| {
            compress_document_entry(i, b, cfg).map_err(|e| Error::core(format!("sub-image {i}"), e))
        })
        .collect()
}

fn summarize(index: &ResultsIndex) {
    for e in &index.entries {
        info!(
            "{}: {} -> {} tokens (ratio {:.4})",
            e.id, e.n_tokens, e.n_retained, e.ratio
        );
    }
}

/// Adaptive compression of a whole manifest into `out_dir`.
pub fn run_compress(manifest: &Path, out_dir: &Path, cfg: &RunConfig) -> Result<ResultsIndex> {
    let doc = load_bundle(manifest)?;
    let outputs = compress_document_parallel(&doc.bundles, &cfg.to_core())?;
    let index = write_results(out_dir, &doc, &outputs, &MethodInfo::adaptive(), cfg)?;
    summarize(&index);
    Ok(index)
}

/// Baseline selection followed by the usual aggregation. Bundle `i` draws
/// from stream `i` of the configured seed.
pub fn baseline_document(
    doc: &Document,
    method: BaselineMethod,
    cfg: &RunConfig,
) -> Result<Vec<DocumentEntry>> {
    let core = cfg.to_core();
    core.validate().map_err(|e| Error::core("config", e))?;
    doc.bundles
        .par_iter()
        .enumerate()
        .map(|(i, b)| {
            if b.is_global() {
                return Ok(DocumentEntry::Global(b.y_last().clone()));
            }
            let mut rng = sampler_rng(core.selection.seed, i as u64);
            let (selection, m) =
                baseline_select(method, b, &core.density, &core.selection, &mut rng)?;
            let density = compute_density(b.keys_low(), &core.density)
                .map_err(|e| Error::core("density", e))?;
            compress_with_selection(b, &core, density, selection, m, i as u64)
                .map(DocumentEntry::Compressed)
                .map_err(|e| Error::core(format!("sub-image {i}"), e))
        })
        .collect()
}

pub fn run_baseline(
    manifest: &Path,
    out_dir: &Path,
    method: BaselineMethod,
    cfg: &RunConfig,
) -> Result<ResultsIndex> {
    let doc = load_bundle(manifest)?;
    let outputs = baseline_document(&doc, method, cfg)?;
    let info = MethodInfo {
        name: method.name().into(),
        ratio: match method {
            BaselineMethod::FixedRatio(r) => Some(r),
            _ => None,
        },
    };
    let index = write_results(out_dir, &doc, &outputs, &info, cfg)?;
    summarize(&index);
    Ok(index)
}
