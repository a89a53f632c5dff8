//! Results directories and statistics documents.
//!
//! ```text
//! <out>/results.json        run index: method, effective config, entries
//! <out>/<id>/tokens.tkzt    compressed tokens (global: untouched tokens)
//! <out>/<id>/meta.json      density, ratio, branch counts, indices, mask
//! ```
//!
//! JSON keys are emitted in struct declaration order, so identical runs
//! produce identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokenpress_core::corpus::{HISTOGRAM_BINS, HISTOGRAM_BIN_WIDTH};
use tokenpress_core::{CompressionResult, CorpusStats, DatasetStats, DocumentEntry, TokenMatrix};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::manifest::{Document, SubImageEntry};
use crate::tensor::Tensor;

pub const RESULTS_FORMAT: &str = "tokenpress-results";
pub const RESULTS_VERSION: u32 = 1;
pub const RESULTS_FILE: &str = "results.json";
/// How each sub-image's sampling stream is chosen.
pub const STREAM_RULE: &str = "chacha8(seed), stream = bundle index in manifest order";

/// Which selector produced a results directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodInfo {
    pub name: String,
    /// Fixed sampling ratio, for the `fixed` baseline only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
}

impl MethodInfo {
    pub fn adaptive() -> Self {
        MethodInfo {
            name: "adaptive".into(),
            ratio: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsIndex {
    pub format: String,
    pub version: u32,
    pub method: MethodInfo,
    pub config: RunConfig,
    pub stream_rule: String,
    pub entries: Vec<IndexEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub dataset: String,
    pub is_global: bool,
    pub n_tokens: usize,
    pub n_retained: usize,
    pub ratio: f64,
    pub tokens: PathBuf,
    pub meta: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityMeta {
    pub n_redundant: usize,
    pub redundancy: f64,
    pub density: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchCountsMeta {
    pub global: usize,
    pub local: usize,
    pub both: usize,
    pub fallback: usize,
}

/// Compression details of one non-global sub-image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionMeta {
    pub density: DensityMeta,
    pub sampled_count: usize,
    pub stream: u64,
    pub branch_counts: BranchCountsMeta,
    pub global_indices: Vec<usize>,
    pub local_indices: Vec<usize>,
    pub fallback_indices: Vec<usize>,
    pub retained_indices: Vec<usize>,
    /// Parallel to `retained_indices`.
    pub provenance: Vec<String>,
    /// 1 for redundant tokens, in token order.
    pub redundant_mask: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryMeta {
    pub id: String,
    pub dataset: String,
    pub image_id: String,
    pub crop: [u32; 2],
    pub grid: [usize; 2],
    pub is_global: bool,
    pub method: MethodInfo,
    pub n_tokens: usize,
    pub n_retained: usize,
    pub ratio: f64,
    /// Absent for the global image, which is never compressed.
    pub compression: Option<CompressionMeta>,
    pub config: RunConfig,
}

fn compression_meta(r: &CompressionResult) -> CompressionMeta {
    let c = r.branch_counts();
    CompressionMeta {
        density: DensityMeta {
            n_redundant: r.density_report.n_redundant,
            redundancy: r.density_report.redundancy,
            density: r.density_report.density,
        },
        sampled_count: r.sampled_count,
        stream: r.stream,
        branch_counts: BranchCountsMeta {
            global: c.global,
            local: c.local,
            both: c.both,
            fallback: c.fallback,
        },
        global_indices: r.selection.global_indices.clone(),
        local_indices: r.selection.local_indices.clone(),
        fallback_indices: r.selection.fallback_indices.clone(),
        retained_indices: r.retained_indices.clone(),
        provenance: r
            .provenance
            .iter()
            .map(|p| p.as_str().to_string())
            .collect(),
        redundant_mask: r
            .density_report
            .redundant_mask
            .iter()
            .map(|&b| u8::from(b))
            .collect(),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data always serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}

fn tokens_tensor(m: &TokenMatrix) -> Tensor {
    Tensor::matrix(m.rows(), m.cols(), m.to_f32_vec())
}

fn entry_meta(
    e: &SubImageEntry,
    out: &DocumentEntry,
    n_tokens: usize,
    method: &MethodInfo,
    cfg: &RunConfig,
) -> EntryMeta {
    let compression = match out {
        DocumentEntry::Global(_) => None,
        DocumentEntry::Compressed(r) => Some(compression_meta(r)),
    };
    let n_retained = out.tokens().rows();
    EntryMeta {
        id: e.id.clone(),
        dataset: e.dataset.clone(),
        image_id: e.image_id.clone(),
        crop: e.crop,
        grid: e.grid,
        is_global: e.is_global,
        method: method.clone(),
        n_tokens,
        n_retained,
        ratio: n_retained as f64 / n_tokens as f64,
        compression,
        config: *cfg,
    }
}

/// Writes a results directory for `outputs`, which must be parallel to the
/// document's bundles.
pub fn write_results(
    out_dir: &Path,
    doc: &Document,
    outputs: &[DocumentEntry],
    method: &MethodInfo,
    cfg: &RunConfig,
) -> Result<ResultsIndex> {
    assert_eq!(outputs.len(), doc.bundles.len(), "one output per bundle");
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut entries = Vec::with_capacity(outputs.len());
    for ((e, b), out) in doc.entries().zip(outputs) {
        let dir = out_dir.join(&e.id);
        let tokens = PathBuf::from(&e.id).join("tokens.tkzt");
        let meta_path = PathBuf::from(&e.id).join("meta.json");
        tokens_tensor(out.tokens()).write(&out_dir.join(&tokens))?;
        fs::create_dir_all(&dir).map_err(|err| Error::io(&dir, err))?;
        let meta = entry_meta(e, out, b.n_tokens(), method, cfg);
        write_json(&out_dir.join(&meta_path), &meta)?;
        entries.push(IndexEntry {
            id: e.id.clone(),
            dataset: e.dataset.clone(),
            is_global: e.is_global,
            n_tokens: meta.n_tokens,
            n_retained: meta.n_retained,
            ratio: meta.ratio,
            tokens,
            meta: meta_path,
        });
    }
    let index = ResultsIndex {
        format: RESULTS_FORMAT.into(),
        version: RESULTS_VERSION,
        method: method.clone(),
        config: *cfg,
        stream_rule: STREAM_RULE.into(),
        entries,
    };
    write_json(&out_dir.join(RESULTS_FILE), &index)?;
    Ok(index)
}

pub fn read_results(dir: &Path) -> Result<ResultsIndex> {
    let path = dir.join(RESULTS_FILE);
    let index: ResultsIndex = read_json(&path)?;
    if index.format != RESULTS_FORMAT || index.version != RESULTS_VERSION {
        return Err(Error::parse(
            &path,
            format!("not a {RESULTS_FORMAT} v{RESULTS_VERSION} document"),
        ));
    }
    Ok(index)
}

pub fn read_meta(dir: &Path, entry: &IndexEntry) -> Result<EntryMeta> {
    read_json(&dir.join(&entry.meta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStatsDoc {
    pub label: String,
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub histogram: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsDoc {
    pub histogram_bin_width: f64,
    pub datasets: Vec<DatasetStatsDoc>,
    pub overall: DatasetStatsDoc,
}

fn dataset_doc(d: &DatasetStats) -> DatasetStatsDoc {
    DatasetStatsDoc {
        label: d.label.clone(),
        count: d.ratios.len(),
        mean: d.mean,
        min: d.summary.min,
        q1: d.summary.q1,
        median: d.summary.median,
        q3: d.summary.q3,
        max: d.summary.max,
        histogram: d.histogram.to_vec(),
    }
}

impl StatsDoc {
    pub fn new(stats: &CorpusStats) -> Self {
        StatsDoc {
            histogram_bin_width: HISTOGRAM_BIN_WIDTH,
            datasets: stats.datasets.iter().map(dataset_doc).collect(),
            overall: dataset_doc(&stats.overall),
        }
    }

    fn all(&self) -> impl Iterator<Item = &DatasetStatsDoc> {
        self.datasets.iter().chain(std::iter::once(&self.overall))
    }

    /// One row per dataset plus `all`: label, count, five-number summary, mean.
    pub fn boxplot_csv(&self) -> String {
        let mut s = String::from("label,count,min,q1,median,q3,max,mean\n");
        for d in self.all() {
            s += &format!(
                "{},{},{},{},{},{},{},{}\n",
                d.label, d.count, d.min, d.q1, d.median, d.q3, d.max, d.mean
            );
        }
        s
    }

    /// Long format: one row per dataset and bin.
    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("label,bin_start,bin_end,count\n");
        for d in self.all() {
            for (b, c) in d.histogram.iter().enumerate() {
                let lo = b as f64 / HISTOGRAM_BINS as f64;
                let hi = (b + 1) as f64 / HISTOGRAM_BINS as f64;
                s += &format!("{},{lo},{hi},{c}\n", d.label);
            }
        }
        s
    }

    /// Writes `stats.json`, `boxplot.csv` and `histogram.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_json(&dir.join("stats.json"), self)?;
        let csv = |name: &str, body: String| {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::io(&p, e))
        };
        csv("boxplot.csv", self.boxplot_csv())?;
        csv("histogram.csv", self.histogram_csv())
    }
}
