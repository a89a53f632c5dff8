//! Compression-ratio statistics over many sub-images, grouped by dataset.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::pipeline::CompressionResult;
use crate::stats::FiveNumberSummary;

pub const HISTOGRAM_BINS: usize = 20;
pub const HISTOGRAM_BIN_WIDTH: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub label: String,
    pub ratios: Vec<f64>,
    pub summary: FiveNumberSummary,
    pub mean: f64,
    /// Bin `b` counts ratios in `[0.05 b, 0.05 (b + 1))`; the last bin also
    /// holds 1.0.
    pub histogram: [u64; HISTOGRAM_BINS],
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    /// In order of first appearance of each label.
    pub datasets: Vec<DatasetStats>,
    /// All sub-images pooled.
    pub overall: DatasetStats,
}

pub fn histogram_bin(ratio: f64) -> usize {
    // 20 * r is exact for the multiples of 0.05 that can occur as n / N up to
    // a few ulps; the nudge keeps 0.35 = 7/20 in bin 7.
    let b = libm::floor(ratio.clamp(0.0, 1.0) * HISTOGRAM_BINS as f64 + 1e-9) as usize;
    b.min(HISTOGRAM_BINS - 1)
}

fn dataset(label: &str, ratios: Vec<f64>) -> Result<DatasetStats> {
    let summary = FiveNumberSummary::of(&ratios)?;
    let mut histogram = [0u64; HISTOGRAM_BINS];
    for &r in &ratios {
        histogram[histogram_bin(r)] += 1;
    }
    Ok(DatasetStats {
        label: label.into(),
        mean: ratios.iter().sum::<f64>() / ratios.len() as f64,
        ratios,
        summary,
        histogram,
    })
}

/// Stats from bare ratios, `labels[i]` naming the dataset of `ratios[i]`.
pub fn corpus_stats_from_ratios<S: AsRef<str>>(
    ratios: &[f64],
    labels: &[S],
) -> Result<CorpusStats> {
    if ratios.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if labels.len() != ratios.len() {
        return Err(Error::DimensionMismatch {
            what: "dataset labels",
            expected: ratios.len(),
            found: labels.len(),
        });
    }
    let mut order: Vec<&str> = Vec::new();
    for l in labels {
        if !order.contains(&l.as_ref()) {
            order.push(l.as_ref());
        }
    }
    let datasets = order
        .iter()
        .map(|&label| {
            let rs = ratios
                .iter()
                .zip(labels)
                .filter(|(_, l)| l.as_ref() == label)
                .map(|(&r, _)| r)
                .collect();
            dataset(label, rs)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CorpusStats {
        datasets,
        overall: dataset("all", ratios.to_vec())?,
    })
}

pub fn corpus_stats<S: AsRef<str>>(
    results: &[CompressionResult],
    labels: &[S],
) -> Result<CorpusStats> {
    let ratios: Vec<f64> = results.iter().map(|r| r.ratio).collect();
    corpus_stats_from_ratios(&ratios, labels)
}
