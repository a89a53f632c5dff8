//! Information density of one sub-image from patch-patch key correlation.
//!
//! A token is *redundant* when more than `limit_k` other tokens have key
//! cosine similarity strictly above `alpha`. Redundancy `r` is the redundant
//! fraction and density is `d = 1 - r`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{normalize_rows, similarity_matrix, KeyMatrix};

pub const DEFAULT_ALPHA: f64 = 0.7;
pub const DEFAULT_LIMIT_K: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityConfig {
    /// Similarity threshold, compared strictly (`S[i][j] > alpha`).
    pub alpha: f64,
    /// A token with strictly more than this many similar peers is redundant.
    pub limit_k: usize,
    /// Count each token as similar to itself (the diagonal of `S`).
    pub count_self: bool,
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig {
            alpha: DEFAULT_ALPHA,
            limit_k: DEFAULT_LIMIT_K,
            count_self: false,
        }
    }
}

impl DensityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > -1.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig("alpha must lie in (-1, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityReport {
    pub n_redundant: usize,
    pub redundancy: f64,
    pub density: f64,
    pub redundant_mask: Vec<bool>,
}

impl DensityReport {
    pub fn n_tokens(&self) -> usize {
        self.redundant_mask.len()
    }

    pub(crate) fn from_mask(redundant_mask: Vec<bool>) -> Self {
        let n_redundant = redundant_mask.iter().filter(|&&r| r).count();
        let redundancy = n_redundant as f64 / redundant_mask.len() as f64;
        DensityReport {
            n_redundant,
            redundancy,
            density: 1.0 - redundancy,
            redundant_mask,
        }
    }
}

pub fn compute_density(keys: &KeyMatrix, cfg: &DensityConfig) -> Result<DensityReport> {
    cfg.validate()?;
    let normalized = normalize_rows(keys)?;
    let sim = similarity_matrix(&normalized);
    let mask = (0..sim.len())
        .map(|i| {
            let similar = sim
                .row(i)
                .iter()
                .enumerate()
                .filter(|&(j, &s)| (cfg.count_self || j != i) && s > cfg.alpha)
                .count();
            similar > cfg.limit_k
        })
        .collect();
    Ok(DensityReport::from_mask(mask))
}
