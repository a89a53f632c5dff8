//! Dual-branch token selection.
//!
//! The global branch keeps the upper IQR outliers of the deep-layer CLS
//! attention. The local branch draws `round(d * N)` tokens without
//! replacement, using the low-layer CLS attention as the sampling
//! distribution. The two index sets are then merged.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::matrix::AttentionVector;
use crate::stats::{quantile_sorted, QuantileMethod};

pub const DEFAULT_IQR_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    /// Upper fence is `Q3 + iqr_factor * (Q3 - Q1)`.
    pub iqr_factor: f64,
    /// Lower bound on the merged index count.
    pub min_retained: usize,
    pub seed: u64,
    pub quantile_method: QuantileMethod,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            iqr_factor: DEFAULT_IQR_FACTOR,
            min_retained: 1,
            seed: 0,
            quantile_method: QuantileMethod::Linear,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iqr_factor > 0.0 && self.iqr_factor.is_finite()) {
            return Err(Error::InvalidConfig("iqr_factor must be positive"));
        }
        if self.min_retained == 0 {
            return Err(Error::InvalidConfig("min_retained must be at least 1"));
        }
        Ok(())
    }
}

/// Index sets produced by the two branches and their merge. Every list is
/// sorted ascending and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SelectionResult {
    pub global_indices: Vec<usize>,
    pub local_indices: Vec<usize>,
    /// Indices added only to satisfy `min_retained`.
    pub fallback_indices: Vec<usize>,
    pub merged_indices: Vec<usize>,
}

/// `Q3 + factor * (Q3 - Q1)` over `scores`.
pub fn iqr_upper_fence(scores: &[f64], factor: f64, method: QuantileMethod) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = scores.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25, method)?;
    let q3 = quantile_sorted(&sorted, 0.75, method)?;
    Ok(q3 + factor * (q3 - q1))
}

/// Global branch: tokens whose deep-layer attention lies strictly above the
/// IQR upper fence. Lower outliers are ignored.
pub fn global_select(attn_deep: &AttentionVector, cfg: &SelectionConfig) -> Result<Vec<usize>> {
    cfg.validate()?;
    let scores = attn_deep.scores();
    let fence = iqr_upper_fence(scores, cfg.iqr_factor, cfg.quantile_method)?;
    Ok(scores
        .iter()
        .enumerate()
        .filter(|&(_, &s)| s > fence)
        .map(|(i, _)| i)
        .collect())
}

/// Local-branch sample size: `d * N` rounded half away from zero, clamped to
/// `[0, N]`.
pub fn local_sample_count(density: f64, n_tokens: usize) -> usize {
    let m = libm::round(density * n_tokens as f64);
    if m.is_nan() || m <= 0.0 {
        0
    } else {
        (m as usize).min(n_tokens)
    }
}

/// Sampling generator for `seed`; distinct `stream`s are independent.
pub fn sampler_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Local branch with a generator derived from `cfg.seed` (stream 0).
pub fn local_select(
    attn_low: &AttentionVector,
    m: usize,
    cfg: &SelectionConfig,
) -> Result<Vec<usize>> {
    local_select_with(attn_low, m, &mut sampler_rng(cfg.seed, 0))
}

/// Draws `m` distinct indices. Each draw picks token `i` with probability
/// `w_i / sum(remaining w)`, then removes it.
pub fn local_select_with<R: RngCore + ?Sized>(
    attn_low: &AttentionVector,
    m: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let available = attn_low.support();
    if m > available {
        return Err(Error::InsufficientSupport {
            requested: m,
            available,
        });
    }
    let mut weights = attn_low.scores().to_vec();
    let mut picked = Vec::with_capacity(m);
    for _ in 0..m {
        let total: f64 = weights.iter().sum();
        let target = unit_f64(rng) * total;
        let mut acc = 0.0;
        let mut chosen = None;
        let mut last_positive = 0;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                acc += w;
                last_positive = i;
                if target < acc {
                    chosen = Some(i);
                    break;
                }
            }
        }
        // Rounding can leave target a hair above the accumulated total.
        let i = chosen.unwrap_or(last_positive);
        weights[i] = 0.0;
        picked.push(i);
    }
    picked.sort_unstable();
    Ok(picked)
}

/// Uniform on `[0, 1)` with 53 random bits.
#[inline]
fn unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Sorted union of the two branches. When it holds fewer than
/// `cfg.min_retained` indices, the highest-scoring tokens of `attn_low`
/// (lowest index first on ties) are added.
pub fn merge_indices(
    global: &[usize],
    local: &[usize],
    attn_low: &AttentionVector,
    cfg: &SelectionConfig,
) -> Result<SelectionResult> {
    cfg.validate()?;
    let n = attn_low.len();
    let canon = |set: &[usize]| -> Result<Vec<usize>> {
        if let Some(&index) = set.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index, len: n });
        }
        let mut v = set.to_vec();
        v.sort_unstable();
        v.dedup();
        Ok(v)
    };
    let global_indices = canon(global)?;
    let local_indices = canon(local)?;
    let mut merged: Vec<usize> = global_indices
        .iter()
        .chain(&local_indices)
        .copied()
        .collect();
    merged.sort_unstable();
    merged.dedup();

    let mut fallback_indices = Vec::new();
    let want = cfg.min_retained.min(n);
    if merged.len() < want {
        let scores = attn_low.scores();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        for &i in order.iter().take(want) {
            if merged.binary_search(&i).is_err() {
                fallback_indices.push(i);
            }
        }
        fallback_indices.sort_unstable();
        merged.extend_from_slice(&fallback_indices);
        merged.sort_unstable();
    }
    Ok(SelectionResult {
        global_indices,
        local_indices,
        fallback_indices,
        merged_indices: merged,
    })
}
