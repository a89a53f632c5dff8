//! Parametric sub-image generator with a known amount of redundancy.
//!
//! Redundant tokens are split into clusters; each clone's key is its
//! cluster's basis direction plus a perturbation of norm at most 0.05, which
//! keeps it within `asin(0.05)` of the centroid (cosine > 0.998). Unique
//! tokens sit within `asin(0.02)` of their own basis direction, so any two
//! of them have `|cos| < 0.05`. With `alpha = 0.7` every clone is similar
//! exactly to its own cluster and no unique token is similar to anything,
//! hence the density is `1 - rho` whenever each cluster has more than
//! `limit_k + 1` members.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tokenpress_core::{
    AttentionVector, DensityConfig, GridShape, KeyMatrix, SubImageBundle, TokenMatrix,
};

use crate::error::{Error, Result};

const CLONE_NOISE: f64 = 0.05;
const UNIQUE_NOISE: f64 = 0.02;
/// Attention given to redundant tokens relative to unique ones.
const CONCENTRATED_FLOOR: f64 = 1e-3;
/// Injected outliers sit at this multiple of the IQR fence.
const OUTLIER_SCALE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttentionProfile {
    Uniform,
    /// Unique tokens carry almost all of the attention mass.
    ConcentratedOnUnique,
    /// Near-uniform attention with this many deep-layer spikes.
    WithOutliers(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_tokens: usize,
    pub dim: usize,
    pub redundancy_fraction: f64,
    pub n_clusters: usize,
    pub attention_profile: AttentionProfile,
    pub seed: u64,
    /// Defaults to the most nearly square factorization of `n_tokens`.
    pub grid: Option<GridShape>,
}

impl SyntheticSpec {
    pub fn new(n_tokens: usize, dim: usize, redundancy_fraction: f64) -> Self {
        SyntheticSpec {
            n_tokens,
            dim,
            redundancy_fraction,
            n_clusters: 1,
            attention_profile: AttentionProfile::Uniform,
            seed: 0,
            grid: None,
        }
    }

    pub fn n_redundant(&self) -> usize {
        (self.redundancy_fraction * self.n_tokens as f64).round() as usize
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticBundle {
    pub bundle: SubImageBundle,
    /// Ground truth: which tokens were generated as clones.
    pub redundant: Vec<bool>,
    /// Deep-layer outlier indices injected by [`AttentionProfile::WithOutliers`].
    pub outliers: Vec<usize>,
}

pub fn square_grid(n: usize) -> GridShape {
    let mut rows = (n as f64).sqrt() as usize;
    while rows > 1 && n % rows != 0 {
        rows -= 1;
    }
    let rows = rows.max(1);
    GridShape::new(rows, n / rows)
}

/// Largest outlier count that leaves both quartiles untouched.
fn max_outliers(n: usize) -> usize {
    let p3 = 0.75 * (n.saturating_sub(1)) as f64;
    n.saturating_sub(1 + p3.ceil() as usize)
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticBundle> {
    let n = spec.n_tokens;
    let infeasible = |msg: String| Err(Error::InfeasibleSpec(msg));
    if n == 0 || spec.dim == 0 {
        return infeasible("n_tokens and dim must be positive".into());
    }
    if !(0.0..=1.0).contains(&spec.redundancy_fraction) {
        return infeasible("redundancy_fraction must lie in [0, 1]".into());
    }
    let n_red = spec.n_redundant();
    let clusters = if n_red == 0 { 0 } else { spec.n_clusters };
    if n_red > 0 && (clusters == 0 || n_red < 2 * clusters) {
        return infeasible(format!(
            "{n_red} redundant tokens cannot form {} clusters of at least 2",
            spec.n_clusters
        ));
    }
    let n_unique = n - n_red;
    if spec.dim < n_unique + clusters {
        return infeasible(format!(
            "dim {} cannot hold {n_unique} orthogonal unique tokens plus {clusters} centroids",
            spec.dim
        ));
    }
    if let AttentionProfile::WithOutliers(c) = spec.attention_profile {
        if c > max_outliers(n) {
            return infeasible(format!(
                "{c} outliers would shift the quartiles of {n} scores (max {})",
                max_outliers(n)
            ));
        }
    }
    let grid = spec.grid.unwrap_or_else(|| square_grid(n));
    if grid.cells() != n {
        return infeasible(format!(
            "grid {}x{} does not hold {n} tokens",
            grid.rows, grid.cols
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Token slots: the first n_red shuffled positions are clones, dealt to
    // clusters in contiguous runs of near-equal size.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut role = vec![Role::Unique(0); n];
    for (rank, &t) in order.iter().enumerate() {
        role[t] = if rank < n_red {
            Role::Clone(rank * clusters / n_red)
        } else {
            Role::Unique(rank - n_red)
        };
    }
    let redundant: Vec<bool> = role.iter().map(|r| matches!(r, Role::Clone(_))).collect();

    let keys_low = keys_for(&role, n_unique, spec.dim, &mut rng)?;
    let keys_deep = keys_for(&role, n_unique, spec.dim, &mut rng)?;

    let y: Vec<f64> = (0..n * spec.dim)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let y_last =
        TokenMatrix::new(n, spec.dim, y).map_err(|e| Error::core("synthetic tokens", e))?;

    let (attn_low, attn_deep, outliers) = match spec.attention_profile {
        AttentionProfile::Uniform => {
            let a = vec![1.0 / n as f64; n];
            (a.clone(), a, vec![])
        }
        AttentionProfile::ConcentratedOnUnique => {
            let mut draw = || -> Vec<f64> {
                let raw: Vec<f64> = redundant
                    .iter()
                    .map(|&r| {
                        let w = 1.0 + rng.random::<f64>();
                        if r {
                            CONCENTRATED_FLOOR * w
                        } else {
                            w
                        }
                    })
                    .collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|w| w / total).collect()
            };
            let low = draw();
            (low, draw(), vec![])
        }
        AttentionProfile::WithOutliers(count) => {
            let low = spaced_scores(n, &[], &mut rng);
            let mut picks: Vec<usize> = (0..n).collect();
            picks.shuffle(&mut rng);
            let mut outliers = picks[..count].to_vec();
            outliers.sort_unstable();
            let mut deep = spaced_scores(n, &outliers, &mut rng);
            let fence = sort_fence(&deep);
            for &o in &outliers {
                deep[o] = OUTLIER_SCALE * fence;
            }
            (low, deep, outliers)
        }
    };
    let attn = |v: Vec<f64>, what| AttentionVector::new(v).map_err(|e| Error::core(what, e));
    let bundle = SubImageBundle::new(
        y_last,
        keys_low,
        attn(attn_low, "synthetic low attention")?,
        keys_deep,
        attn(attn_deep, "synthetic deep attention")?,
        grid,
        false,
    )
    .map_err(|e| Error::core("synthetic bundle", e))?;
    Ok(SyntheticBundle {
        bundle,
        redundant,
        outliers,
    })
}

#[derive(Debug, Clone, Copy)]
enum Role {
    Unique(usize),
    Clone(usize),
}

fn keys_for(role: &[Role], n_unique: usize, dim: usize, rng: &mut ChaCha8Rng) -> Result<KeyMatrix> {
    let mut axes: Vec<usize> = (0..dim).collect();
    axes.shuffle(rng);
    let mut data = Vec::with_capacity(role.len() * dim);
    for r in role {
        let (axis, noise) = match *r {
            Role::Unique(j) => (axes[j], UNIQUE_NOISE),
            Role::Clone(c) => (axes[n_unique + c], CLONE_NOISE),
        };
        // Each coordinate within noise/sqrt(dim), so the perturbation norm is
        // at most `noise`.
        let per = noise / (dim as f64).sqrt();
        let scale = rng.random_range(0.5..2.0);
        for c in 0..dim {
            let base = if c == axis { 1.0 } else { 0.0 };
            data.push(scale * (base + rng.random_range(-per..per)));
        }
    }
    KeyMatrix::new(role.len(), dim, data).map_err(|e| Error::core("synthetic keys", e))
}

/// Evenly spaced scores in [1, 1.1], randomly permuted, with the largest
/// values placed on `top` (their IQR fence is exactly 1.15, above them all).
fn spaced_scores(n: usize, top: &[usize], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut rest: Vec<usize> = (0..n).filter(|i| !top.contains(i)).collect();
    rest.shuffle(rng);
    let step = if n > 1 { 0.1 / (n - 1) as f64 } else { 0.0 };
    let mut out = vec![0.0; n];
    for (rank, &i) in rest.iter().chain(top).enumerate() {
        out[i] = 1.0 + step * rank as f64;
    }
    out
}

fn sort_fence(scores: &[f64]) -> f64 {
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    let at = |q: f64| {
        let p = q * (s.len() - 1) as f64;
        let (lo, hi) = (p.floor() as usize, p.ceil() as usize);
        s[lo] + (p - lo as f64) * (s[hi] - s[lo])
    };
    at(0.75) + 1.5 * (at(0.75) - at(0.25))
}

/// The 4x4 example with 12 cloned low-layer keys and 4 unique ones on the
/// diagonal (tokens 0, 5, 10, 15).
///
/// * low keys: clones are `e0`, unique token `i` of the diagonal is `e(i+1)`;
/// * low attention: 0.25 on each unique token, 0 elsewhere;
/// * deep attention: 0.2 on unique tokens, 1/60 on clones;
/// * deep keys: token `t` is `e(t mod 4)`, so each unique token's three
///   nearest neighbours are the other tokens in its grid column;
/// * last-layer tokens: `Y[t] = (t, 1)`.
///
/// Under [`hand_trace_config`] the density is 0.25, both branches pick the
/// diagonal, and aggregation gives `Y' = [(1.6, 1), (5.5333.., 1),
/// (9.4666.., 1), (13.4, 1)]`.
pub fn hand_trace_bundle() -> SubImageBundle {
    let unique = [0usize, 5, 10, 15];
    let basis = |dim: usize, axis: usize| -> Vec<f64> {
        (0..dim)
            .map(|c| if c == axis { 1.0 } else { 0.0 })
            .collect()
    };
    let low: Vec<Vec<f64>> = (0..16)
        .map(|t| match unique.iter().position(|&u| u == t) {
            Some(j) => basis(5, j + 1),
            None => basis(5, 0),
        })
        .collect();
    let deep: Vec<Vec<f64>> = (0..16).map(|t| basis(4, t % 4)).collect();
    let y: Vec<[f64; 2]> = (0..16).map(|t| [t as f64, 1.0]).collect();
    let attn_low = (0..16)
        .map(|t| if unique.contains(&t) { 0.25 } else { 0.0 })
        .collect();
    let attn_deep = (0..16)
        .map(|t| if unique.contains(&t) { 0.2 } else { 1.0 / 60.0 })
        .collect();
    SubImageBundle::new(
        TokenMatrix::from_rows(&y).unwrap(),
        KeyMatrix::from_rows(&low).unwrap(),
        AttentionVector::new(attn_low).unwrap(),
        KeyMatrix::from_rows(&deep).unwrap(),
        AttentionVector::new(attn_deep).unwrap(),
        GridShape::new(4, 4),
        false,
    )
    .unwrap()
}

/// Defaults except `limit_k = 3`: with only 16 tokens the shipped limit of
/// 50 similar peers can never be exceeded.
pub fn hand_trace_config() -> tokenpress_core::CompressionConfig {
    tokenpress_core::CompressionConfig {
        density: DensityConfig {
            limit_k: 3,
            ..DensityConfig::default()
        },
        ..Default::default()
    }
}
