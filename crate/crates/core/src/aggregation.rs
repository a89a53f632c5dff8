//! Token aggregation: every retained token absorbs its `knn_k` nearest
//! neighbours (key cosine similarity) through an attention-weighted sum, so
//! unretained content is folded in rather than dropped.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{dot, normalize_rows, AttentionVector, KeyMatrix, TokenMatrix};

pub const DEFAULT_KNN_K: usize = 3;

/// Which layer's keys define neighbourhoods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KeyLayer {
    #[default]
    Deep,
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AggregationConfig {
    pub knn_k: usize,
    /// Put the retained token itself in its group.
    pub include_self: bool,
    /// Rescale group weights to sum to one.
    pub normalize_weights: bool,
    pub key_layer: KeyLayer,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        AggregationConfig {
            knn_k: DEFAULT_KNN_K,
            include_self: true,
            normalize_weights: true,
            key_layer: KeyLayer::Deep,
        }
    }
}

/// Nearest neighbours of `l` among all other rows of the normalized keys,
/// most similar first, lowest index winning ties.
pub fn nearest_neighbors(keys_normalized: &KeyMatrix, l: usize, knn_k: usize) -> Vec<usize> {
    let target = keys_normalized.row(l);
    let mut cands: Vec<(f64, usize)> = (0..keys_normalized.rows())
        .filter(|&p| p != l)
        .map(|p| (dot(target, keys_normalized.row(p)), p))
        .collect();
    let by_rank = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if knn_k < cands.len() {
        cands.select_nth_unstable_by(knn_k, by_rank);
        cands.truncate(knn_k);
    }
    cands.sort_unstable_by(by_rank);
    cands.into_iter().map(|(_, p)| p).collect()
}

/// Replaces each retained token `l` by `sum_{p in G_l} w_p * Y[p]` where
/// `G_l` is its neighbour group and `w_p = attn[p]`.
///
/// With `normalize_weights`, weights are divided by their group sum; a group
/// whose attention is all zero falls back to equal weights. Without it the
/// raw scores are used, so callers should pass attention that sums to one.
/// Output rows follow `retained` sorted ascending.
pub fn aggregate(
    tokens: &TokenMatrix,
    keys: &KeyMatrix,
    attn: &AttentionVector,
    retained: &[usize],
    cfg: &AggregationConfig,
) -> Result<TokenMatrix> {
    let n = tokens.rows();
    for (what, found) in [("key rows", keys.rows()), ("attention length", attn.len())] {
        if found != n {
            return Err(Error::DimensionMismatch {
                what,
                expected: n,
                found,
            });
        }
    }
    if retained.is_empty() {
        return Err(Error::EmptyRetention);
    }
    if cfg.knn_k > n - 1 {
        return Err(Error::NeighborCountExceedsTokens {
            knn_k: cfg.knn_k,
            n_tokens: n,
        });
    }
    if let Some(&index) = retained.iter().find(|&&l| l >= n) {
        return Err(Error::IndexOutOfRange { index, len: n });
    }
    if !cfg.include_self && cfg.knn_k == 0 {
        return Err(Error::InvalidConfig(
            "knn_k = 0 without include_self leaves every group empty",
        ));
    }
    let mut order = retained.to_vec();
    order.sort_unstable();
    order.dedup();

    let normalized = normalize_rows(keys)?;
    let scores = attn.scores();
    let d = tokens.cols();
    let mut out = Vec::with_capacity(order.len() * d);
    let mut row = vec![0.0; d];
    for &l in &order {
        let mut group = nearest_neighbors(&normalized, l, cfg.knn_k);
        if cfg.include_self {
            group.push(l);
        }
        let raw_total: f64 = group.iter().map(|&p| scores[p]).sum();
        let weight = |p: usize| -> f64 {
            if !cfg.normalize_weights {
                scores[p]
            } else if raw_total > 0.0 {
                scores[p] / raw_total
            } else {
                1.0 / group.len() as f64
            }
        };
        row.iter_mut().for_each(|v| *v = 0.0);
        for &p in &group {
            let w = weight(p);
            for (acc, &y) in row.iter_mut().zip(tokens.row(p)) {
                *acc += w * y;
            }
        }
        out.extend_from_slice(&row);
    }
    TokenMatrix::new(order.len(), d, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(knn_k: usize, include_self: bool) -> AggregationConfig {
        AggregationConfig {
            knn_k,
            include_self,
            ..Default::default()
        }
    }

    #[test]
    fn zero_neighbours_is_identity() {
        let y = TokenMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        let k = KeyMatrix::from_rows(&[[1.0, 0.0], [0.9, 0.1], [0.0, 1.0]]).unwrap();
        let a = AttentionVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let out = aggregate(&y, &k, &a, &[2, 0], &cfg(0, true)).unwrap();
        assert_eq!(out.row(0), y.row(0));
        assert_eq!(out.row(1), y.row(2));
    }

    #[test]
    fn identical_tokens_stay_put() {
        let y = TokenMatrix::from_rows(&[[0.5, -1.5]; 5]).unwrap();
        let k =
            KeyMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [-1.0, 0.3], [0.2, 0.2]])
                .unwrap();
        let a = AttentionVector::new(vec![0.1, 0.4, 0.2, 0.2, 0.1]).unwrap();
        for knn_k in 0..=4 {
            let out = aggregate(&y, &k, &a, &[0, 3], &cfg(knn_k, true)).unwrap();
            for r in out.iter_rows() {
                assert!((r[0] - 0.5).abs() < 1e-12 && (r[1] + 1.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hand_computed_group() {
        // Token 0's nearest neighbour is token 1 (cos 0.6) over token 2 (cos 0).
        let y = TokenMatrix::from_rows(&[[1.0], [10.0], [100.0]]).unwrap();
        let k = KeyMatrix::from_rows(&[[1.0, 0.0], [0.6, 0.8], [0.0, 1.0]]).unwrap();
        let a = AttentionVector::new(vec![0.25, 0.25, 0.5]).unwrap();
        let out = aggregate(&y, &k, &a, &[0], &cfg(1, true)).unwrap();
        assert!((out.row(0)[0] - 5.5).abs() < 1e-12);
        let literal = AggregationConfig {
            normalize_weights: false,
            ..cfg(1, false)
        };
        let out = aggregate(&y, &k, &a, &[0], &literal).unwrap();
        assert!((out.row(0)[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn zero_attention_group_averages() {
        let y = TokenMatrix::from_rows(&[[2.0], [4.0], [9.0]]).unwrap();
        let k = KeyMatrix::from_rows(&[[1.0, 0.0], [1.0, 0.1], [0.0, 1.0]]).unwrap();
        let a = AttentionVector::new(vec![0.0, 0.0, 1.0]).unwrap();
        let out = aggregate(&y, &k, &a, &[0], &cfg(1, true)).unwrap();
        assert_eq!(out.row(0), &[3.0]);
    }

    #[test]
    fn ties_pick_lowest_index() {
        let k = normalize_rows(
            &KeyMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.0, 2.0], [0.0, 3.0]]).unwrap(),
        )
        .unwrap();
        assert_eq!(nearest_neighbors(&k, 0, 2), vec![1, 2]);
        assert_eq!(nearest_neighbors(&k, 3, 2), vec![1, 2]);
        assert_eq!(nearest_neighbors(&k, 3, 3), vec![1, 2, 0]);
    }

    #[test]
    fn errors() {
        let y = TokenMatrix::from_rows(&[[1.0], [2.0]]).unwrap();
        let k = KeyMatrix::from_rows(&[[1.0], [1.0]]).unwrap();
        let a = AttentionVector::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(
            aggregate(&y, &k, &a, &[], &cfg(1, true)),
            Err(Error::EmptyRetention)
        );
        assert_eq!(
            aggregate(&y, &k, &a, &[0], &cfg(2, true)),
            Err(Error::NeighborCountExceedsTokens {
                knn_k: 2,
                n_tokens: 2
            })
        );
        assert!(matches!(
            aggregate(
                &y,
                &k,
                &AttentionVector::new(vec![1.0]).unwrap(),
                &[0],
                &cfg(0, true)
            ),
            Err(Error::DimensionMismatch { .. })
        ));
        assert_eq!(
            aggregate(&y, &k, &a, &[5], &cfg(0, true)),
            Err(Error::IndexOutOfRange { index: 5, len: 2 })
        );
    }

    // Brute force: full pairwise cosine table, stable sort per row.
    fn oracle(
        y: &[Vec<f64>],
        k: &[Vec<f64>],
        a: &[f64],
        retained: &[usize],
        knn_k: usize,
        include_self: bool,
    ) -> Vec<Vec<f64>> {
        let n = y.len();
        let cos = |i: usize, j: usize| {
            let d: f64 = k[i].iter().zip(&k[j]).map(|(x, y)| x * y).sum();
            let ni: f64 = k[i].iter().map(|x| x * x).sum::<f64>().sqrt();
            let nj: f64 = k[j].iter().map(|x| x * x).sum::<f64>().sqrt();
            d / (ni * nj)
        };
        let mut out = vec![];
        for &l in retained {
            let mut others: Vec<usize> = (0..n).filter(|&p| p != l).collect();
            others.sort_by(|&p, &q| cos(l, q).partial_cmp(&cos(l, p)).unwrap());
            let mut group: Vec<usize> = others.into_iter().take(knn_k).collect();
            if include_self {
                group.push(l);
            }
            let total: f64 = group.iter().map(|&p| a[p]).sum();
            let mut row = vec![0.0; y[0].len()];
            for &p in &group {
                for c in 0..row.len() {
                    row[c] += a[p] / total * y[p][c];
                }
            }
            out.push(row);
        }
        out
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            (y, k, a) in (2usize..8).prop_flat_map(|n| (
                proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, 3), n),
                proptest::collection::vec(proptest::collection::vec(0.1f64..1.0, 4), n),
                proptest::collection::vec(0.01f64..1.0, n),
            )),
            knn in 0usize..4,
            include_self in any::<bool>(),
            mask in any::<u8>(),
        ) {
            let n = y.len();
            let knn = knn.min(n - 1);
            prop_assume!(include_self || knn > 0);
            let mut retained: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            if retained.is_empty() { retained.push(0); }
            let got = aggregate(
                &TokenMatrix::from_rows(&y).unwrap(),
                &KeyMatrix::from_rows(&k).unwrap(),
                &AttentionVector::new(a.clone()).unwrap(),
                &retained,
                &cfg(knn, include_self),
            ).unwrap();
            let want = oracle(&y, &k, &a, &retained, knn, include_self);
            for (r, w) in got.iter_rows().zip(&want) {
                for (x, z) in r.iter().zip(w) {
                    prop_assert!((x - z).abs() < 1e-6);
                }
            }
        }

        #[test]
        fn convex_hull_bound(
            (y, k, a) in (2usize..10).prop_flat_map(|n| (
                proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 2), n),
                proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 3)
                    .prop_filter("zero", |r| r.iter().any(|v| v.abs() > 1e-3)), n),
                proptest::collection::vec(0.01f64..1.0, n),
            )),
            knn in 0usize..9,
        ) {
            let n = y.len();
            let y = TokenMatrix::from_rows(&y).unwrap();
            let all: Vec<usize> = (0..n).collect();
            let out = aggregate(
                &y,
                &KeyMatrix::from_rows(&k).unwrap(),
                &AttentionVector::new(a).unwrap(),
                &all,
                &cfg(knn.min(n - 1), true),
            ).unwrap();
            prop_assert!(out.max_abs() <= y.max_abs() + 1e-12);
        }
    }
}
