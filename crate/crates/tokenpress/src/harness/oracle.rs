//! Brute-force reference implementations, written straight from the
//! algorithm statements on plain `Vec`s. They share no code with
//! `tokenpress-core`.

#![allow(clippy::needless_range_loop)]

/// Redundancy mask by explicit double loop over raw cosine similarities.
pub fn density_mask(keys: &[Vec<f64>], alpha: f64, limit_k: usize, count_self: bool) -> Vec<bool> {
    let n = keys.len();
    let norms: Vec<f64> = keys
        .iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let mut mask = vec![false; n];
    for i in 0..n {
        let mut similar = 0usize;
        for j in 0..n {
            if i == j && !count_self {
                continue;
            }
            let mut d = 0.0;
            for c in 0..keys[i].len() {
                d += keys[i][c] * keys[j][c];
            }
            if d / (norms[i] * norms[j]) > alpha {
                similar += 1;
            }
        }
        mask[i] = similar > limit_k;
    }
    mask
}

/// Upper IQR outliers: sort, read Q1/Q3 by linear interpolation, compare.
pub fn iqr_outliers(scores: &[f64], factor: f64) -> Vec<usize> {
    let mut s = scores.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let at = |q: f64| {
        let p = q * (s.len() - 1) as f64;
        let lo = p.floor() as usize;
        let hi = p.ceil() as usize;
        s[lo] + (p - lo as f64) * (s[hi] - s[lo])
    };
    let (q1, q3) = (at(0.25), at(0.75));
    let fence = q3 + factor * (q3 - q1);
    (0..scores.len()).filter(|&i| scores[i] > fence).collect()
}

/// Aggregated rows for each retained index (in the order given).
///
/// Builds the full pairwise cosine table, ranks every other token with a
/// stable sort (so ties keep the lower index), and forms the weighted sum
/// directly. `normalize = false` is the literal unnormalized sum.
pub fn aggregate_rows(
    tokens: &[Vec<f64>],
    keys: &[Vec<f64>],
    attn: &[f64],
    retained: &[usize],
    knn_k: usize,
    include_self: bool,
    normalize: bool,
) -> Vec<Vec<f64>> {
    let n = tokens.len();
    let mut table = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut d = 0.0;
            let mut ni = 0.0;
            let mut nj = 0.0;
            for c in 0..keys[i].len() {
                d += keys[i][c] * keys[j][c];
                ni += keys[i][c] * keys[i][c];
                nj += keys[j][c] * keys[j][c];
            }
            table[i][j] = d / (ni.sqrt() * nj.sqrt());
        }
    }
    retained
        .iter()
        .map(|&l| {
            let mut others: Vec<usize> = (0..n).filter(|&p| p != l).collect();
            others.sort_by(|&p, &q| table[l][q].partial_cmp(&table[l][p]).unwrap());
            let mut group: Vec<usize> = others[..knn_k].to_vec();
            if include_self {
                group.push(l);
            }
            let total: f64 = group.iter().map(|&p| attn[p]).sum();
            let mut row = vec![0.0; tokens[0].len()];
            for &p in &group {
                let w = if !normalize {
                    attn[p]
                } else if total > 0.0 {
                    attn[p] / total
                } else {
                    1.0 / group.len() as f64
                };
                for (acc, y) in row.iter_mut().zip(&tokens[p]) {
                    *acc += w * y;
                }
            }
            row
        })
        .collect()
}

/// Chi-square statistic of observed counts against equal expected counts.
pub fn chi_square_uniform(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum()
}

/// Upper 0.1% point of the chi-square distribution with 9 degrees of
/// freedom (10 subsets of size 2 from 5).
pub const CHI2_9DF_P001: f64 = 27.877;
