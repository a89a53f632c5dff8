//! Oracle-equivalence and distribution checks on randomized small instances.

use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tokenpress_core::selection::local_select_with;
use tokenpress_core::{
    aggregate, compute_density, global_select, AggregationConfig, AttentionVector, DensityConfig,
    KeyMatrix, SelectionConfig, TokenMatrix,
};

use super::baseline::{baseline_select, BaselineMethod};
use super::generate::{generate, SyntheticSpec};
use super::oracle;

#[derive(Debug, Clone, Copy)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Random instances per oracle-equivalence check.
    pub instances: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 0x5eed,
            instances: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} ({:.0} ms)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.elapsed.as_secs_f64() * 1e3
        )
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub checks: Vec<CheckOutcome>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let passed = self.checks.iter().filter(|c| c.passed).count();
        write!(f, "{passed}/{} checks passed", self.checks.len())
    }
}

fn timed(name: &'static str, f: impl FnOnce() -> (bool, String)) -> CheckOutcome {
    let start = Instant::now();
    let (passed, detail) = f();
    CheckOutcome {
        name,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

pub fn oracle_suite(cfg: &SuiteConfig) -> SuiteReport {
    SuiteReport {
        checks: vec![
            check_density(cfg.seed, cfg.instances),
            check_iqr(cfg.seed, cfg.instances),
            check_aggregation(cfg.seed, cfg.instances),
            check_first_draw(cfg.seed, 100_000),
            check_subset_uniformity(cfg.seed, 50_000),
            check_random_baseline(cfg.seed, 30_000),
        ],
    }
}

/// Rows scattered around a few random directions so that similarity
/// thresholds are crossed both ways.
fn clustered_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    let n_dirs = rng.random_range(1..=4);
    let dirs: Vec<Vec<f64>> = (0..n_dirs)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let spread = rng.random_range(0.0..1.0);
    (0..n)
        .map(|_| loop {
            let dir = &dirs[rng.random_range(0..n_dirs)];
            let row: Vec<f64> = dir
                .iter()
                .map(|v| v + spread * rng.random_range(-1.0..1.0))
                .collect();
            if row.iter().map(|v| v * v).sum::<f64>() > 1e-6 {
                break row;
            }
        })
        .collect()
}

fn flat(rows: &[Vec<f64>]) -> Vec<f64> {
    rows.iter().flatten().copied().collect()
}

/// Redundancy mask, count, r and d against the double-loop oracle.
pub fn check_density(seed: u64, instances: usize) -> CheckOutcome {
    timed("density-oracle", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd1);
        let mut mismatches = 0;
        let mut redundant_seen = 0;
        for _ in 0..instances {
            let n = rng.random_range(1..=64);
            let d = rng.random_range(1..=32);
            let rows = clustered_rows(&mut rng, n, d);
            let cfg = DensityConfig {
                alpha: rng.random_range(0.3..0.95),
                limit_k: rng.random_range(0..=8),
                count_self: rng.random_bool(0.5),
            };
            let keys = KeyMatrix::new(n, d, flat(&rows)).expect("nonzero rows");
            let got = compute_density(&keys, &cfg).expect("valid config");
            let want = oracle::density_mask(&rows, cfg.alpha, cfg.limit_k, cfg.count_self);
            let n_r = want.iter().filter(|&&b| b).count();
            let r = n_r as f64 / n as f64;
            redundant_seen += n_r;
            if got.redundant_mask != want
                || got.n_redundant != n_r
                || got.redundancy != r
                || got.density != 1.0 - r
            {
                mismatches += 1;
            }
        }
        (
            mismatches == 0,
            format!(
                "{instances} instances, {mismatches} mismatches, {redundant_seen} redundant tokens"
            ),
        )
    })
}

/// Random score vectors (with ties, heavy tails and zeros) plus the
/// all-equal and single-spike edge cases.
pub fn check_iqr(seed: u64, instances: usize) -> CheckOutcome {
    timed("iqr-oracle", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1a);
        let cfg = SelectionConfig::default();
        let mut mismatches = 0;
        let mut outliers = 0;
        for i in 0..instances {
            let n = rng.random_range(1..=128);
            let scores: Vec<f64> = match i % 3 {
                0 => (0..n)
                    .map(|_| rng.random::<f64>().powi(6) * 100.0)
                    .collect(),
                1 => (0..n).map(|_| rng.random_range(0..5) as f64).collect(),
                _ => (0..n)
                    .map(|_| -rng.random::<f64>().max(1e-12).ln())
                    .collect(),
            };
            if !scores.iter().any(|&s| s > 0.0) {
                continue;
            }
            let got = global_select(&AttentionVector::new(scores.clone()).unwrap(), &cfg).unwrap();
            let want = oracle::iqr_outliers(&scores, cfg.iqr_factor);
            outliers += want.len();
            if got != want {
                mismatches += 1;
            }
        }
        let flat = global_select(&AttentionVector::new(vec![0.125; 8]).unwrap(), &cfg).unwrap();
        let mut spike = vec![1.0; 8];
        spike[7] = 10.0;
        let single = global_select(&AttentionVector::new(spike).unwrap(), &cfg).unwrap();
        let edges_ok = flat.is_empty() && single == [7];
        (
            mismatches == 0 && edges_ok,
            format!(
                "{instances} instances, {mismatches} mismatches, {outliers} outliers, edge cases {}",
                if edges_ok { "ok" } else { "FAILED" }
            ),
        )
    })
}

/// Aggregation against the exhaustive k-NN oracle in every mode.
pub fn check_aggregation(seed: u64, instances: usize) -> CheckOutcome {
    timed("aggregation-oracle", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa9);
        let mut worst: f64 = 0.0;
        let mut failures = 0;
        for i in 0..instances {
            let n = rng.random_range(2..=32);
            let dy = rng.random_range(1..=6);
            let dk = rng.random_range(1..=6);
            let include_self = i % 2 == 0;
            let normalize = i % 4 < 2;
            let max_k = 4.min(n - 1);
            let knn_k = rng.random_range(if include_self { 0 } else { 1 }..=max_k);
            let y: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..dy).map(|_| rng.random_range(-3.0..3.0)).collect())
                .collect();
            let mut k = clustered_rows(&mut rng, n, dk);
            // Exact duplicates exercise the lowest-index tie rule.
            for _ in 0..rng.random_range(0..=n / 4) {
                let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
                k[b] = k[a].clone();
            }
            let mut a: Vec<f64> = (0..n)
                .map(|_| {
                    if rng.random_bool(0.1) {
                        0.0
                    } else {
                        rng.random::<f64>()
                    }
                })
                .collect();
            a[rng.random_range(0..n)] = 0.5;
            let mut retained: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.4)).collect();
            if retained.is_empty() {
                retained.push(rng.random_range(0..n));
            }
            let cfg = AggregationConfig {
                knn_k,
                include_self,
                normalize_weights: normalize,
                ..Default::default()
            };
            let got = aggregate(
                &TokenMatrix::new(n, dy, flat(&y)).unwrap(),
                &KeyMatrix::new(n, dk, flat(&k)).unwrap(),
                &AttentionVector::new(a.clone()).unwrap(),
                &retained,
                &cfg,
            );
            let Ok(got) = got else {
                failures += 1;
                continue;
            };
            let want =
                oracle::aggregate_rows(&y, &k, &a, &retained, knn_k, include_self, normalize);
            for (row, w) in got.iter_rows().zip(&want) {
                for (x, z) in row.iter().zip(w) {
                    worst = worst.max((x - z).abs());
                }
            }
        }
        (
            failures == 0 && worst <= 1e-6,
            format!("{instances} instances, max abs error {worst:.3e}, {failures} errors"),
        )
    })
}

/// `attn = (0.7, 0.2, 0.1)`, `m = 1`: index 0 must be drawn with
/// frequency in [0.69, 0.71].
pub fn check_first_draw(seed: u64, trials: usize) -> CheckOutcome {
    timed("sampling-first-draw", || {
        let a = AttentionVector::new(vec![0.7, 0.2, 0.1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xf1);
        let hits = (0..trials)
            .filter(|_| local_select_with(&a, 1, &mut rng).unwrap() == [0])
            .count();
        let freq = hits as f64 / trials as f64;
        (
            (0.69..=0.71).contains(&freq),
            format!("{trials} trials, freq(0) = {freq:.4} (want 0.70 +- 0.01)"),
        )
    })
}

/// Uniform attention, `N = 5`, `m = 2`: chi-square over the 10 subsets
/// against the 0.001 critical value.
pub fn check_subset_uniformity(seed: u64, trials: usize) -> CheckOutcome {
    timed("sampling-subset-uniformity", || {
        let a = AttentionVector::new(vec![0.2; 5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc2);
        let mut counts = [0u64; 10];
        for _ in 0..trials {
            let j = local_select_with(&a, 2, &mut rng).unwrap();
            counts[subset_rank(j[0], j[1])] += 1;
        }
        let chi2 = oracle::chi_square_uniform(&counts);
        (
            chi2 < oracle::CHI2_9DF_P001,
            format!(
                "{trials} trials, chi2 = {chi2:.2} (critical {:.3} at 9 df, alpha 0.001)",
                oracle::CHI2_9DF_P001
            ),
        )
    })
}

/// Position of the pair `(a, b)`, `a < b < 5`, in lexicographic order.
fn subset_rank(a: usize, b: usize) -> usize {
    let mut r = 0;
    for i in 0..5 {
        for j in i + 1..5 {
            if (i, j) == (a, b) {
                return r;
            }
            r += 1;
        }
    }
    unreachable!("pair ({a}, {b}) out of range")
}

/// Random baseline at `N = 6`, `m = 2`: every index kept with frequency
/// 1/3 +- 0.01.
pub fn check_random_baseline(seed: u64, trials: usize) -> CheckOutcome {
    timed("baseline-random-marginals", || {
        // Four clones plus two unique tokens: d = 1/3, so m = 2.
        let spec = SyntheticSpec {
            grid: Some(tokenpress_core::GridShape::new(2, 3)),
            n_clusters: 1,
            seed,
            ..SyntheticSpec::new(6, 8, 4.0 / 6.0)
        };
        let bundle = generate(&spec).expect("feasible").bundle;
        let density = DensityConfig {
            limit_k: 2,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb5);
        let mut counts = [0u64; 6];
        for _ in 0..trials {
            let (sel, _) = baseline_select(
                BaselineMethod::Random,
                &bundle,
                &density,
                &SelectionConfig::default(),
                &mut rng as &mut dyn RngCore,
            )
            .expect("valid bundle");
            for i in sel.merged_indices {
                counts[i] += 1;
            }
        }
        let worst = counts
            .iter()
            .map(|&c| (c as f64 / trials as f64 - 1.0 / 3.0).abs())
            .fold(0.0, f64::max);
        (
            worst <= 0.01,
            format!("{trials} trials, max |freq - 1/3| = {worst:.4}"),
        )
    })
}
