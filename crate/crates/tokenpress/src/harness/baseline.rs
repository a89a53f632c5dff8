//! Non-adaptive selectors for ablations. They bypass the IQR branch and
//! return the same [`SelectionResult`] shape as the adaptive path.

use std::fmt;

use rand::RngCore;
use tokenpress_core::selection::local_select_with;
use tokenpress_core::{
    compute_density, local_sample_count, merge_indices, DensityConfig, SelectionConfig,
    SelectionResult, SubImageBundle,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaselineMethod {
    /// `m` tokens uniformly without replacement, `m` from the adaptive density.
    Random,
    /// Every `ceil(N / m)`-th token, `m` from the adaptive density.
    Uniform,
    /// Attention-guided sampling of `round(r * N)` tokens.
    FixedRatio(f64),
}

impl BaselineMethod {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineMethod::Random => "random",
            BaselineMethod::Uniform => "uniform",
            BaselineMethod::FixedRatio(_) => "fixed",
        }
    }
}

impl fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaselineMethod::FixedRatio(r) => write!(f, "fixed({r})"),
            m => f.write_str(m.name()),
        }
    }
}

/// Every `ceil(n / m)`-th index starting at 0.
pub fn stride_indices(n: usize, m: usize) -> Vec<usize> {
    if m == 0 {
        return vec![];
    }
    (0..n).step_by(n.div_ceil(m)).collect()
}

/// Returns the selection and the local sample size it used.
pub fn baseline_select<R: RngCore + ?Sized>(
    method: BaselineMethod,
    bundle: &SubImageBundle,
    density_cfg: &DensityConfig,
    selection_cfg: &SelectionConfig,
    rng: &mut R,
) -> Result<(SelectionResult, usize)> {
    let n = bundle.n_tokens();
    let adaptive_m = || -> Result<usize> {
        let d = compute_density(bundle.keys_low(), density_cfg)
            .map_err(|e| Error::core("density", e))?;
        Ok(local_sample_count(d.density, n))
    };
    let (local, m) = match method {
        BaselineMethod::Random => {
            let m = adaptive_m()?;
            let mut idx = rand::seq::index::sample(rng, n, m).into_vec();
            idx.sort_unstable();
            (idx, m)
        }
        BaselineMethod::Uniform => {
            let m = adaptive_m()?;
            (stride_indices(n, m), m)
        }
        BaselineMethod::FixedRatio(r) => {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Usage(format!("fixed ratio {r} outside [0, 1]")));
            }
            let m = local_sample_count(r, n);
            let idx = local_select_with(bundle.attn_low(), m, rng)
                .map_err(|e| Error::core("fixed-ratio sampling", e))?;
            (idx, m)
        }
    };
    let sel = merge_indices(&[], &local, bundle.attn_low(), selection_cfg)
        .map_err(|e| Error::core("merge", e))?;
    Ok((sel, m))
}
