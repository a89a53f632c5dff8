//! Order statistics.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// How a quantile is read off the sorted sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuantileMethod {
    /// Linear interpolation between order statistics at position `q (n - 1)`
    /// (Hyndman & Fan type 7).
    #[default]
    Linear,
}

/// Linear-interpolation quantile of `values` at level `q`.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    quantile_with(values, q, QuantileMethod::Linear)
}

pub fn quantile_with(values: &[f64], q: f64, method: QuantileMethod) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue { index });
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    quantile_sorted(&sorted, q, method)
}

/// Same as [`quantile_with`] for input that is already sorted ascending.
pub fn quantile_sorted(sorted: &[f64], q: f64, method: QuantileMethod) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidQuantile);
    }
    match method {
        QuantileMethod::Linear => {
            let pos = q * (sorted.len() - 1) as f64;
            let lo = libm::floor(pos) as usize;
            let hi = libm::ceil(pos) as usize;
            let frac = pos - lo as f64;
            Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
        }
    }
}

/// Min, first quartile, median, third quartile and max.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiveNumberSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumberSummary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { index });
        }
        let mut sorted: Vec<f64> = values.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        let q = |level| quantile_sorted(&sorted, level, QuantileMethod::Linear);
        Ok(FiveNumberSummary {
            min: sorted[0],
            q1: q(0.25)?,
            median: q(0.5)?,
            q3: q(0.75)?,
            max: sorted[sorted.len() - 1],
        })
    }
}
