//! Run configuration, read from TOML and embedded verbatim in every output.
//!
//! ```toml
//! seed = 0
//!
//! [density]
//! alpha = 0.7
//! limit_k = 50
//! count_self = false
//!
//! [selection]
//! iqr_factor = 1.5
//! min_retained = 1
//!
//! [aggregation]
//! knn_k = 3
//! include_self = true
//! normalize_weights = true
//! key_layer = "deep"
//! ```
//!
//! Every field is optional and falls back to the value shown.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tokenpress_core::{
    AggregationConfig, CompressionConfig, DensityConfig, KeyLayer, QuantileMethod, SelectionConfig,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub density: DensitySection,
    pub selection: SelectionSection,
    pub aggregation: AggregationSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensitySection {
    pub alpha: f64,
    pub limit_k: usize,
    pub count_self: bool,
}

impl Default for DensitySection {
    fn default() -> Self {
        let d = DensityConfig::default();
        DensitySection {
            alpha: d.alpha,
            limit_k: d.limit_k,
            count_self: d.count_self,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSection {
    pub iqr_factor: f64,
    pub min_retained: usize,
    /// Always `"linear"` (sample quantile type 7); recorded for completeness.
    pub quantile: QuantileName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantileName {
    #[default]
    Linear,
}

impl Default for SelectionSection {
    fn default() -> Self {
        let s = SelectionConfig::default();
        SelectionSection {
            iqr_factor: s.iqr_factor,
            min_retained: s.min_retained,
            quantile: QuantileName::Linear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggregationSection {
    pub knn_k: usize,
    pub include_self: bool,
    pub normalize_weights: bool,
    pub key_layer: LayerName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerName {
    Deep,
    Low,
}

impl Default for AggregationSection {
    fn default() -> Self {
        let a = AggregationConfig::default();
        AggregationSection {
            knn_k: a.knn_k,
            include_self: a.include_self,
            normalize_weights: a.normalize_weights,
            key_layer: match a.key_layer {
                KeyLayer::Deep => LayerName::Deep,
                KeyLayer::Low => LayerName::Low,
            },
        }
    }
}

impl RunConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| Error::parse(path, e.message()))?;
        cfg.to_core()
            .validate()
            .map_err(|e| Error::core(path.display().to_string(), e))?;
        Ok(cfg)
    }

    pub fn to_core(&self) -> CompressionConfig {
        CompressionConfig {
            density: DensityConfig {
                alpha: self.density.alpha,
                limit_k: self.density.limit_k,
                count_self: self.density.count_self,
            },
            selection: SelectionConfig {
                iqr_factor: self.selection.iqr_factor,
                min_retained: self.selection.min_retained,
                seed: self.seed,
                quantile_method: match self.selection.quantile {
                    QuantileName::Linear => QuantileMethod::Linear,
                },
            },
            aggregation: AggregationConfig {
                knn_k: self.aggregation.knn_k,
                include_self: self.aggregation.include_self,
                normalize_weights: self.aggregation.normalize_weights,
                key_layer: match self.aggregation.key_layer {
                    LayerName::Deep => KeyLayer::Deep,
                    LayerName::Low => KeyLayer::Low,
                },
            },
        }
    }
}
