//! Synthetic instances, brute-force oracles and baseline selectors used to
//! validate the compression engine without a vision model.

pub mod baseline;
pub mod generate;
pub mod oracle;
pub mod suite;

pub use baseline::{baseline_select, BaselineMethod};
pub use generate::{
    generate, hand_trace_bundle, hand_trace_config, AttentionProfile, SyntheticBundle,
    SyntheticSpec,
};
pub use suite::{oracle_suite, CheckOutcome, SuiteConfig, SuiteReport};
