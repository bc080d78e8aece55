//! Standard-library companion of `chainlb-core`: file formats, sweeps,
//! rate fitting, the dense robustness mode and the `chainlb` CLI.

pub mod cli;
pub mod dense;
pub mod fit;
pub mod format;
pub mod plot;
pub mod rates;
pub mod report;
pub mod sweep;

pub use chainlb_core;
