//! Reproduction surface: uv-coverage synthesis, synthetic groundtruths,
//! metrics, rendering and the experiment runner.

pub mod experiment;
pub mod metrics;
pub mod phantoms;
pub mod render;
pub mod tracks;
pub mod visfile;
