//! Multi-spectral satellite scenes as pseudo-images for RGB-only
//! vision-language models, plus the prompting and benchmarking harness
//! around them.
//!
//! Pipeline: [`raster`] ingests and aligns per-band rasters; [`spectral`]
//! computes normalized-difference indices and renders the six modality
//! images; [`promptkit`] assembles baseline / vocabulary-expansion /
//! chain-of-thought instructions; [`backend`] ships requests to a model
//! (HTTP, replay, or mock) with caching and rate limiting; [`parse`] maps
//! raw model text onto a closed class vocabulary; [`metrics`] scores
//! predictions; [`bench`] orchestrates dataset runs and ablation matrices.

pub mod backend;
pub mod bench;
pub mod metrics;
pub mod parse;
pub mod promptkit;
pub mod raster;
pub mod spectral;
