//! Command-line driver: configuration, the inventory pipeline, benchmark,
//! synthetic scenes, cost reports and run manifests.

pub mod app;
pub mod commands;
pub mod config;
pub mod error;
pub mod eval;
pub mod heatmap;
pub mod manifest;
pub mod output;
pub mod params;
pub mod pipeline;
