//! Run manifest: what went in, what came out, and how long it took.
//!
//! Everything except `run` is a pure function of the configuration and the
//! input bytes; `run` holds the thread count and wall-clock timings.

use std::collections::BTreeMap;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunInfo {
    pub threads: usize,
    pub timings: Vec<StageTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub versions: BTreeMap<String, String>,
    /// SHA-256 of `config`.
    pub config_hash: String,
    /// Canonical effective configuration after flag overrides.
    pub config: String,
    /// Keyed by config field.
    pub inputs: BTreeMap<String, FileRecord>,
    /// Stages skipped by configuration, such as `spectral` under a species-map bypass.
    pub bypassed_stages: Vec<String>,
    pub outputs: Vec<FileRecord>,
    pub run: RunInfo,
}

impl RunManifest {
    pub fn new(command: &str, config: &crate::config::Config) -> Self {
        let versions = BTreeMap::from([
            ("canopy-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("canopy-core".to_string(), canopy_core::VERSION.to_string()),
        ]);
        RunManifest {
            command: command.into(),
            versions,
            config_hash: config.hash(),
            config: config.canonical(),
            inputs: BTreeMap::new(),
            bypassed_stages: Vec::new(),
            outputs: Vec::new(),
            run: RunInfo { threads: rayon::current_num_threads(), timings: Vec::new() },
        }
    }

    pub fn time(&mut self, stage: &str, seconds: f64) {
        self.run.timings.push(StageTiming { stage: stage.into(), seconds });
    }
}
