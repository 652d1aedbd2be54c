//! Configuration fields to module parameters, and loading of the shared
//! table inputs (signatures, model registry, cost models).

use std::collections::BTreeMap;
use std::path::Path;

use canopy_core::allometry::{AllometricModel, ModelRegistry, DEFAULT_CARBON_FRACTION};
use canopy_core::chm::ChmParams;
use canopy_core::crowns::CrownParams;
use canopy_core::economics::{parse_cost_models, CostModels};
use canopy_core::species::{default_species, parse_species_csv, SpeciesParams};
use canopy_core::synthforest::SynthParams;

use crate::config::{Config, ConfigError};
use crate::error::CliError;
use crate::manifest::FileRecord;
use crate::output::sha256_hex;
use crate::pipeline::PipelineParams;

pub const PIPELINE_KEYS: &[&str] = &[
    "inputs.signatures",
    "inputs.registry",
    "chm.clamp_negative",
    "chm.max_plausible_height",
    "chm.smooth_radius",
    "spectral.ndvi_threshold",
    "spectral.majority_radius",
    "crowns.min_tree_height",
    "crowns.window_fraction",
    "crowns.min_window_radius",
    "crowns.crown_floor_fraction",
    "allometry.model",
    "allometry.carbon_fraction",
];

pub const SYNTH_KEYS: &[&str] = &[
    "synth.preset",
    "synth.seed",
    "synth.width_m",
    "synth.height_m",
    "synth.origin_x",
    "synth.origin_y",
    "synth.resolution",
    "synth.stems_per_ha",
    "synth.proportions",
    "synth.height_median_m",
    "synth.height_sigma",
    "synth.min_height",
    "synth.max_height",
    "synth.dbh_a",
    "synth.dbh_b",
    "synth.hard_core_factor",
    "synth.non_overlapping",
    "synth.heterogeneity",
    "synth.heterogeneity_scale_m",
    "synth.terrain_base_m",
    "synth.terrain_amplitude_m",
    "synth.terrain_components",
    "synth.spectral_noise",
];

/// Bytes of every input file read during a run, keyed by config field.
#[derive(Debug, Default)]
pub struct Inputs {
    pub records: BTreeMap<String, FileRecord>,
}

impl Inputs {
    /// Read the file named by `field`; a missing file is a config error.
    pub fn read(&mut self, cfg: &Config, field: &str) -> Result<Vec<u8>, CliError> {
        let path = cfg.require_path(field)?;
        self.read_path(field, &path)
    }

    pub fn read_optional(&mut self, cfg: &Config, field: &str) -> Result<Option<Vec<u8>>, CliError> {
        match cfg.path(field) {
            Some(path) => self.read_path(field, &path).map(Some),
            None => Ok(None),
        }
    }

    fn read_path(&mut self, field: &str, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::config(field, format!("{field}: cannot read {}: {e}", path.display())))?;
        self.records.insert(field.into(), FileRecord { path: path.display().to_string(), sha256: sha256_hex(&bytes) });
        Ok(bytes)
    }
}

fn utf8(field: &str, bytes: Vec<u8>) -> Result<String, CliError> {
    String::from_utf8(bytes).map_err(|_| CliError::input(field, format!("{field}: not UTF-8 text")))
}

pub fn species_table(cfg: &Config, inputs: &mut Inputs) -> Result<Vec<SpeciesParams>, CliError> {
    const F: &str = "inputs.signatures";
    match inputs.read_optional(cfg, F)? {
        None => Ok(default_species()),
        Some(b) => parse_species_csv(&utf8(F, b)?).map_err(|e| CliError::input(F, format!("{F}: {e}"))),
    }
}

pub fn model_registry(cfg: &Config, inputs: &mut Inputs) -> Result<ModelRegistry, CliError> {
    const F: &str = "inputs.registry";
    let mut reg = ModelRegistry::default();
    if let Some(b) = inputs.read_optional(cfg, F)? {
        reg.merge(ModelRegistry::parse_csv(&utf8(F, b)?).map_err(|e| CliError::input(F, format!("{F}: {e}")))?);
    }
    Ok(reg)
}

pub fn cost_models(cfg: &Config, inputs: &mut Inputs, field: &str) -> Result<CostModels, CliError> {
    match inputs.read_optional(cfg, field)? {
        None => Ok(CostModels::default()),
        Some(b) => parse_cost_models(&utf8(field, b)?).map_err(|e| CliError::input(field, format!("{field}: {e}"))),
    }
}

/// Model id and model named by `allometry.model`.
pub fn allometric_model(cfg: &Config, registry: &ModelRegistry) -> Result<(String, AllometricModel), CliError> {
    let id = cfg.get("allometry.model").unwrap_or("tropical_with_height").to_string();
    let model = registry.get(&id).map_err(|e| ConfigError::field("allometry.model", e.to_string()))?.clone();
    Ok((id, model))
}

pub fn carbon_fraction(cfg: &Config) -> Result<f64, CliError> {
    let f = cfg.parse_or("allometry.carbon_fraction", DEFAULT_CARBON_FRACTION)?;
    if !(f > 0.0 && f <= 1.0) {
        return Err(ConfigError::field("allometry.carbon_fraction", format!("{f} outside (0, 1]")).into());
    }
    Ok(f)
}

/// Pipeline parameters from the config, starting from `base`.
pub fn pipeline_params(
    cfg: &Config,
    base: &PipelineParams,
    inputs: &mut Inputs,
) -> Result<(PipelineParams, String), CliError> {
    let field = |k: &str, e: String| CliError::from(ConfigError::field(k, e));
    let chm = ChmParams {
        clamp_negative: cfg.bool_or("chm.clamp_negative", base.chm.clamp_negative)?,
        max_plausible_height: cfg.parse_or("chm.max_plausible_height", base.chm.max_plausible_height)?,
        smooth_radius: cfg.parse_or("chm.smooth_radius", base.chm.smooth_radius)?,
    };
    chm.validate().map_err(|e| field("chm.max_plausible_height", e.to_string()))?;
    let crowns = CrownParams {
        min_tree_height: cfg.parse_or("crowns.min_tree_height", base.crowns.min_tree_height)?,
        window_fraction: cfg.parse_or("crowns.window_fraction", base.crowns.window_fraction)?,
        min_window_radius: cfg.parse_or("crowns.min_window_radius", base.crowns.min_window_radius)?,
        crown_floor_fraction: cfg.parse_or("crowns.crown_floor_fraction", base.crowns.crown_floor_fraction)?,
    };
    crowns.validate().map_err(|e| field("crowns", e.to_string()))?;
    let ndvi_threshold: f32 = cfg.parse_or("spectral.ndvi_threshold", base.ndvi_threshold)?;
    if !(-1.0..=1.0).contains(&ndvi_threshold) {
        return Err(field("spectral.ndvi_threshold", format!("{ndvi_threshold} outside [-1, 1]")));
    }
    let majority_radius = cfg.parse_or("spectral.majority_radius", base.majority_radius)?;
    let species = species_table(cfg, inputs)?;
    let registry = model_registry(cfg, inputs)?;
    let (model_id, model) = allometric_model(cfg, &registry)?;
    let carbon_fraction = carbon_fraction(cfg)?;
    Ok((PipelineParams { chm, crowns, ndvi_threshold, majority_radius, species, model, carbon_fraction }, model_id))
}

pub fn preset(name: &str, seed: u64) -> Option<SynthParams> {
    Some(match name {
        "default" | "noisy_overlapping" => SynthParams::noisy_overlapping(seed),
        "crown_oracle" => SynthParams::crown_oracle(seed),
        "heterogeneous_reference" => SynthParams::heterogeneous_reference(seed),
        _ => return None,
    })
}

/// Synthetic-scene parameters: a preset, then individual `synth.*` fields.
/// Species come from `inputs.signatures` with `synth.proportions` in table order.
pub fn synth_params(cfg: &Config, default_preset: &str, inputs: &mut Inputs) -> Result<SynthParams, CliError> {
    let seed = cfg.parse_or("synth.seed", 1u64)?;
    let name = cfg.get("synth.preset").unwrap_or(default_preset);
    let b = preset(name, seed).ok_or_else(|| ConfigError::field("synth.preset", format!("unknown preset {name:?}")))?;
    let species = if cfg.get("inputs.signatures").is_some() || cfg.get("synth.proportions").is_some() {
        let table = species_table(cfg, inputs)?;
        let even = vec![1.0 / table.len() as f64; table.len()];
        let props = cfg.list_or("synth.proportions", &even)?;
        if props.len() != table.len() {
            return Err(ConfigError::field(
                "synth.proportions",
                format!("{} proportions for {} species", props.len(), table.len()),
            )
            .into());
        }
        table.into_iter().zip(props).collect()
    } else {
        b.species.clone()
    };
    let p = SynthParams {
        seed,
        width_m: cfg.parse_or("synth.width_m", b.width_m)?,
        height_m: cfg.parse_or("synth.height_m", b.height_m)?,
        origin: (cfg.parse_or("synth.origin_x", b.origin.0)?, cfg.parse_or("synth.origin_y", b.origin.1)?),
        resolution: cfg.parse_or("synth.resolution", b.resolution)?,
        stems_per_ha: cfg.parse_or("synth.stems_per_ha", b.stems_per_ha)?,
        species,
        height_mu: cfg.parse_or("synth.height_median_m", b.height_mu.exp())?.ln(),
        height_sigma: cfg.parse_or("synth.height_sigma", b.height_sigma)?,
        min_height: cfg.parse_or("synth.min_height", b.min_height)?,
        max_height: cfg.parse_or("synth.max_height", b.max_height)?,
        dbh_a: cfg.parse_or("synth.dbh_a", b.dbh_a)?,
        dbh_b: cfg.parse_or("synth.dbh_b", b.dbh_b)?,
        hard_core_factor: cfg.parse_or("synth.hard_core_factor", b.hard_core_factor)?,
        non_overlapping: cfg.bool_or("synth.non_overlapping", b.non_overlapping)?,
        heterogeneity: cfg.parse_or("synth.heterogeneity", b.heterogeneity)?,
        heterogeneity_scale_m: cfg.parse_or("synth.heterogeneity_scale_m", b.heterogeneity_scale_m)?,
        terrain_base_m: cfg.parse_or("synth.terrain_base_m", b.terrain_base_m)?,
        terrain_amplitude_m: cfg.parse_or("synth.terrain_amplitude_m", b.terrain_amplitude_m)?,
        terrain_components: cfg.parse_or("synth.terrain_components", b.terrain_components)?,
        spectral_noise: cfg.parse_or("synth.spectral_noise", b.spectral_noise)?,
    };
    p.validate().map_err(|e| ConfigError::field("synth", e.to_string()))?;
    Ok(p)
}
