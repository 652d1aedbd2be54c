//! `canopy synth`: a synthetic scene with its ground truth.

use std::path::Path;
use std::time::Instant;

use canopy_core::species::species_to_csv;
use canopy_core::synthforest::{generate, render, truth_to_csv, SynthParams};
use serde_json::json;

use super::{finish, write_tif};
use crate::config::Config;
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::output::{json_text, OutputDir};
use crate::params::{allometric_model, carbon_fraction, model_registry, synth_params, Inputs, SYNTH_KEYS};

const KEYS: &[&str] = &["inputs.signatures", "inputs.registry", "allometry.model", "allometry.carbon_fraction"];

/// Inventory config that runs the pipeline on the scene's own files.
pub const SCENE_INVENTORY_INI: &str = "[inputs]
dsm = dsm.tif
dem = dem.tif
red = red.tif
green = green.tif
blue = blue.tif
nir = nir.tif
signatures = signatures.csv
";

fn params_json(p: &SynthParams) -> serde_json::Value {
    json!({
        "seed": p.seed,
        "width_m": p.width_m,
        "height_m": p.height_m,
        "origin": [p.origin.0, p.origin.1],
        "resolution": p.resolution,
        "stems_per_ha": p.stems_per_ha,
        "proportions": p.species.iter().map(|s| (s.0.species_id, s.1)).collect::<Vec<_>>(),
        "height_median_m": p.height_mu.exp(),
        "height_sigma": p.height_sigma,
        "min_height": p.min_height,
        "max_height": p.max_height,
        "dbh_a": p.dbh_a,
        "dbh_b": p.dbh_b,
        "hard_core_factor": p.hard_core_factor,
        "non_overlapping": p.non_overlapping,
        "heterogeneity": p.heterogeneity,
        "heterogeneity_scale_m": p.heterogeneity_scale_m,
        "terrain_base_m": p.terrain_base_m,
        "terrain_amplitude_m": p.terrain_amplitude_m,
        "terrain_components": p.terrain_components,
        "spectral_noise": p.spectral_noise,
    })
}

pub fn run_synth(cfg: &Config, out: &Path) -> Result<RunManifest, CliError> {
    let started = Instant::now();
    let known: Vec<&str> = KEYS.iter().chain(SYNTH_KEYS).copied().collect();
    cfg.check_known(&known)?;
    let mut manifest = RunManifest::new("synth", cfg);
    let mut inputs = Inputs::default();
    let p = synth_params(cfg, "default", &mut inputs)?;
    let registry = model_registry(cfg, &mut inputs)?;
    let (model_id, model) = allometric_model(cfg, &registry)?;
    let fraction = carbon_fraction(cfg)?;

    let clock = Instant::now();
    let truth = generate(&p, &model, fraction).map_err(|e| CliError::stage("synth", e.to_string()))?;
    manifest.time("generate", clock.elapsed().as_secs_f64());
    let clock = Instant::now();
    let scene = render(&truth, &p);
    manifest.time("render", clock.elapsed().as_secs_f64());

    let clock = Instant::now();
    let mut dir = OutputDir::create(out)?;
    for (name, g) in [
        ("dsm.tif", &scene.dsm),
        ("dem.tif", &scene.dem),
        ("red.tif", &scene.red),
        ("green.tif", &scene.green),
        ("blue.tif", &scene.blue),
        ("nir.tif", &scene.nir),
    ] {
        write_tif(&mut dir, name, g)?;
    }
    dir.write("truth.csv", truth_to_csv(&truth.trees).as_bytes())?;
    let table: Vec<_> = p.species.iter().map(|s| s.0.clone()).collect();
    dir.write("signatures.csv", species_to_csv(&table).as_bytes())?;
    let summary = json!({
        "model": model_id,
        "carbon_fraction": fraction,
        "tree_count": truth.trees.len(),
        "area_ha": truth.area_ha,
        "totals": truth.totals,
        "params": params_json(&p),
    });
    dir.write("truth.json", json_text(&summary).as_bytes())?;
    dir.write("inventory.ini", SCENE_INVENTORY_INI.as_bytes())?;
    manifest.time("write", clock.elapsed().as_secs_f64());
    finish(manifest, inputs, dir, started)
}
