//! `canopy inventory`: rasters in, crowns and stand carbon out.

use std::path::Path;
use std::time::Instant;

use canopy_core::economics::compare;
use serde_json::json;

use super::{finish, read_raster, survey_rows, write_tif};
use crate::config::Config;
use crate::error::CliError;
use crate::heatmap::{encode_png, render_heatmap, Palette};
use crate::manifest::RunManifest;
use crate::output::{crowns_geojson, json_text, trees_csv, OutputDir};
use crate::params::{cost_models, pipeline_params, Inputs, PIPELINE_KEYS};
use crate::pipeline::{run_pipeline, PipelineParams, SpeciesSource};

pub const INVENTORY_KEYS: &[&str] = &[
    "inputs.dsm",
    "inputs.dem",
    "inputs.red",
    "inputs.green",
    "inputs.blue",
    "inputs.nir",
    "inputs.bands",
    "inputs.species_map",
    "inputs.cost_models",
    "output.heatmaps",
];

pub fn run_inventory(cfg: &Config, out: &Path) -> Result<RunManifest, CliError> {
    let started = Instant::now();
    let known: Vec<&str> = INVENTORY_KEYS.iter().chain(PIPELINE_KEYS).copied().collect();
    cfg.check_known(&known)?;
    let mut manifest = RunManifest::new("inventory", cfg);
    let mut inputs = Inputs::default();

    let dsm = read_raster(cfg, &mut inputs, "inputs.dsm", None)?;
    let dem = read_raster(cfg, &mut inputs, "inputs.dem", None)?;
    let (params, model_id) = pipeline_params(cfg, &PipelineParams::default(), &mut inputs)?;
    let costs = cost_models(cfg, &mut inputs, "inputs.cost_models")?;
    let heatmaps = cfg.bool_or("output.heatmaps", true)?;

    let bands: Vec<_>;
    let map;
    let source = if cfg.get("inputs.species_map").is_some() {
        map = read_raster(cfg, &mut inputs, "inputs.species_map", None)?;
        manifest.bypassed_stages.push("spectral".into());
        SpeciesSource::Map(&map)
    } else {
        bands = if cfg.get("inputs.bands").is_some() {
            (0..4).map(|b| read_raster(cfg, &mut inputs, "inputs.bands", Some(b))).collect::<Result<_, _>>()?
        } else {
            ["inputs.red", "inputs.green", "inputs.blue", "inputs.nir"]
                .iter()
                .map(|f| read_raster(cfg, &mut inputs, f, None))
                .collect::<Result<_, _>>()?
        };
        SpeciesSource::Bands([&bands[0], &bands[1], &bands[2], &bands[3]])
    };
    manifest.time("read", started.elapsed().as_secs_f64());

    let inv = run_pipeline(&dsm, &dem, source, &params)?;
    for (stage, s) in &inv.timings {
        manifest.time(stage, *s);
    }

    let clock = Instant::now();
    let mut dir = OutputDir::create(out)?;
    write_tif(&mut dir, "chm.tif", &inv.chm)?;
    write_tif(&mut dir, "species.tif", &inv.species_map)?;
    dir.write("crowns.geojson", crowns_geojson(&inv.delineation, &inv.trees).as_bytes())?;
    dir.write("trees.csv", trees_csv(&inv.delineation.records, &inv.trees).as_bytes())?;
    let report = json!({
        "model": model_id,
        "carbon_fraction": params.carbon_fraction,
        "species_source": if manifest.bypassed_stages.is_empty() { "bands" } else { "species_map" },
        "chm_resolution_m": inv.chm.geotransform().pixel_size_x.abs(),
        "dem_resolution_m": dem.geotransform().pixel_size_x.abs(),
        "area_ha": inv.area_ha,
        "stand": inv.stand,
        "census": inv.census,
    });
    dir.write("stand_carbon.json", json_text(&report).as_bytes())?;
    let comparison = compare(&costs.offset, &inv.stand).map_err(|e| CliError::stage("economics", e.to_string()))?;
    let survey = survey_rows(&costs.survey, inv.area_ha)?;
    let costs_report = json!({
        "area_ha": inv.area_ha,
        "survey": survey,
        "offset": comparison,
        "offset_models": costs.offset,
    });
    dir.write("costs.json", json_text(&costs_report).as_bytes())?;
    if heatmaps {
        dir.write("chm.png", &encode_png(&render_heatmap(&inv.chm, &Palette::viridis()))?)?;
        dir.write("species.png", &encode_png(&render_heatmap(&inv.species_map, &Palette::species()))?)?;
    }
    manifest.time("write", clock.elapsed().as_secs_f64());
    finish(manifest, inputs, dir, started)
}
