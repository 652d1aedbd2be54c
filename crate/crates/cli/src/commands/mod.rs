//! One module per subcommand. Each takes the effective configuration and an
//! output directory and returns the run manifest it wrote.

pub mod benchmark;
pub mod costs;
pub mod inventory;
pub mod synth;

use std::time::Instant;

use canopy_core::economics::{survey_cost, SurveyCost, SurveyCostModel};
use canopy_core::raster::{read_geotiff, read_geotiff_band, write_geotiff, Grid};
use serde::Serialize;

use crate::config::Config;
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::output::{json_text, OutputDir};
use crate::params::Inputs;

/// Read a GeoTIFF named by `field`, or one band of it.
pub(crate) fn read_raster(cfg: &Config, inputs: &mut Inputs, field: &str, band: Option<usize>) -> Result<Grid, CliError> {
    let bytes = inputs.read(cfg, field)?;
    let grid = match band {
        None => read_geotiff(&bytes),
        Some(b) => read_geotiff_band(&bytes, b),
    };
    grid.map_err(|e| CliError::input(field, format!("{field}: {e}")))
}

pub(crate) fn write_tif(dir: &mut OutputDir, name: &str, grid: &Grid) -> Result<(), CliError> {
    let bytes = write_geotiff(grid).map_err(|e| CliError::stage("output", format!("{name}: {e}")))?;
    dir.write(name, &bytes)
}

/// Finish a run: record inputs and outputs, then write `manifest.json`,
/// which is not listed in itself.
pub(crate) fn finish(mut manifest: RunManifest, inputs: Inputs, mut dir: OutputDir, started: Instant) -> Result<RunManifest, CliError> {
    manifest.inputs = inputs.records;
    manifest.outputs =
        dir.files().iter().map(|(f, h)| crate::manifest::FileRecord { path: f.clone(), sha256: h.clone() }).collect();
    manifest.time("total", started.elapsed().as_secs_f64());
    dir.write("manifest.json", json_text(&manifest).as_bytes())?;
    Ok(manifest)
}

#[derive(Debug, Serialize)]
pub(crate) struct SurveyRow {
    method: String,
    #[serde(flatten)]
    cost: SurveyCost,
}

pub(crate) fn survey_rows(models: &[SurveyCostModel], area_ha: f64) -> Result<Vec<SurveyRow>, CliError> {
    models
        .iter()
        .map(|m| survey_cost(area_ha, m).map(|cost| SurveyRow { method: m.method.clone(), cost }))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::stage("economics", e.to_string()))
}
