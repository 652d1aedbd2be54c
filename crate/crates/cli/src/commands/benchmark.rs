//! `canopy benchmark`: census, plot kriging and their ensemble scored
//! against the ground truth of a synthetic scene, plus an optional sweep of
//! plot spacing on truth-only forests.

use std::path::Path;
use std::time::Instant;

use canopy_core::allometry::AllometricModel;
use canopy_core::raster::{GeoTransform, RasterHeader, SampleType};
use canopy_core::spatial::{
    census_estimate, ensemble, error_report, fit_variogram, krige, plots_to_csv, sample_plots, EnsembleEstimate,
    ErrorReport, GroundPlot, OrdinaryKriging, PlotParams, SpatialError, StemRecord, VariogramModel, DEFAULT_RECALL,
};
use canopy_core::synthforest::{generate, render, GroundTruth, SynthParams};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::{finish, write_tif};
use crate::config::{Config, ConfigError};
use crate::error::CliError;
use crate::eval::{match_trees, Detection};
use crate::heatmap::{encode_png, render_heatmap, Palette};
use crate::manifest::RunManifest;
use crate::output::{json_text, OutputDir};
use crate::params::{pipeline_params, synth_params, Inputs, PIPELINE_KEYS, SYNTH_KEYS};
use crate::pipeline::{run_pipeline, PipelineParams, SpeciesSource};

const KEYS: &[&str] = &[
    "benchmark.recall",
    "benchmark.block_cells",
    "benchmark.grid_resolution_m",
    "plots.spacing_m",
    "plots.radius_m",
    "sweep.enabled",
    "sweep.spacings_m",
    "sweep.seeds",
    "sweep.width_m",
    "sweep.height_m",
];

pub const DEFAULT_SWEEP_SPACINGS_M: &[f64] = &[90.0, 150.0, 250.0, 400.0, 600.0, 1000.0];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSettings {
    pub synth: SynthParams,
    pub pipeline: PipelineParams,
    pub model_id: String,
    pub plots: PlotParams,
    /// Detection recall assumed by the census variance model.
    pub recall: f64,
    /// The stand mean is block-kriged over `block_cells²` support points.
    pub block_cells: usize,
    /// Cell size of the kriged mean and variance rasters.
    pub grid_resolution_m: f64,
}

impl BenchmarkSettings {
    /// The heterogeneous reference scene at `seed`, census without CHM smoothing.
    pub fn reference(seed: u64) -> Self {
        let mut pipeline = PipelineParams::default();
        pipeline.chm.smooth_radius = 0;
        BenchmarkSettings {
            synth: SynthParams::heterogeneous_reference(seed),
            pipeline,
            model_id: "tropical_with_height".into(),
            plots: PlotParams::default(),
            recall: DEFAULT_RECALL,
            block_cells: 40,
            grid_resolution_m: 10.0,
        }
    }

    pub fn from_config(cfg: &Config, inputs: &mut Inputs) -> Result<Self, CliError> {
        let base = BenchmarkSettings::reference(1);
        let synth = synth_params(cfg, "heterogeneous_reference", inputs)?;
        let (pipeline, model_id) = pipeline_params(cfg, &base.pipeline, inputs)?;
        let plots = PlotParams {
            spacing_m: cfg.parse_or("plots.spacing_m", base.plots.spacing_m)?,
            radius_m: cfg.parse_or("plots.radius_m", base.plots.radius_m)?,
            enforce_protocol_radius: true,
        };
        plots.validate().map_err(|e| ConfigError::field("plots", e.to_string()))?;
        let recall = cfg.parse_or("benchmark.recall", base.recall)?;
        if !(recall > 0.0 && recall <= 1.0) {
            return Err(ConfigError::field("benchmark.recall", format!("{recall} outside (0, 1]")).into());
        }
        let block_cells = cfg.parse_or("benchmark.block_cells", base.block_cells)?;
        if !(1..=200).contains(&block_cells) {
            return Err(ConfigError::field("benchmark.block_cells", "must be in 1..=200").into());
        }
        let grid_resolution_m = cfg.parse_or("benchmark.grid_resolution_m", base.grid_resolution_m)?;
        if !(grid_resolution_m > 0.0 && grid_resolution_m.is_finite()) {
            return Err(ConfigError::field("benchmark.grid_resolution_m", "must be positive").into());
        }
        Ok(BenchmarkSettings { synth, pipeline, model_id, plots, recall, block_cells, grid_resolution_m })
    }
}

/// Scene extent as `(xmin, ymin, xmax, ymax)`.
pub fn extent(p: &SynthParams) -> (f64, f64, f64, f64) {
    (p.origin.0, p.origin.1 - p.height_m, p.origin.0 + p.width_m, p.origin.1)
}

/// Cell centres of an `n × n` lattice over the extent.
pub fn block_support(ext: (f64, f64, f64, f64), n: usize) -> Vec<(f64, f64)> {
    let (dx, dy) = ((ext.2 - ext.0) / n as f64, (ext.3 - ext.1) / n as f64);
    (0..n * n).map(|i| (ext.0 + ((i % n) as f64 + 0.5) * dx, ext.1 + ((i / n) as f64 + 0.5) * dy)).collect()
}

fn stems(truth: &GroundTruth) -> Vec<StemRecord> {
    truth.trees.iter().map(|t| StemRecord { x: t.x, y: t.y, agb_kg: t.agb_kg }).collect()
}

fn spatial(e: SpatialError) -> CliError {
    CliError::stage("spatial", e.to_string())
}

/// Plot sample, fitted variogram and block estimate of the stand mean.
pub struct PlotEstimate {
    pub plots: Vec<GroundPlot>,
    pub variogram: VariogramModel,
    pub mean: f64,
    pub variance: f64,
}

pub fn plot_estimate(
    stems: &[StemRecord],
    ext: (f64, f64, f64, f64),
    plots: &PlotParams,
    block_cells: usize,
) -> Result<PlotEstimate, SpatialError> {
    let sample = sample_plots(stems, ext, plots)?;
    let variogram = fit_variogram(&sample)?;
    let b = OrdinaryKriging::new(&sample, variogram)?.block(&block_support(ext, block_cells));
    Ok(PlotEstimate { plots: sample, variogram, mean: b.mean, variance: b.variance })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodResult {
    #[serde(flatten)]
    pub report: ErrorReport,
    pub variance: f64,
    pub abs_error: f64,
}

impl MethodResult {
    fn new(mean: f64, variance: f64, truth: f64) -> Result<Self, SpatialError> {
        Ok(MethodResult { report: error_report(mean, variance, truth)?, variance, abs_error: (mean - truth).abs() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneOutcome {
    pub seed: u64,
    pub area_ha: f64,
    pub truth_agb_mg_ha: f64,
    pub truth_trees: usize,
    pub detected_trees: usize,
    pub detection: Detection,
    pub census: MethodResult,
    pub kriging: MethodResult,
    pub ensemble: MethodResult,
    pub ensemble_weights: (f64, f64),
    pub plot_count: usize,
    pub variogram: VariogramModel,
    #[serde(skip)]
    pub plots: Vec<GroundPlot>,
    #[serde(skip)]
    pub timings: Vec<(&'static str, f64)>,
}

/// Generate, render and inventory one scene, then score the census, the
/// plot kriging and their ensemble against the truth.
pub fn run_scene(s: &BenchmarkSettings) -> Result<SceneOutcome, CliError> {
    let mut timings = Vec::new();
    let clock = Instant::now();
    let truth = generate(&s.synth, &s.pipeline.model, s.pipeline.carbon_fraction).map_err(|e| CliError::stage("synth", e.to_string()))?;
    let scene = render(&truth, &s.synth);
    timings.push(("synth", clock.elapsed().as_secs_f64()));

    let inv = run_pipeline(&scene.dsm, &scene.dem, SpeciesSource::Bands(scene.bands()), &s.pipeline)?;
    timings.extend(inv.timings.iter().copied());

    let clock = Instant::now();
    let tv = truth.totals.agb_mg_per_ha;
    let agbs: Vec<f64> = inv.trees.iter().map(|t| t.agb_kg).collect();
    let (cm, cv) = census_estimate(&agbs, inv.area_ha, s.recall).map_err(spatial)?;
    let pe = plot_estimate(&stems(&truth), extent(&s.synth), &s.plots, s.block_cells).map_err(spatial)?;
    let e: EnsembleEstimate = ensemble(cm, cv, pe.mean, pe.variance).map_err(spatial)?;
    let detection = match_trees(&inv.delineation.records, &truth.trees, s.synth.resolution);
    timings.push(("spatial", clock.elapsed().as_secs_f64()));

    Ok(SceneOutcome {
        seed: s.synth.seed,
        area_ha: truth.area_ha,
        truth_agb_mg_ha: tv,
        truth_trees: truth.trees.len(),
        detected_trees: inv.trees.len(),
        detection,
        census: MethodResult::new(cm, cv, tv).map_err(spatial)?,
        kriging: MethodResult::new(pe.mean, pe.variance, tv).map_err(spatial)?,
        ensemble: MethodResult::new(e.combined.0, e.combined.1, tv).map_err(spatial)?,
        ensemble_weights: e.weights,
        plot_count: pe.plots.len(),
        variogram: pe.variogram,
        plots: pe.plots,
        timings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub spacings_m: Vec<f64>,
    /// Seeds `first_seed..first_seed + seeds`.
    pub seeds: u64,
    pub first_seed: u64,
    pub width_m: f64,
    pub height_m: f64,
}

impl SweepSettings {
    /// 4 × 3 km keeps at least 12 plots at the widest spacing, enough to fit
    /// a variogram.
    pub fn standard(first_seed: u64) -> Self {
        SweepSettings { spacings_m: DEFAULT_SWEEP_SPACINGS_M.to_vec(), seeds: 20, first_seed, width_m: 4000.0, height_m: 3000.0 }
    }

    fn from_config(cfg: &Config, first_seed: u64) -> Result<Option<Self>, CliError> {
        if !cfg.bool_or("sweep.enabled", false)? {
            return Ok(None);
        }
        let d = SweepSettings::standard(first_seed);
        let s = SweepSettings {
            spacings_m: cfg.list_or("sweep.spacings_m", &d.spacings_m)?,
            seeds: cfg.parse_or("sweep.seeds", d.seeds)?,
            first_seed,
            width_m: cfg.parse_or("sweep.width_m", d.width_m)?,
            height_m: cfg.parse_or("sweep.height_m", d.height_m)?,
        };
        if s.seeds == 0 || s.spacings_m.is_empty() {
            return Err(ConfigError::field("sweep", "needs at least one seed and one spacing").into());
        }
        Ok(Some(s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub spacing_m: f64,
    pub plot_count: usize,
    /// Root mean square of the relative error over seeds, percent.
    pub rmse_pct: f64,
    pub mean_abs_error: f64,
}

/// Plot-kriging error against spacing, on truth-only forests built from
/// `base` with the sweep's extent. Seeds run in parallel; results are
/// reduced in seed order.
pub fn spacing_sweep(
    base: &BenchmarkSettings,
    sw: &SweepSettings,
    model: &AllometricModel,
) -> Result<Vec<SweepRow>, CliError> {
    let per_seed: Vec<Vec<(usize, f64, f64)>> = (sw.first_seed..sw.first_seed + sw.seeds)
        .into_par_iter()
        .map(|seed| {
            let p = SynthParams {
                seed,
                width_m: sw.width_m,
                height_m: sw.height_m,
                // Truth only; the terrain raster is never rendered at full detail.
                resolution: 10.0,
                ..base.synth.clone()
            };
            let truth = generate(&p, model, base.pipeline.carbon_fraction).map_err(|e| CliError::stage("synth", e.to_string()))?;
            let st = stems(&truth);
            let tv = truth.totals.agb_mg_per_ha;
            sw.spacings_m
                .iter()
                .map(|&spacing_m| {
                    let plots = PlotParams { spacing_m, ..base.plots };
                    let pe = plot_estimate(&st, extent(&p), &plots, base.block_cells).map_err(spatial)?;
                    Ok((pe.plots.len(), (pe.mean - tv) / tv, (pe.mean - tv).abs()))
                })
                .collect()
        })
        .collect::<Result<_, CliError>>()?;
    let n = sw.seeds as f64;
    Ok(sw
        .spacings_m
        .iter()
        .enumerate()
        .map(|(k, &spacing_m)| SweepRow {
            spacing_m,
            plot_count: per_seed[0][k].0,
            rmse_pct: (per_seed.iter().map(|r| r[k].1 * r[k].1).sum::<f64>() / n).sqrt() * 100.0,
            mean_abs_error: per_seed.iter().map(|r| r[k].2).sum::<f64>() / n,
        })
        .collect())
}

pub fn run_benchmark(cfg: &Config, out: &Path) -> Result<RunManifest, CliError> {
    let started = Instant::now();
    let known: Vec<&str> = KEYS.iter().chain(PIPELINE_KEYS).chain(SYNTH_KEYS).copied().collect();
    cfg.check_known(&known)?;
    let mut manifest = RunManifest::new("benchmark", cfg);
    let mut inputs = Inputs::default();
    let s = BenchmarkSettings::from_config(cfg, &mut inputs)?;
    let sweep_settings = SweepSettings::from_config(cfg, s.synth.seed)?;

    let outcome = run_scene(&s)?;
    for (stage, t) in &outcome.timings {
        manifest.time(stage, *t);
    }
    let sweep = match &sweep_settings {
        Some(sw) => {
            let clock = Instant::now();
            let rows = spacing_sweep(&s, sw, &s.pipeline.model)?;
            manifest.time("sweep", clock.elapsed().as_secs_f64());
            Some(rows)
        }
        None => None,
    };

    let ext = extent(&s.synth);
    let cols = ((ext.2 - ext.0) / s.grid_resolution_m).ceil() as usize;
    let rows = ((ext.3 - ext.1) / s.grid_resolution_m).ceil() as usize;
    let header = RasterHeader::new(cols, rows, SampleType::Float32, GeoTransform::north_up(ext.0, ext.3, s.grid_resolution_m));
    let (mean, var) = krige(&outcome.plots, outcome.variogram, &header).map_err(spatial)?;

    let mut dir = OutputDir::create(out)?;
    let report = json!({
        "model": s.model_id,
        "plot_spacing_m": s.plots.spacing_m,
        "plot_radius_m": s.plots.radius_m,
        "recall": s.recall,
        "scene": outcome,
        "sweep": sweep.map(|rows| json!({
            "seeds": sweep_settings.as_ref().map(|w| w.seeds),
            "width_m": sweep_settings.as_ref().map(|w| w.width_m),
            "height_m": sweep_settings.as_ref().map(|w| w.height_m),
            "rows": rows,
        })),
    });
    dir.write("benchmark.json", json_text(&report).as_bytes())?;
    dir.write("plots.csv", plots_to_csv(&outcome.plots).as_bytes())?;
    write_tif(&mut dir, "kriging_mean.tif", &mean)?;
    write_tif(&mut dir, "kriging_variance.tif", &var)?;
    dir.write("kriging_mean.png", &encode_png(&render_heatmap(&mean, &Palette::viridis()))?)?;
    finish(manifest, inputs, dir, started)
}
