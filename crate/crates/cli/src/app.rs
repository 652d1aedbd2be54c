//! Argument parsing and dispatch. Flags override config-file values.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{benchmark, costs, inventory, synth};
use crate::config::Config;
use crate::error::CliError;
use crate::manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "canopy", version, about = "Forest inventory and carbon accounting from drone-survey rasters")]
pub struct Cli {
    /// Worker threads for parallel stages; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Config file of `key = value` lines under `[section]` headers.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config field; repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derive the CHM, species map, crowns and stand carbon from rasters.
    Inventory {
        #[command(flatten)]
        common: Common,
        /// Surface model GeoTIFF (inputs.dsm).
        #[arg(long)]
        dsm: Option<String>,
        /// Terrain model GeoTIFF (inputs.dem).
        #[arg(long)]
        dem: Option<String>,
        /// Red reflectance GeoTIFF (inputs.red).
        #[arg(long)]
        red: Option<String>,
        /// Green reflectance GeoTIFF (inputs.green).
        #[arg(long)]
        green: Option<String>,
        /// Blue reflectance GeoTIFF (inputs.blue).
        #[arg(long)]
        blue: Option<String>,
        /// Near-infrared reflectance GeoTIFF (inputs.nir).
        #[arg(long)]
        nir: Option<String>,
        /// One 4-band (red, green, blue, NIR) GeoTIFF instead of four files.
        #[arg(long)]
        bands: Option<String>,
        /// Precomputed species map; skips spectral classification.
        #[arg(long)]
        species_map: Option<String>,
        /// Species table CSV (inputs.signatures).
        #[arg(long)]
        signatures: Option<String>,
        /// Extra allometric models CSV (inputs.registry).
        #[arg(long)]
        registry: Option<String>,
        /// Cost models CSV (inputs.cost_models).
        #[arg(long)]
        cost_models: Option<String>,
        /// Vegetation NDVI cut (spectral.ndvi_threshold).
        #[arg(long)]
        ndvi_threshold: Option<String>,
        /// Raise negative heights to 0: true or false (chm.clamp_negative).
        #[arg(long)]
        chm_clamp: Option<String>,
        /// Heights above this become nodata (chm.max_plausible_height).
        #[arg(long)]
        chm_max_height: Option<String>,
        /// Median radius in pixels, 0 for none (chm.smooth_radius).
        #[arg(long)]
        chm_smooth_radius: Option<String>,
        /// Allometric model id (allometry.model).
        #[arg(long)]
        model: Option<String>,
    },
    /// Score census, plot kriging and their ensemble on a synthetic scene.
    Benchmark {
        #[command(flatten)]
        common: Common,
        /// Scene seed (synth.seed).
        #[arg(long)]
        seed: Option<String>,
        /// Also run the plot-spacing sweep.
        #[arg(long)]
        sweep: bool,
        /// Species table CSV (inputs.signatures).
        #[arg(long)]
        signatures: Option<String>,
        /// Extra allometric models CSV (inputs.registry).
        #[arg(long)]
        registry: Option<String>,
        /// Allometric model id (allometry.model).
        #[arg(long)]
        model: Option<String>,
    },
    /// Generate a synthetic scene with rasters and ground truth.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Scene seed (synth.seed).
        #[arg(long)]
        seed: Option<String>,
        /// default, crown_oracle, noisy_overlapping or heterogeneous_reference (synth.preset).
        #[arg(long)]
        preset: Option<String>,
        /// Species table CSV (inputs.signatures).
        #[arg(long)]
        signatures: Option<String>,
    },
    /// Survey and carbon-offset cost report.
    Costs {
        #[command(flatten)]
        common: Common,
        /// Cost models CSV (inputs.cost_models).
        #[arg(long)]
        cost_models: Option<String>,
        /// Surveyed hectares (costs.area_ha).
        #[arg(long)]
        area_ha: Option<String>,
        /// Tonnes of CO2e to offset (costs.tco2e).
        #[arg(long)]
        tco2e: Option<String>,
        /// A stand_carbon.json supplying area and tonnage.
        #[arg(long)]
        stand: Option<String>,
    },
}

fn load(common: &Common, default_section: Option<&str>, flags: &[(&str, &Option<String>)]) -> Result<Config, CliError> {
    let mut cfg = match &common.config {
        Some(p) => Config::load(p, default_section)?,
        None => Config::default(),
    };
    for s in &common.set {
        cfg.set_assignment(s)?;
    }
    for (key, v) in flags {
        if let Some(v) = v {
            cfg.set(key, v.as_str())?;
        }
    }
    Ok(cfg)
}

/// What a successful command reports on stdout.
pub enum Outcome {
    Manifest(RunManifest),
    Text(RunManifest, String),
}

pub fn execute(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::Inventory {
            common,
            dsm,
            dem,
            red,
            green,
            blue,
            nir,
            bands,
            species_map,
            signatures,
            registry,
            cost_models,
            ndvi_threshold,
            chm_clamp,
            chm_max_height,
            chm_smooth_radius,
            model,
        } => {
            let cfg = load(common, None, &[
                ("inputs.dsm", dsm),
                ("inputs.dem", dem),
                ("inputs.red", red),
                ("inputs.green", green),
                ("inputs.blue", blue),
                ("inputs.nir", nir),
                ("inputs.bands", bands),
                ("inputs.species_map", species_map),
                ("inputs.signatures", signatures),
                ("inputs.registry", registry),
                ("inputs.cost_models", cost_models),
                ("spectral.ndvi_threshold", ndvi_threshold),
                ("chm.clamp_negative", chm_clamp),
                ("chm.max_plausible_height", chm_max_height),
                ("chm.smooth_radius", chm_smooth_radius),
                ("allometry.model", model),
            ])?;
            inventory::run_inventory(&cfg, &common.out).map(Outcome::Manifest)
        }
        Command::Benchmark { common, seed, sweep, signatures, registry, model } => {
            let sweep = sweep.then(|| "true".to_string());
            let cfg = load(common, None, &[
                ("synth.seed", seed),
                ("sweep.enabled", &sweep),
                ("inputs.signatures", signatures),
                ("inputs.registry", registry),
                ("allometry.model", model),
            ])?;
            benchmark::run_benchmark(&cfg, &common.out).map(Outcome::Manifest)
        }
        Command::Synth { common, seed, preset, signatures } => {
            let cfg = load(common, Some("synth"), &[
                ("synth.seed", seed),
                ("synth.preset", preset),
                ("inputs.signatures", signatures),
            ])?;
            synth::run_synth(&cfg, &common.out).map(Outcome::Manifest)
        }
        Command::Costs { common, cost_models, area_ha, tco2e, stand } => {
            let cfg = load(common, None, &[
                ("inputs.cost_models", cost_models),
                ("costs.area_ha", area_ha),
                ("costs.tco2e", tco2e),
                ("inputs.stand", stand),
            ])?;
            costs::run_costs(&cfg, &common.out).map(|(m, t)| Outcome::Text(m, t))
        }
    }
}

/// Run with an explicit thread cap; `None` uses rayon's default pool.
pub fn execute_with_threads(command: &Command, threads: Option<usize>) -> Result<Outcome, CliError> {
    match threads {
        None => execute(command),
        Some(0) => Err(CliError::config("threads", "--threads must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::config("threads", e.to_string()))?;
            pool.install(|| execute(command))
        }
    }
}

/// Parse `args`, run, print the outcome, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute_with_threads(&cli.command, cli.threads) {
        Ok(Outcome::Manifest(m)) => {
            println!("{}: wrote {} files and manifest.json", m.command, m.outputs.len());
            0
        }
        Ok(Outcome::Text(m, text)) => {
            print!("{text}");
            println!("{}: wrote {} files and manifest.json", m.command, m.outputs.len());
            0
        }
        Err(e) => {
            eprintln!("{}", e.report());
            e.exit_code()
        }
    }
}
