//! The inventory stages, from elevation and spectral rasters to stand carbon.

use std::time::Instant;

use canopy_core::allometry::{tree_biomass, AllometricModel, AllometryError, StandCarbon, TreeBiomass, stand_totals};
use canopy_core::chm::{derive_chm, ChmError, ChmParams};
use canopy_core::crowns::{census, detect_treetops, watershed_crowns, CensusSummary, CrownError, CrownParams, Delineation};
use canopy_core::grid::{align, GridError, Resample};
use canopy_core::raster::Grid;
use canopy_core::species::SpeciesParams;
use canopy_core::spectral::{classify_pixels, majority_filter, SpectralError, DEFAULT_NDVI_THRESHOLD};

#[derive(Debug, thiserror::Error)]
pub enum StageError {
    #[error("chm stage: {0}")]
    Chm(#[from] ChmError),
    #[error("spectral stage: {0}")]
    Spectral(#[from] SpectralError),
    #[error("crown stage: {0}")]
    Crowns(#[from] CrownError),
    #[error("allometry stage: {0}")]
    Allometry(#[from] AllometryError),
    #[error("alignment: {0}")]
    Grid(#[from] GridError),
}

impl StageError {
    pub fn stage(&self) -> &'static str {
        match self {
            StageError::Chm(_) => "chm",
            StageError::Spectral(_) => "spectral",
            StageError::Crowns(_) => "crowns",
            StageError::Allometry(_) => "allometry",
            StageError::Grid(_) => "alignment",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineParams {
    pub chm: ChmParams,
    pub crowns: CrownParams,
    pub ndvi_threshold: f32,
    /// Majority-filter radius in pixels for the species map; 0 disables it.
    pub majority_radius: usize,
    pub species: Vec<SpeciesParams>,
    pub model: AllometricModel,
    pub carbon_fraction: f64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            chm: ChmParams::default(),
            crowns: CrownParams::default(),
            ndvi_threshold: DEFAULT_NDVI_THRESHOLD,
            majority_radius: 1,
            species: canopy_core::species::default_species(),
            model: AllometricModel::tropical_with_height(),
            carbon_fraction: canopy_core::allometry::DEFAULT_CARBON_FRACTION,
        }
    }
}

pub enum SpeciesSource<'a> {
    /// Red, green, blue and NIR reflectance.
    Bands([&'a Grid; 4]),
    /// A precomputed species map, bypassing classification.
    Map(&'a Grid),
}

#[derive(Debug, Clone)]
pub struct Inventory {
    pub chm: Grid,
    pub species_map: Grid,
    pub delineation: Delineation,
    pub trees: Vec<TreeBiomass>,
    pub stand: StandCarbon,
    pub census: CensusSummary,
    /// Hectares of valid CHM.
    pub area_ha: f64,
    /// Wall-clock seconds per stage, in run order.
    pub timings: Vec<(&'static str, f64)>,
}

/// Parameters for crowns whose species could not be determined: mean wood
/// density and bridge coefficients of the table.
fn generic_species(table: &[SpeciesParams]) -> SpeciesParams {
    let n = table.len() as f64;
    let mut g = table[0].clone();
    g.species_id = 0;
    g.label = "unclassified".into();
    g.wood_density = table.iter().map(|s| s.wood_density).sum::<f64>() / n;
    g.crown_dbh_a = table.iter().map(|s| s.crown_dbh_a).sum::<f64>() / n;
    g.crown_dbh_b = table.iter().map(|s| s.crown_dbh_b).sum::<f64>() / n;
    g
}

pub fn run_pipeline(dsm: &Grid, dem: &Grid, source: SpeciesSource<'_>, p: &PipelineParams) -> Result<Inventory, StageError> {
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &'static str, timings: &mut Vec<(&'static str, f64)>| {
        timings.push((name, clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };

    let chm = derive_chm(dsm, dem, &p.chm)?;
    lap("chm", &mut timings);

    let species_map = match source {
        SpeciesSource::Bands(bands) => {
            let aligned: Vec<Grid> =
                bands.iter().map(|b| align(&chm, b, Resample::Bilinear).map(|pair| pair.b)).collect::<Result<_, _>>()?;
            let signatures: Vec<_> = p.species.iter().map(SpeciesParams::signature).collect();
            let raw = classify_pixels([&aligned[0], &aligned[1], &aligned[2], &aligned[3]], &signatures, p.ndvi_threshold)?;
            if p.majority_radius > 0 {
                majority_filter(&raw, p.majority_radius)
            } else {
                raw
            }
        }
        SpeciesSource::Map(map) => align(&chm, map, Resample::Nearest)?.b,
    };
    lap("species", &mut timings);

    let tops = detect_treetops(&chm, &p.crowns)?;
    let delineation = watershed_crowns(&chm, &tops, &species_map, &p.crowns)?;
    lap("crowns", &mut timings);

    let generic = generic_species(&p.species);
    let trees = delineation
        .records
        .iter()
        .map(|r| {
            let sp = p.species.iter().find(|s| s.species_id == r.species_id).unwrap_or(&generic);
            tree_biomass(r.tree_id, r.crown_diameter, r.top.height, sp, &p.model, p.carbon_fraction)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let valid = chm.to_f32_vec().iter().filter(|v| !v.is_nan()).count();
    let area_ha = valid as f64 * chm.geotransform().pixel_area() / 1e4;
    let stand = stand_totals(&trees, area_ha);
    let census = census(&delineation.records, area_ha);
    lap("allometry", &mut timings);

    Ok(Inventory { chm, species_map, delineation, trees, stand, census, area_ha, timings })
}
