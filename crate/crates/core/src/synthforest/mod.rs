//! Synthetic forests with exact ground truth, rendered to the rasters the
//! inventory pipeline consumes.
//!
//! Generation is single-threaded and seeded; rendering is row-parallel with
//! per-row random streams, so output is independent of the thread count.

mod generate;
mod render;

pub use generate::{generate, truth_to_csv, GroundTruth, SynthTree};
pub use render::{render, SceneRasters};

use crate::allometry::AllometryError;
use crate::species::{default_species, SpeciesParams};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthetic-forest parameter: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Allometry(#[from] AllometryError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub seed: u64,
    pub width_m: f64,
    pub height_m: f64,
    /// Upper-left corner of the scene.
    pub origin: (f64, f64),
    pub resolution: f64,
    pub stems_per_ha: f64,
    /// Species with their mixing proportions, which must sum to 1.
    pub species: Vec<(SpeciesParams, f64)>,
    /// Log-normal tree height: `ln h ~ N(height_mu, height_sigma²)`, redrawn
    /// outside `[min_height, max_height]`.
    pub height_mu: f64,
    pub height_sigma: f64,
    pub min_height: f64,
    pub max_height: f64,
    /// Height-to-stem relation `dbh_cm = dbh_a · h^dbh_b`; crowns then follow
    /// from the inverse crown bridge.
    pub dbh_a: f64,
    pub dbh_b: f64,
    /// Matérn II hard-core distance as a fraction of the mean crown diameter.
    pub hard_core_factor: f64,
    /// Use the pairwise sum of crown radii as the hard core instead, so that
    /// no two crowns overlap.
    pub non_overlapping: bool,
    /// Stem intensity varies as `1 + heterogeneity · f(x, y)` with `f` a
    /// smooth field in [-1, 1] of wavelength about `heterogeneity_scale_m`.
    pub heterogeneity: f64,
    pub heterogeneity_scale_m: f64,
    pub terrain_base_m: f64,
    pub terrain_amplitude_m: f64,
    pub terrain_components: usize,
    pub spectral_noise: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        let species = default_species();
        SynthParams {
            seed: 1,
            width_m: 200.0,
            height_m: 200.0,
            origin: (300_000.0, 8_800_200.0),
            resolution: 0.25,
            stems_per_ha: 250.0,
            species: vec![(species[0].clone(), 0.5), (species[1].clone(), 0.3), (species[2].clone(), 0.2)],
            height_mu: 10f64.ln(),
            height_sigma: 0.15,
            min_height: 6.0,
            max_height: 55.0,
            dbh_a: 1.0,
            dbh_b: 1.15,
            hard_core_factor: 0.4,
            non_overlapping: false,
            heterogeneity: 0.0,
            heterogeneity_scale_m: 400.0,
            terrain_base_m: 120.0,
            terrain_amplitude_m: 15.0,
            terrain_components: 3,
            spectral_noise: 0.03,
        }
    }
}

impl SynthParams {
    /// Zero-noise 4 ha scene of separated crowns at 150 stems/ha.
    pub fn crown_oracle(seed: u64) -> Self {
        SynthParams {
            seed,
            stems_per_ha: 150.0,
            height_sigma: 0.2,
            non_overlapping: true,
            spectral_noise: 0.0,
            ..SynthParams::default()
        }
    }

    /// 4 ha scene of overlapping crowns at 250 stems/ha with spectral noise.
    pub fn noisy_overlapping(seed: u64) -> Self {
        SynthParams { seed, ..SynthParams::default() }
    }

    /// 144 ha scene with patchy stem density (gaps and clumps of about 60 m), for the census
    /// versus plot-interpolation comparison.
    pub fn heterogeneous_reference(seed: u64) -> Self {
        SynthParams {
            seed,
            width_m: 1200.0,
            height_m: 1200.0,
            origin: (300_000.0, 8_801_200.0),
            resolution: 0.5,
            heterogeneity: 0.9,
            heterogeneity_scale_m: 120.0,
            ..SynthParams::default()
        }
    }

    pub fn area_ha(&self) -> f64 {
        self.width_m * self.height_m / 1e4
    }

    pub fn grid_size(&self) -> (usize, usize) {
        ((self.width_m / self.resolution).round() as usize, (self.height_m / self.resolution).round() as usize)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidParams(m.into()));
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.width_m) || !pos(self.height_m) || !pos(self.resolution) {
            return bad("extent and resolution must be positive");
        }
        let (w, h) = self.grid_size();
        if w == 0 || h == 0 || (w as u64) * (h as u64) > 1 << 31 {
            return bad("raster size must be between 1 and 2^31 pixels");
        }
        if !(self.stems_per_ha >= 0.0 && self.stems_per_ha.is_finite()) {
            return bad("stems_per_ha must be non-negative");
        }
        if self.species.is_empty() {
            return bad("species mix is empty");
        }
        let total: f64 = self.species.iter().map(|s| s.1).sum();
        if self.species.iter().any(|s| !(s.1 >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return bad("species proportions must be non-negative and sum to 1");
        }
        for (s, _) in &self.species {
            s.validate().map_err(|e| SynthError::InvalidParams(e.to_string()))?;
        }
        if !self.height_mu.is_finite() || !(self.height_sigma >= 0.0 && self.height_sigma.is_finite()) {
            return bad("height distribution parameters must be finite, sigma >= 0");
        }
        if !(pos(self.min_height) && self.min_height < self.max_height && self.max_height.is_finite()) {
            return bad("need 0 < min_height < max_height");
        }
        let spread = 4.0 * self.height_sigma;
        if self.min_height.ln() > self.height_mu + spread || self.max_height.ln() < self.height_mu - spread {
            return bad("height distribution has almost no mass inside [min_height, max_height]");
        }
        if !pos(self.dbh_a) || !pos(self.dbh_b) {
            return bad("dbh_a and dbh_b must be positive");
        }
        if !(self.hard_core_factor >= 0.0 && self.hard_core_factor.is_finite()) {
            return bad("hard_core_factor must be non-negative");
        }
        if !(0.0..1.0).contains(&self.heterogeneity) || !pos(self.heterogeneity_scale_m) {
            return bad("heterogeneity must be in [0, 1) with a positive scale");
        }
        if !self.terrain_base_m.is_finite() || !(self.terrain_amplitude_m >= 0.0 && self.terrain_amplitude_m.is_finite()) {
            return bad("terrain amplitude must be non-negative");
        }
        if !(self.spectral_noise >= 0.0 && self.spectral_noise.is_finite()) {
            return bad("spectral noise must be non-negative");
        }
        Ok(())
    }
}
