//! Forest inventory from drone-survey rasters: canopy height, species maps,
//! crown delineation, allometric biomass, plot kriging, synthetic forests and
//! survey economics.

pub mod allometry;
pub mod chm;
pub mod crowns;
pub mod economics;
pub mod grid;
pub mod numeric;
pub mod raster;
pub mod spatial;
pub mod species;
pub mod spectral;
pub mod synthforest;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
