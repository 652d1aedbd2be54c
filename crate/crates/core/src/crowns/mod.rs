//! Individual tree crown delineation: variable-window treetop detection,
//! marker-controlled watershed, crown outlines and the census summary.

mod census;
mod outline;
mod treetops;
mod watershed;

pub use census::{census, CensusSummary, Histogram, CROWN_DIAMETER_BIN_M, HEIGHT_BIN_M};
pub use outline::{crown_rings, Ring};
pub use treetops::detect_treetops;
pub use watershed::{watershed_crowns, Delineation};

use crate::grid::GridError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CrownError {
    #[error("treetop {index} at ({col}, {row}) lies below the minimum tree height")]
    MarkerOutsideCanopy { index: usize, col: usize, row: usize },
    #[error("treetop {index} at ({col}, {row}) duplicates another marker")]
    DuplicateMarker { index: usize, col: usize, row: usize },
    #[error("invalid crown parameter: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrownParams {
    /// Meters; shorter pixels are not canopy.
    pub min_tree_height: f64,
    /// Treetop window radius as a fraction of local height.
    pub window_fraction: f64,
    /// Meters.
    pub min_window_radius: f64,
    /// Crowns stop below this fraction of their own top height.
    pub crown_floor_fraction: f64,
}

impl Default for CrownParams {
    fn default() -> Self {
        CrownParams { min_tree_height: 3.0, window_fraction: 0.10, min_window_radius: 1.0, crown_floor_fraction: 0.3 }
    }
}

impl CrownParams {
    pub fn validate(&self) -> Result<(), CrownError> {
        let all = [self.min_tree_height, self.window_fraction, self.min_window_radius, self.crown_floor_fraction];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(CrownError::InvalidParams(format!("all crown parameters must be positive: {self:?}")));
        }
        if self.window_fraction >= 1.0 {
            return Err(CrownError::InvalidParams("window_fraction must be below 1".into()));
        }
        Ok(())
    }

    /// Suppression window radius in meters for a pixel of height `h`.
    pub fn window_radius(&self, h: f64) -> f64 {
        self.min_window_radius.max(self.window_fraction * h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeTop {
    pub col: usize,
    pub row: usize,
    /// World coordinates of the pixel center.
    pub x: f64,
    pub y: f64,
    /// CHM value at the peak, meters.
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrownRecord {
    /// 1-based, in treetop order.
    pub tree_id: u32,
    pub top: TreeTop,
    /// m², pixel_count × pixel area.
    pub crown_area: f64,
    /// Equivalent-circle diameter, meters.
    pub crown_diameter: f64,
    /// Modal nonzero species over the crown; 0 when none.
    pub species_id: u8,
    pub pixel_count: usize,
}

/// Diameter of the circle with the given area.
pub fn equivalent_diameter(area: f64) -> f64 {
    2.0 * (area / std::f64::consts::PI).sqrt()
}
