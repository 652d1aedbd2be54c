//! Canopy height model: DSM minus DEM, conditioned for crown delineation.

use crate::grid::{align, focal, map2, FocalStat, GridError, Resample};
use crate::raster::Grid;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChmError {
    #[error("invalid CHM parameter: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChmParams {
    pub clamp_negative: bool,
    /// Heights above this are georegistration blunders and become nodata.
    pub max_plausible_height: f32,
    /// Median window radius in pixels; 0 disables smoothing.
    pub smooth_radius: usize,
}

impl Default for ChmParams {
    fn default() -> Self {
        ChmParams { clamp_negative: true, max_plausible_height: 90.0, smooth_radius: 1 }
    }
}

impl ChmParams {
    pub fn validate(&self) -> Result<(), ChmError> {
        if !(self.max_plausible_height > 0.0) || !self.max_plausible_height.is_finite() {
            return Err(ChmError::InvalidParams(format!(
                "max_plausible_height must be positive, got {}",
                self.max_plausible_height
            )));
        }
        Ok(())
    }
}

/// `dsm - dem` on the DSM lattice with clamping and the height cap applied,
/// before smoothing. The DEM is bilinearly resampled when lattices differ.
pub fn raw_chm(dsm: &Grid, dem: &Grid, params: &ChmParams) -> Result<Grid, ChmError> {
    params.validate()?;
    let pair = align(dsm, dem, Resample::Bilinear)?;
    let (clamp, cap) = (params.clamp_negative, params.max_plausible_height);
    Ok(map2(&pair, move |s, d| {
        let h = s - d;
        let h = if clamp && h < 0.0 { 0.0 } else { h };
        if h > cap {
            f32::NAN
        } else {
            h
        }
    })?)
}

/// Conditioned CHM: [`raw_chm`] followed by median smoothing. Smoothing
/// reads valid neighbors only and never fills nodata cells.
pub fn derive_chm(dsm: &Grid, dem: &Grid, params: &ChmParams) -> Result<Grid, ChmError> {
    let raw = raw_chm(dsm, dem, params)?;
    if params.smooth_radius == 0 {
        return Ok(raw);
    }
    let smooth = focal(&raw, params.smooth_radius, FocalStat::Median);
    let raw_v = raw.to_f32_vec();
    let out: Vec<f32> =
        smooth.to_f32_vec().into_iter().zip(raw_v).map(|(s, r)| if r.is_nan() { f32::NAN } else { s }).collect();
    Ok(Grid::from_f32(raw.header(), out).expect("same lattice"))
}

/// Raise single-pixel pits. A pit is an interior pixel with eight valid
/// neighbors, each higher than it by more than `max_pit_depth`. Pits take the
/// lower median (4th smallest) of their neighbors. Sweeps in raster order
/// until no pit remains; every replacement raises a pixel to a value already
/// present in the grid, so the loop terminates.
pub fn fill_pits(chm: &Grid, max_pit_depth: f32) -> Grid {
    let (w, h) = (chm.width(), chm.height());
    let mut v = chm.to_f32_vec();
    if w < 3 || h < 3 {
        return Grid::from_f32(chm.header(), v).expect("same lattice");
    }
    let mut nb = [0f32; 8];
    loop {
        let mut changed = false;
        for r in 1..h - 1 {
            for c in 1..w - 1 {
                let centre = v[r * w + c];
                if centre.is_nan() {
                    continue;
                }
                let mut k = 0;
                for dr in [r - 1, r, r + 1] {
                    for dc in [c - 1, c, c + 1] {
                        if dr != r || dc != c {
                            nb[k] = v[dr * w + dc];
                            k += 1;
                        }
                    }
                }
                if nb.iter().any(|x| x.is_nan()) {
                    continue;
                }
                if nb.iter().all(|&x| x - centre > max_pit_depth) {
                    nb.sort_unstable_by(f32::total_cmp);
                    v[r * w + c] = nb[3];
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Grid::from_f32(chm.header(), v).expect("same lattice")
}
