//! Raster previews as PNG. Nodata pixels are fully transparent.

use canopy_core::raster::Grid;
use image::{ImageEncoder, RgbaImage};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Palette {
    /// Evenly spaced colour stops; the grid minimum maps to the first stop
    /// and the maximum to the last.
    Ramp(Vec<[u8; 3]>),
    /// Colour `i % len` for integer value `i`.
    Categorical(Vec<[u8; 3]>),
}

impl Palette {
    /// Five-stop approximation of viridis.
    pub fn viridis() -> Palette {
        Palette::Ramp(vec![[68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]])
    }

    /// Ground grey followed by distinct species colours.
    pub fn species() -> Palette {
        Palette::Categorical(vec![
            [160, 160, 160],
            [27, 158, 119],
            [217, 95, 2],
            [117, 112, 179],
            [231, 41, 138],
            [102, 166, 30],
            [230, 171, 2],
            [166, 118, 29],
        ])
    }
}

fn ramp(stops: &[[u8; 3]], t: f64) -> [u8; 3] {
    if stops.len() == 1 {
        return stops[0];
    }
    let pos = t.clamp(0.0, 1.0) * (stops.len() - 1) as f64;
    let i = (pos.floor() as usize).min(stops.len() - 2);
    let f = pos - i as f64;
    let mix = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * f).round() as u8;
    [mix(stops[i][0], stops[i + 1][0]), mix(stops[i][1], stops[i + 1][1]), mix(stops[i][2], stops[i + 1][2])]
}

pub fn render_heatmap(grid: &Grid, palette: &Palette) -> RgbaImage {
    let (w, h) = (grid.width(), grid.height());
    let range = grid.min_max();
    let mut img = RgbaImage::new(w as u32, h as u32);
    for (i, px) in img.pixels_mut().enumerate() {
        let Some(v) = grid.value(i) else { continue };
        let rgb = match palette {
            Palette::Ramp(stops) => {
                let (lo, hi) = range.expect("a valid pixel implies a range");
                // A constant grid maps entirely to the first stop.
                let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
                ramp(stops, t)
            }
            Palette::Categorical(colours) => colours[(v.max(0.0) as usize) % colours.len()],
        };
        *px = image::Rgba([rgb[0], rgb[1], rgb[2], 255]);
    }
    debug_assert_eq!(img.len(), w * h * 4);
    img
}

pub fn encode_png(img: &RgbaImage) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(img.as_raw(), img.width(), img.height(), image::ExtendedColorType::Rgba8)
        .map_err(|e| CliError::stage("heatmap", e.to_string()))?;
    Ok(out)
}
