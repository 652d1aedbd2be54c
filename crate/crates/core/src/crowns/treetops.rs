use rayon::prelude::*;

use super::{CrownError, CrownParams, TreeTop};
use crate::raster::Grid;

/// Local maxima of the CHM within a circular window whose radius grows with
/// height. A candidate loses to any higher pixel in its window, and to an
/// equal pixel that comes first in (row, col) order. Sorted by descending
/// height, then (row, col).
pub fn detect_treetops(chm: &Grid, params: &CrownParams) -> Result<Vec<TreeTop>, CrownError> {
    params.validate()?;
    let (w, h) = (chm.width(), chm.height());
    let gt = *chm.geotransform();
    let (sx, sy) = (gt.pixel_size_x.abs(), gt.pixel_size_y.abs());
    let v = chm.to_f32_vec();
    let min_h = params.min_tree_height;

    let mut tops: Vec<TreeTop> = (0..h)
        .into_par_iter()
        .flat_map_iter(|row| {
            let v = &v;
            (0..w).filter_map(move |col| {
                let here = v[row * w + col];
                if here.is_nan() || (here as f64) < min_h {
                    return None;
                }
                let radius = params.window_radius(here as f64);
                let r2 = radius * radius;
                let rc = (radius / sx).floor() as usize;
                let rr = (radius / sy).floor() as usize;
                for r in row.saturating_sub(rr)..=(row + rr).min(h - 1) {
                    let dy = (r as f64 - row as f64) * sy;
                    for c in col.saturating_sub(rc)..=(col + rc).min(w - 1) {
                        if r == row && c == col {
                            continue;
                        }
                        let dx = (c as f64 - col as f64) * sx;
                        if dx * dx + dy * dy > r2 {
                            continue;
                        }
                        let other = v[r * w + c];
                        if other > here || (other == here && (r, c) < (row, col)) {
                            return None;
                        }
                    }
                }
                let (x, y) = gt.pixel_center(col as f64, row as f64);
                Some(TreeTop { col, row, x, y, height: here as f64 })
            })
        })
        .collect();
    tops.sort_by(|a, b| b.height.total_cmp(&a.height).then((a.row, a.col).cmp(&(b.row, b.col))));
    Ok(tops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{GeoTransform, RasterHeader, SampleType};

    fn paraboloid(n: usize, apex: f32, radius_px: f32) -> Grid {
        let c = (n / 2) as f32;
        let v = (0..n * n)
            .map(|i| {
                let (x, y) = ((i % n) as f32 - c, (i / n) as f32 - c);
                let d2 = (x * x + y * y) / (radius_px * radius_px);
                (apex * (1.0 - 0.5 * d2)).max(0.0)
            })
            .collect();
        Grid::from_f32(&RasterHeader::new(n, n, SampleType::Float32, GeoTransform::north_up(0.0, 0.0, 0.25)), v)
            .unwrap()
    }

    #[test]
    fn empty_and_single() {
        let zero = Grid::filled(8, 8, GeoTransform::default(), 0.0);
        assert!(detect_treetops(&zero, &CrownParams::default()).unwrap().is_empty());
        let tops = detect_treetops(&paraboloid(41, 12.0, 12.0), &CrownParams::default()).unwrap();
        assert_eq!(tops.len(), 1);
        assert_eq!((tops[0].col, tops[0].row, tops[0].height), (20, 20, 12.0));
    }

    #[test]
    fn plateau_resolves_to_first_pixel() {
        let mut v = vec![0.0f32; 36];
        for i in [14, 15, 20, 21] {
            v[i] = 10.0;
        }
        let g = Grid::from_f32(&RasterHeader::new(6, 6, SampleType::Float32, GeoTransform::default()), v).unwrap();
        let tops = detect_treetops(&g, &CrownParams::default()).unwrap();
        assert_eq!(tops.len(), 1);
        assert_eq!((tops[0].col, tops[0].row), (2, 2));
    }
}
