//! Grid algebra: alignment, elementwise combination, focal statistics and
//! tiled traversal. Computed grids are Float32 with NaN nodata.

mod focal;
mod tiles;

pub use focal::{focal, FocalStat};
pub use tiles::{for_each_tile, window, TileCursor, DEFAULT_TILE};

use rayon::prelude::*;

use crate::raster::{Grid, RasterError, RasterHeader, SampleType, Samples};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("CRS mismatch: {a:?} vs {b:?}")]
    CrsMismatch { a: String, b: String },
    #[error("grid extents do not overlap")]
    DisjointExtents,
    #[error("grids are not on the same pixel lattice")]
    LatticeMismatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resample {
    Nearest,
    Bilinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alignment {
    Exact,
    Resampled(Resample),
}

/// Two grids on one lattice. `b` has been resampled onto `a` unless the
/// alignment is exact.
#[derive(Debug, Clone)]
pub struct GridPair {
    pub a: Grid,
    pub b: Grid,
    pub alignment: Alignment,
}

/// Resample `b` onto the lattice of `a`.
///
/// Nearest keeps `b`'s sample type. Bilinear yields Float32; a cell is nodata
/// when any neighbor with nonzero weight is nodata or when its center lies
/// outside `b`'s extent. Inside the extent, sample positions are clamped to
/// the outermost pixel centers.
pub fn align(a: &Grid, b: &Grid, method: Resample) -> Result<GridPair, GridError> {
    let (ha, hb) = (a.header(), b.header());
    if ha.crs != hb.crs {
        return Err(GridError::CrsMismatch { a: ha.crs.clone(), b: hb.crs.clone() });
    }
    if ha.same_lattice(hb) {
        return Ok(GridPair { a: a.clone(), b: b.clone(), alignment: Alignment::Exact });
    }
    let (ax0, ay0, ax1, ay1) = ha.geotransform.extent(ha.width, ha.height);
    let (bx0, by0, bx1, by1) = hb.geotransform.extent(hb.width, hb.height);
    if ax1.min(bx1) <= ax0.max(bx0) || ay1.min(by1) <= ay0.max(by0) {
        return Err(GridError::DisjointExtents);
    }
    let resampled = match method {
        Resample::Nearest => resample_nearest(ha, b)?,
        Resample::Bilinear => resample_bilinear(ha, b)?,
    };
    Ok(GridPair { a: a.clone(), b: resampled, alignment: Alignment::Resampled(method) })
}

/// Fractional position of each target pixel center in `src` pixel space.
fn source_coords(target: &RasterHeader, src: &RasterHeader, col: usize, row: usize) -> (f64, f64) {
    let (x, y) = target.geotransform.pixel_center(col as f64, row as f64);
    src.geotransform.world_to_pixel(x, y)
}

fn resample_nearest(target: &RasterHeader, b: &Grid) -> Result<Grid, GridError> {
    let hb = b.header();
    let (w, h) = (target.width, target.height);
    let lookup: Vec<Option<usize>> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (fc, fr) = source_coords(target, hb, i % w, i / w);
            let (c, r) = ((fc + 0.5).floor(), (fr + 0.5).floor());
            (c >= 0.0 && r >= 0.0 && c < hb.width as f64 && r < hb.height as f64)
                .then(|| r as usize * hb.width + c as usize)
        })
        .collect();
    let outside = lookup.iter().any(Option::is_none);
    let mut nodata = hb.nodata;
    let samples = match b.samples() {
        Samples::Float32(v) => {
            let fill = nodata.map_or(f32::NAN, |n| n as f32);
            if outside && nodata.is_none() {
                nodata = Some(f64::NAN);
            }
            Samples::Float32(lookup.iter().map(|s| s.map_or(fill, |i| v[i])).collect())
        }
        Samples::UInt8(v) => {
            if outside && nodata.is_none() {
                nodata = Some(u8::MAX as f64);
            }
            let fill = nodata.map_or(0, |n| n as u8);
            Samples::UInt8(lookup.iter().map(|s| s.map_or(fill, |i| v[i])).collect())
        }
        Samples::UInt16(v) => {
            if outside && nodata.is_none() {
                nodata = Some(u16::MAX as f64);
            }
            let fill = nodata.map_or(0, |n| n as u16);
            Samples::UInt16(lookup.iter().map(|s| s.map_or(fill, |i| v[i])).collect())
        }
    };
    let header = target.clone().with_sample_type(hb.sample_type).with_nodata(nodata).with_layout(hb.layout);
    Ok(Grid::new(header, samples)?)
}

fn resample_bilinear(target: &RasterHeader, b: &Grid) -> Result<Grid, GridError> {
    let hb = b.header();
    let (w, h) = (target.width, target.height);
    let src = b.to_f32_vec();
    let at = |c: usize, r: usize| src[r * hb.width + c] as f64;
    let out: Vec<f32> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (fc, fr) = source_coords(target, hb, i % w, i / w);
            if fc < -0.5 || fr < -0.5 || fc > hb.width as f64 - 0.5 || fr > hb.height as f64 - 0.5 {
                return f32::NAN;
            }
            let (c0, t) = split(fc, hb.width);
            let (r0, u) = split(fr, hb.height);
            let c1 = if t > 0.0 { c0 + 1 } else { c0 };
            let r1 = if u > 0.0 { r0 + 1 } else { r0 };
            let top = lerp(at(c0, r0), at(c1, r0), t);
            let bottom = lerp(at(c0, r1), at(c1, r1), t);
            lerp(top, bottom, u) as f32
        })
        .collect();
    let header = target.clone().with_layout(hb.layout);
    Ok(Grid::from_f32(&header, out)?)
}

/// Lower neighbor index and weight of a clamped fractional coordinate.
fn split(f: f64, n: usize) -> (usize, f64) {
    let f = f.clamp(0.0, (n - 1) as f64);
    let i = (f.floor() as usize).min(n.saturating_sub(2));
    (i, f - i as f64)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else {
        a + t * (b - a)
    }
}

/// Elementwise combination. Output is nodata where either operand is nodata
/// or `f` returns NaN.
pub fn map2<F>(pair: &GridPair, f: F) -> Result<Grid, GridError>
where
    F: Fn(f32, f32) -> f32 + Sync,
{
    if !pair.a.header().same_lattice(pair.b.header()) {
        return Err(GridError::LatticeMismatch);
    }
    let (a, b) = (pair.a.to_f32_vec(), pair.b.to_f32_vec());
    let out: Vec<f32> = a
        .par_iter()
        .zip(b.par_iter())
        .map(|(&x, &y)| if x.is_nan() || y.is_nan() { f32::NAN } else { f(x, y) })
        .collect();
    Ok(Grid::from_f32(pair.a.header(), out)?)
}

/// Elementwise transform of a single grid, nodata preserved.
pub fn map1<F>(grid: &Grid, f: F) -> Grid
where
    F: Fn(f32) -> f32 + Sync,
{
    let out: Vec<f32> = grid.to_f32_vec().into_par_iter().map(|x| if x.is_nan() { x } else { f(x) }).collect();
    Grid::from_f32(grid.header(), out).expect("same lattice")
}

/// Float32 copy of any grid with nodata mapped to NaN.
pub fn to_float(grid: &Grid) -> Grid {
    if grid.header().sample_type == SampleType::Float32 && grid.nodata().is_some_and(f64::is_nan) {
        return grid.clone();
    }
    Grid::from_f32(grid.header(), grid.to_f32_vec()).expect("same lattice")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GeoTransform;

    fn ramp(w: usize, h: usize, gt: GeoTransform) -> Grid {
        let hdr = RasterHeader::new(w, h, SampleType::Float32, gt);
        let v = (0..w * h).map(|i| gt.pixel_center((i % w) as f64, (i / w) as f64).0 as f32).collect();
        Grid::new(hdr, Samples::Float32(v)).unwrap()
    }

    #[test]
    fn identical_grids_align_exactly() {
        let g = ramp(5, 4, GeoTransform::north_up(0.0, 4.0, 1.0));
        let p = align(&g, &g, Resample::Bilinear).unwrap();
        assert_eq!(p.alignment, Alignment::Exact);
        assert_eq!(p.b, g);
    }

    #[test]
    fn constant_survives_both_methods() {
        let a = Grid::filled(8, 8, GeoTransform::north_up(0.0, 8.0, 1.0), 0.0);
        let b = Grid::filled(4, 4, GeoTransform::north_up(0.0, 8.0, 2.0), 7.0);
        for m in [Resample::Nearest, Resample::Bilinear] {
            let p = align(&a, &b, m).unwrap();
            assert!(p.b.to_f32_vec().iter().all(|&v| v == 7.0), "{m:?}");
        }
    }

    #[test]
    fn bilinear_ramp_matches_closed_form() {
        let b = ramp(10, 10, GeoTransform::north_up(0.0, 10.0, 1.0));
        let a = Grid::filled(9, 9, GeoTransform::north_up(0.5, 9.5, 1.0), 0.0);
        let p = align(&a, &b, Resample::Bilinear).unwrap();
        for r in 0..9 {
            for c in 0..9 {
                let x = a.geotransform().pixel_center(c as f64, r as f64).0;
                assert!((p.b.value_at(c, r).unwrap() - x).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn bilinear_poisons_on_nodata_neighbors_and_outside() {
        let mut v = vec![1.0f32; 16];
        v[5] = f32::NAN;
        let b = Grid::from_f32(&RasterHeader::new(4, 4, SampleType::Float32, GeoTransform::north_up(0.0, 4.0, 1.0)), v)
            .unwrap();
        let a = Grid::filled(5, 5, GeoTransform::north_up(-0.5, 4.5, 1.0), 0.0);
        let p = align(&a, &b, Resample::Bilinear).unwrap();
        // Cells between pixel (1,1) and its neighbors are poisoned.
        assert_eq!(p.b.value_at(1, 1), None);
        assert_eq!(p.b.value_at(2, 2), None);
        assert_eq!(p.b.value_at(3, 3), Some(1.0));
        // Centers of the outer ring sit on b's boundary and stay valid.
        assert_eq!(p.b.value_at(0, 4), Some(1.0));
    }

    #[test]
    fn errors() {
        let a = Grid::filled(2, 2, GeoTransform::north_up(0.0, 2.0, 1.0), 0.0);
        let far = Grid::filled(2, 2, GeoTransform::north_up(10.0, 2.0, 1.0), 0.0);
        assert_eq!(align(&a, &far, Resample::Nearest).unwrap_err(), GridError::DisjointExtents);
        let touching = Grid::filled(2, 2, GeoTransform::north_up(2.0, 2.0, 1.0), 0.0);
        assert_eq!(align(&a, &touching, Resample::Nearest).unwrap_err(), GridError::DisjointExtents);
        let other = a.clone().with_header(a.header().clone().with_crs("EPSG:4326")).unwrap();
        assert!(matches!(align(&a, &other, Resample::Nearest), Err(GridError::CrsMismatch { .. })));
    }

    #[test]
    fn nearest_keeps_categories() {
        let hdr = RasterHeader::new(2, 2, SampleType::UInt8, GeoTransform::north_up(0.0, 2.0, 1.0));
        let b = Grid::from_u8(&hdr, vec![1, 2, 3, 4], None).unwrap();
        let a = Grid::filled(4, 4, GeoTransform::north_up(0.0, 2.0, 0.5), 0.0);
        let p = align(&a, &b, Resample::Nearest).unwrap();
        assert_eq!(p.b.as_u8().unwrap(), &[1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4]);
    }

    #[test]
    fn map2_propagates_nodata() {
        let hdr = RasterHeader::new(3, 1, SampleType::Float32, GeoTransform::default());
        let a = Grid::from_f32(&hdr, vec![1.0, f32::NAN, 3.0]).unwrap();
        let b = Grid::from_f32(&hdr, vec![1.0, 1.0, f32::NAN]).unwrap();
        let p = align(&a, &b, Resample::Nearest).unwrap();
        let d = map2(&p, |x, y| x - y).unwrap();
        assert_eq!(d.value_at(0, 0), Some(0.0));
        assert_eq!(d.value_at(1, 0), None);
        assert_eq!(d.value_at(2, 0), None);
    }
}
