use rayon::prelude::*;

use super::GridError;
use crate::raster::{GeoTransform, Grid, RasterHeader, Samples};

pub const DEFAULT_TILE: usize = 512;

/// Tiling of a grid into `tile_w × tile_h` cores, each read with an
/// `overlap`-pixel halo clipped at the grid border.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileCursor {
    pub tile_w: usize,
    pub tile_h: usize,
    pub overlap: usize,
}

impl Default for TileCursor {
    fn default() -> Self {
        TileCursor { tile_w: DEFAULT_TILE, tile_h: DEFAULT_TILE, overlap: 0 }
    }
}

impl TileCursor {
    /// Default tiles with a halo matching an operation's support radius.
    pub fn for_support(radius: usize) -> Self {
        TileCursor { overlap: radius, ..TileCursor::default() }
    }
}

/// Copy of the `w × h` block at (col, row), georeferenced in place.
pub fn window(grid: &Grid, col: usize, row: usize, w: usize, h: usize) -> Grid {
    let src = grid.header();
    let gt = src.geotransform;
    let header = RasterHeader {
        width: w,
        height: h,
        geotransform: GeoTransform {
            origin_x: gt.origin_x + col as f64 * gt.pixel_size_x,
            origin_y: gt.origin_y + row as f64 * gt.pixel_size_y,
            ..gt
        },
        ..src.clone()
    };
    let samples = match grid.samples() {
        Samples::UInt8(v) => Samples::UInt8(rows_of(v, src.width, col, row, w, h)),
        Samples::UInt16(v) => Samples::UInt16(rows_of(v, src.width, col, row, w, h)),
        Samples::Float32(v) => Samples::Float32(rows_of(v, src.width, col, row, w, h)),
    };
    Grid::new(header, samples).expect("window inside grid")
}

fn rows_of<T: Copy>(v: &[T], stride: usize, col: usize, row: usize, w: usize, h: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(w * h);
    for r in row..row + h {
        out.extend_from_slice(&v[r * stride + col..][..w]);
    }
    out
}

struct Placed {
    col: usize,
    row: usize,
    /// Offset of the core inside the haloed tile.
    dx: usize,
    dy: usize,
    w: usize,
    h: usize,
}

/// Apply `f` to every haloed tile and assemble the cores.
///
/// `f` must return a grid with the dimensions of its input. The result equals
/// `f(grid)` whenever `f`'s neighborhood support is at most `overlap`.
pub fn for_each_tile<F>(grid: &Grid, cursor: TileCursor, f: F) -> Result<Grid, GridError>
where
    F: Fn(&Grid) -> Grid + Sync,
{
    if cursor.tile_w == 0 || cursor.tile_h == 0 {
        return Err(GridError::InvalidArgument("tile dimensions must be positive".into()));
    }
    let (gw, gh) = (grid.width(), grid.height());
    let ov = cursor.overlap;
    let mut jobs = Vec::new();
    for row in (0..gh).step_by(cursor.tile_h) {
        for col in (0..gw).step_by(cursor.tile_w) {
            jobs.push(Placed {
                col,
                row,
                dx: col.min(ov),
                dy: row.min(ov),
                w: cursor.tile_w.min(gw - col),
                h: cursor.tile_h.min(gh - row),
            });
        }
    }
    let results: Vec<Grid> = jobs
        .par_iter()
        .map(|p| {
            let (x0, y0) = (p.col - p.dx, p.row - p.dy);
            let x1 = (p.col + p.w + ov).min(gw);
            let y1 = (p.row + p.h + ov).min(gh);
            f(&window(grid, x0, y0, x1 - x0, y1 - y0))
        })
        .collect();

    let first = results[0].header().clone();
    for (p, r) in jobs.iter().zip(&results) {
        let hr = r.header();
        if hr.sample_type != first.sample_type || hr.nodata.map(f64::to_bits) != first.nodata.map(f64::to_bits) {
            return Err(GridError::InvalidArgument("tile function returned inconsistent sample types".into()));
        }
        if hr.width < p.dx + p.w || hr.height < p.dy + p.h {
            return Err(GridError::InvalidArgument("tile function changed the tile dimensions".into()));
        }
    }
    let header = RasterHeader { sample_type: first.sample_type, nodata: first.nodata, ..grid.header().clone() };
    let samples = match results[0].samples() {
        Samples::UInt8(_) => Samples::UInt8(assemble(&jobs, &results, gw, gh, |s| match s {
            Samples::UInt8(v) => v,
            _ => unreachable!(),
        })),
        Samples::UInt16(_) => Samples::UInt16(assemble(&jobs, &results, gw, gh, |s| match s {
            Samples::UInt16(v) => v,
            _ => unreachable!(),
        })),
        Samples::Float32(_) => Samples::Float32(assemble(&jobs, &results, gw, gh, |s| match s {
            Samples::Float32(v) => v,
            _ => unreachable!(),
        })),
    };
    Ok(Grid::new(header, samples)?)
}

fn assemble<T: Copy + Default>(
    jobs: &[Placed],
    results: &[Grid],
    gw: usize,
    gh: usize,
    get: impl Fn(&Samples) -> &Vec<T>,
) -> Vec<T> {
    let mut out = vec![T::default(); gw * gh];
    for (p, r) in jobs.iter().zip(results) {
        let src = get(r.samples());
        let tw = r.width();
        for y in 0..p.h {
            out[(p.row + y) * gw + p.col..][..p.w].copy_from_slice(&src[(p.dy + y) * tw + p.dx..][..p.w]);
        }
    }
    out
}
