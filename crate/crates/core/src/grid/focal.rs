use rayon::prelude::*;

use crate::raster::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FocalStat {
    Mean,
    /// Mean of the two middle values for even counts.
    Median,
    Max,
    Min,
}

impl FocalStat {
    fn reduce(self, vals: &mut [f32]) -> f32 {
        match self {
            FocalStat::Mean => {
                let sum: f64 = vals.iter().map(|&v| v as f64).sum();
                (sum / vals.len() as f64) as f32
            }
            FocalStat::Median => {
                vals.sort_unstable_by(f32::total_cmp);
                let n = vals.len();
                if n % 2 == 1 {
                    vals[n / 2]
                } else {
                    ((vals[n / 2 - 1] as f64 + vals[n / 2] as f64) / 2.0) as f32
                }
            }
            FocalStat::Max => vals.iter().copied().fold(f32::NEG_INFINITY, f32::max),
            FocalStat::Min => vals.iter().copied().fold(f32::INFINITY, f32::min),
        }
    }
}

/// Statistic over the `(2r+1)²` square window clipped to the grid, valid
/// cells only. Windows without valid cells give nodata. Values are visited
/// in row-major order, so results do not depend on scheduling.
pub fn focal(grid: &Grid, radius: usize, stat: FocalStat) -> Grid {
    let (w, h) = (grid.width(), grid.height());
    let src = grid.to_f32_vec();
    let mut out = vec![f32::NAN; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(row, line)| {
        let mut buf = Vec::with_capacity((2 * radius + 1).pow(2));
        let (r0, r1) = (row.saturating_sub(radius), (row + radius).min(h - 1));
        for (col, cell) in line.iter_mut().enumerate() {
            let (c0, c1) = (col.saturating_sub(radius), (col + radius).min(w - 1));
            buf.clear();
            for r in r0..=r1 {
                buf.extend(src[r * w + c0..=r * w + c1].iter().filter(|v| !v.is_nan()));
            }
            if !buf.is_empty() {
                *cell = stat.reduce(&mut buf);
            }
        }
    });
    Grid::from_f32(grid.header(), out).expect("same lattice")
}
