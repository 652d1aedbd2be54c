use nalgebra::{DMatrix, DVector, LU, Dyn};
use rayon::prelude::*;
use serde::Serialize;

use super::{GroundPlot, SpatialError, VariogramModel};
use crate::grid::GridError;
use crate::raster::{Grid, RasterHeader, SampleType};

/// Relative pivot size below which the system is treated as singular.
const PIVOT_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct KrigingPoint {
    pub mean: f64,
    pub variance: f64,
    pub weights: Vec<f64>,
    pub lagrange: f64,
}

/// Estimate of the field averaged over a block of support points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockEstimate {
    pub mean: f64,
    pub variance: f64,
}

/// Ordinary kriging with the system factored once.
///
/// The nugget is treated as measurement error: predictions target the
/// noise-free field, so they interpolate exactly only when the nugget is 0.
/// Covariances are scaled by the sill before factoring; weights are
/// unaffected and the multiplier is scaled back.
pub struct OrdinaryKriging {
    plots: Vec<GroundPlot>,
    model: VariogramModel,
    lu: LU<f64, Dyn, Dyn>,
}

impl OrdinaryKriging {
    pub fn new(plots: &[GroundPlot], model: VariogramModel) -> Result<Self, SpatialError> {
        model.validate()?;
        let n = plots.len();
        if n < 3 {
            return Err(SpatialError::TooFewPlots { needed: 3, got: n });
        }
        let mut coords: Vec<(u64, u64, usize)> = plots.iter().enumerate().map(|(i, p)| (p.x.to_bits(), p.y.to_bits(), i)).collect();
        coords.sort_unstable();
        if let Some(w) = coords.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            let p = plots[w[0].2];
            return Err(SpatialError::SingularSystem(format!("plots {} and {} share location ({}, {})", w[0].2, w[1].2, p.x, p.y)));
        }
        let s = model.sill;
        let a = DMatrix::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
            (true, true) => model.covariance(dist(&plots[i], &plots[j])) / s,
            (false, false) => 0.0,
            _ => 1.0,
        });
        let lu = a.lu();
        let diag = lu.u().diagonal();
        let max = diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let min = diag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        if !(min > PIVOT_TOLERANCE * max) {
            return Err(SpatialError::SingularSystem(format!("pivot ratio {:e}", min / max)));
        }
        Ok(OrdinaryKriging { plots: plots.to_vec(), model, lu })
    }

    pub fn model(&self) -> &VariogramModel {
        &self.model
    }

    fn solve(&self, cov: &[f64]) -> (Vec<f64>, f64) {
        let n = self.plots.len();
        let s = self.model.sill;
        let rhs = DVector::from_fn(n + 1, |i, _| if i < n { cov[i] / s } else { 1.0 });
        let sol = self.lu.solve(&rhs).expect("factorization checked non-singular");
        (sol.as_slice()[..n].to_vec(), sol[n] * s)
    }

    pub fn predict(&self, x: f64, y: f64) -> KrigingPoint {
        let cov: Vec<f64> =
            self.plots.iter().map(|p| self.model.signal_covariance((p.x - x).hypot(p.y - y))).collect();
        let (weights, lagrange) = self.solve(&cov);
        let mean = weights.iter().zip(&self.plots).map(|(w, p)| w * p.biomass_density).sum();
        let wc: f64 = weights.iter().zip(&cov).map(|(w, c)| w * c).sum();
        let variance = (self.model.partial_sill() - wc - lagrange).max(0.0);
        KrigingPoint { mean, variance, weights, lagrange }
    }

    /// Block kriging over equally weighted support points; block weights are
    /// the point weights averaged, which is one solve against the averaged
    /// right-hand side.
    pub fn block(&self, support: &[(f64, f64)]) -> BlockEstimate {
        let m = support.len() as f64;
        let cov: Vec<f64> = self
            .plots
            .iter()
            .map(|p| support.iter().map(|&(x, y)| self.model.signal_covariance((p.x - x).hypot(p.y - y))).sum::<f64>() / m)
            .collect();
        let cbb = support
            .par_iter()
            .map(|&(x, y)| support.iter().map(|&(u, v)| self.model.signal_covariance((x - u).hypot(y - v))).sum::<f64>())
            .collect::<Vec<_>>()
            .iter()
            .sum::<f64>()
            / (m * m);
        let (weights, lagrange) = self.solve(&cov);
        let mean = weights.iter().zip(&self.plots).map(|(w, p)| w * p.biomass_density).sum();
        let wc: f64 = weights.iter().zip(&cov).map(|(w, c)| w * c).sum();
        BlockEstimate { mean, variance: (cbb - wc - lagrange).max(0.0) }
    }
}

fn dist(a: &GroundPlot, b: &GroundPlot) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Kriged mean and variance at every cell centre of `template`.
pub fn krige(plots: &[GroundPlot], model: VariogramModel, template: &RasterHeader) -> Result<(Grid, Grid), SpatialError> {
    let ok = OrdinaryKriging::new(plots, model)?;
    let (w, h) = (template.width, template.height);
    let gt = template.geotransform;
    let cells: Vec<(f32, f32)> = (0..h)
        .into_par_iter()
        .flat_map_iter(|r| {
            let ok = &ok;
            (0..w).map(move |c| {
                let (x, y) = gt.pixel_center(c as f64, r as f64);
                let p = ok.predict(x, y);
                (p.mean as f32, p.variance as f32)
            })
        })
        .collect();
    let header = RasterHeader::new(w, h, SampleType::Float32, gt).with_crs(template.crs.clone()).with_nodata(None);
    let mean = Grid::from_f32(&header, cells.iter().map(|c| c.0).collect()).map_err(GridError::from)?;
    let var = Grid::from_f32(&header, cells.iter().map(|c| c.1).collect()).map_err(GridError::from)?;
    Ok((mean, var))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plots() -> Vec<GroundPlot> {
        [(0.0, 0.0, 100.0), (300.0, 0.0, 160.0), (0.0, 300.0, 130.0), (300.0, 300.0, 90.0), (150.0, 150.0, 120.0)]
            .iter()
            .map(|&(x, y, v)| GroundPlot { x, y, radius: 12.0, biomass_density: v })
            .collect()
    }

    const MODEL: VariogramModel = VariogramModel { nugget: 0.0, sill: 400.0, range_m: 200.0 };

    #[test]
    fn exact_at_plots_with_zero_nugget() {
        let ok = OrdinaryKriging::new(&plots(), MODEL).unwrap();
        for p in plots() {
            let k = ok.predict(p.x, p.y);
            assert!((k.mean - p.biomass_density).abs() < 1e-9);
            assert!(k.variance < 1e-9);
        }
        let mid = ok.predict(75.0, 40.0);
        assert!((mid.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(mid.variance > 0.0);
    }

    #[test]
    fn nugget_smooths() {
        let ok = OrdinaryKriging::new(&plots(), VariogramModel { nugget: 100.0, ..MODEL }).unwrap();
        let k = ok.predict(0.0, 0.0);
        assert!(k.variance > 0.0);
        assert!(k.mean != 100.0);
    }

    #[test]
    fn duplicate_locations_are_singular() {
        let mut p = plots();
        p[4].x = 0.0;
        p[4].y = 0.0;
        assert!(matches!(OrdinaryKriging::new(&p, MODEL), Err(SpatialError::SingularSystem(_))));
        assert!(matches!(OrdinaryKriging::new(&p[..2], MODEL), Err(SpatialError::TooFewPlots { .. })));
    }

    #[test]
    fn block_of_one_point_is_the_point() {
        let ok = OrdinaryKriging::new(&plots(), MODEL).unwrap();
        let b = ok.block(&[(75.0, 40.0)]);
        let p = ok.predict(75.0, 40.0);
        assert!((b.mean - p.mean).abs() < 1e-9);
        assert!((b.variance - p.variance).abs() < 1e-9);
    }
}
