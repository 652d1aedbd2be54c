use serde::Serialize;

use super::{GroundPlot, SpatialError};

pub const VARIOGRAM_BINS: usize = 10;
const MIN_FIT_PLOTS: usize = 10;
const RANGE_CANDIDATES: usize = 400;

/// Exponential semivariogram `γ(h) = nugget + (sill − nugget)·(1 − e^(−h/range))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VariogramModel {
    pub nugget: f64,
    pub sill: f64,
    pub range_m: f64,
}

impl VariogramModel {
    pub fn validate(&self) -> Result<(), SpatialError> {
        let ok = self.nugget >= 0.0 && self.sill > self.nugget && self.range_m > 0.0;
        if ok && self.sill.is_finite() && self.range_m.is_finite() {
            Ok(())
        } else {
            Err(SpatialError::InvalidArgument(format!("invalid variogram {self:?}")))
        }
    }

    pub fn partial_sill(&self) -> f64 {
        self.sill - self.nugget
    }

    /// Semivariance; `gamma(0)` is the nugget (the limit from above).
    pub fn gamma(&self, h: f64) -> f64 {
        self.nugget + self.partial_sill() * (1.0 - (-h / self.range_m).exp())
    }

    /// Covariance between two observations; the nugget only appears at zero lag.
    pub fn covariance(&self, h: f64) -> f64 {
        if h == 0.0 {
            self.sill
        } else {
            self.partial_sill() * (-h / self.range_m).exp()
        }
    }

    /// Covariance between an observation and the noise-free field at a point.
    pub fn signal_covariance(&self, h: f64) -> f64 {
        self.partial_sill() * (-h / self.range_m).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VariogramBin {
    pub lag_m: f64,
    pub gamma: f64,
    pub pairs: usize,
}

/// Classical estimator on `VARIOGRAM_BINS` equal bins up to half the
/// largest pair distance; empty bins are omitted.
pub fn empirical_semivariogram(plots: &[GroundPlot]) -> Vec<VariogramBin> {
    let mut pairs = Vec::with_capacity(plots.len() * plots.len().saturating_sub(1) / 2);
    for (i, a) in plots.iter().enumerate() {
        for b in &plots[i + 1..] {
            let h = (a.x - b.x).hypot(a.y - b.y);
            let d = a.biomass_density - b.biomass_density;
            pairs.push((h, 0.5 * d * d));
        }
    }
    let max_lag = pairs.iter().map(|p| p.0).fold(0.0, f64::max) / 2.0;
    if max_lag <= 0.0 {
        return Vec::new();
    }
    let width = max_lag / VARIOGRAM_BINS as f64;
    let mut acc = [(0.0f64, 0.0f64, 0usize); VARIOGRAM_BINS];
    for (h, g) in pairs {
        if h == 0.0 || h > max_lag {
            continue;
        }
        let k = ((h / width).ceil() as usize).clamp(1, VARIOGRAM_BINS) - 1;
        acc[k].0 += h;
        acc[k].1 += g;
        acc[k].2 += 1;
    }
    acc.iter()
        .filter(|a| a.2 > 0)
        .map(|&(h, g, n)| VariogramBin { lag_m: h / n as f64, gamma: g / n as f64, pairs: n })
        .collect()
}

/// Least-squares exponential fit to the empirical semivariogram.
///
/// The range is searched on a log grid; nugget and partial sill solve the
/// non-negative linear sub-problem exactly for each candidate range.
pub fn fit_variogram(plots: &[GroundPlot]) -> Result<VariogramModel, SpatialError> {
    if plots.len() < MIN_FIT_PLOTS {
        return Err(SpatialError::TooFewPlots { needed: MIN_FIT_PLOTS, got: plots.len() });
    }
    let bins = empirical_semivariogram(plots);
    let n = plots.len() as f64;
    let mean = plots.iter().map(|p| p.biomass_density).sum::<f64>() / n;
    let var = plots.iter().map(|p| (p.biomass_density - mean).powi(2)).sum::<f64>() / (n - 1.0);
    // Keeps sill > nugget when the data carry no spatial variance.
    let min_psill = 1e-9 * var.max(1e-3);
    let max_lag = bins.iter().map(|b| b.lag_m).fold(0.0, f64::max);
    if bins.len() < 2 {
        let range_m = if max_lag > 0.0 { max_lag } else { 1.0 };
        return Ok(VariogramModel { nugget: 0.0, sill: var.max(min_psill), range_m });
    }
    let (lo, hi) = ((max_lag / 100.0).ln(), (max_lag * 3.0).ln());
    let mut best: Option<(f64, VariogramModel)> = None;
    for k in 0..RANGE_CANDIDATES {
        let a = (lo + (hi - lo) * k as f64 / (RANGE_CANDIDATES - 1) as f64).exp();
        let f: Vec<f64> = bins.iter().map(|b| 1.0 - (-b.lag_m / a).exp()).collect();
        let (nugget, psill) = nonneg_affine_fit(&f, &bins);
        let psill = psill.max(min_psill);
        let sse: f64 = bins.iter().zip(&f).map(|(b, fk)| (b.gamma - nugget - psill * fk).powi(2)).sum();
        if best.as_ref().is_none_or(|(s, _)| sse < *s) {
            best = Some((sse, VariogramModel { nugget, sill: nugget + psill, range_m: a }));
        }
    }
    Ok(best.expect("at least one candidate").1)
}

/// Minimise Σ(γ − n − p·f)² subject to n, p ≥ 0.
fn nonneg_affine_fit(f: &[f64], bins: &[VariogramBin]) -> (f64, f64) {
    let m = f.len() as f64;
    let (sf, sg) = (f.iter().sum::<f64>(), bins.iter().map(|b| b.gamma).sum::<f64>());
    let sff = f.iter().map(|x| x * x).sum::<f64>();
    let sfg = f.iter().zip(bins).map(|(x, b)| x * b.gamma).sum::<f64>();
    let det = m * sff - sf * sf;
    if det.abs() > 1e-12 * m * sff {
        let n = (sff * sg - sf * sfg) / det;
        let p = (m * sfg - sf * sg) / det;
        if n >= 0.0 && p >= 0.0 {
            return (n, p);
        }
    }
    let sse = |n: f64, p: f64| f.iter().zip(bins).map(|(x, b)| (b.gamma - n - p * x).powi(2)).sum::<f64>();
    let p_only = if sff > 0.0 { (sfg / sff).max(0.0) } else { 0.0 };
    let n_only = (sg / m).max(0.0);
    if sse(0.0, p_only) <= sse(n_only, 0.0) {
        (0.0, p_only)
    } else {
        (n_only, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plot(x: f64, y: f64, v: f64) -> GroundPlot {
        GroundPlot { x, y, radius: 12.0, biomass_density: v }
    }

    #[test]
    fn model_limits() {
        let m = VariogramModel { nugget: 2.0, sill: 10.0, range_m: 100.0 };
        assert_eq!(m.gamma(0.0), 2.0);
        assert!((m.gamma(1e6) - 10.0).abs() < 1e-12);
        assert_eq!(m.covariance(0.0), 10.0);
        assert_eq!(m.signal_covariance(0.0), 8.0);
    }

    #[test]
    fn too_few_plots() {
        let p: Vec<_> = (0..5).map(|i| plot(i as f64 * 10.0, 0.0, 1.0)).collect();
        assert_eq!(fit_variogram(&p), Err(SpatialError::TooFewPlots { needed: 10, got: 5 }));
    }

    #[test]
    fn constant_plots_have_no_structure() {
        let p: Vec<_> = (0..25).map(|i| plot((i % 5) as f64 * 50.0, (i / 5) as f64 * 50.0, 180.0)).collect();
        let m = fit_variogram(&p).unwrap();
        m.validate().unwrap();
        assert!(m.partial_sill() < 1e-9);
        assert_eq!(m.nugget, 0.0);
    }

    #[test]
    fn bins_cover_half_max_distance() {
        let p: Vec<_> = (0..30).map(|i| plot(i as f64 * 10.0, 0.0, i as f64)).collect();
        let bins = empirical_semivariogram(&p);
        assert_eq!(bins.len(), VARIOGRAM_BINS);
        // Linear trend: γ(h) = h²/200.
        assert_eq!(bins[0].lag_m, 10.0);
        assert_eq!(bins[0].gamma, 0.5);
        assert!(bins.iter().all(|b| b.lag_m <= 145.0));
    }
}
