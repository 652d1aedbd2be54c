use serde::Serialize;

use super::SpatialError;

pub const DEFAULT_RECALL: f64 = 0.9;

/// Inverse-variance combination of the census and interpolated estimates.
/// Each pair is `(mean Mg/ha, variance)`; weights are `(census, interpolated)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleEstimate {
    pub census: (f64, f64),
    pub interpolated: (f64, f64),
    pub combined: (f64, f64),
    pub weights: (f64, f64),
}

pub fn ensemble(census_mean: f64, census_var: f64, interp_mean: f64, interp_var: f64) -> Result<EnsembleEstimate, SpatialError> {
    for v in [census_var, interp_var] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(SpatialError::NonPositiveVariance(v));
        }
    }
    // Written so that swapping the components swaps the weights bit for bit.
    let total = census_var + interp_var;
    let weights = (interp_var / total, census_var / total);
    let mean = weights.0 * census_mean + weights.1 * interp_mean;
    Ok(EnsembleEstimate {
        census: (census_mean, census_var),
        interpolated: (interp_mean, interp_var),
        combined: (mean, census_var * interp_var / total),
        weights,
    })
}

/// Stand density (Mg/ha) and variance of a census over `area_ha`.
///
/// Variance is `(1 − recall)` times the plug-in variance of the stand total,
/// `n·s²` with `s²` the population variance of per-tree AGB, expressed per ha.
pub fn census_estimate(agb_kg: &[f64], area_ha: f64, recall: f64) -> Result<(f64, f64), SpatialError> {
    if !(area_ha > 0.0 && area_ha.is_finite()) {
        return Err(SpatialError::InvalidArgument(format!("area {area_ha} ha must be positive")));
    }
    let mean = crate::numeric::neumaier_sum(agb_kg.iter().copied()) / 1000.0 / area_ha;
    Ok((mean, census_variance(agb_kg, area_ha, recall)?))
}

pub fn census_variance(agb_kg: &[f64], area_ha: f64, recall: f64) -> Result<f64, SpatialError> {
    if !(recall > 0.0 && recall <= 1.0) {
        return Err(SpatialError::InvalidArgument(format!("recall {recall} outside (0, 1]")));
    }
    let n = agb_kg.len() as f64;
    if n == 0.0 {
        return Ok(0.0);
    }
    let mean = agb_kg.iter().sum::<f64>() / n;
    let s2 = agb_kg.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    Ok((1.0 - recall) * n * s2 / (1000.0 * area_ha).powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorReport {
    pub estimate: f64,
    pub truth: f64,
    pub bias: f64,
    pub rmse_pct: f64,
    /// Truth lies inside the 95% normal interval of the estimate.
    pub within_ci: bool,
}

pub fn error_report(mean: f64, variance: f64, truth: f64) -> Result<ErrorReport, SpatialError> {
    if !(truth > 0.0 && truth.is_finite()) {
        return Err(SpatialError::InvalidArgument(format!("truth {truth} must be positive")));
    }
    if !(variance >= 0.0) {
        return Err(SpatialError::NonPositiveVariance(variance));
    }
    let bias = mean - truth;
    Ok(ErrorReport {
        estimate: mean,
        truth,
        bias,
        rmse_pct: bias.abs() / truth * 100.0,
        within_ci: bias.abs() <= 1.96 * variance.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_variance_examples() {
        let e = ensemble(10.0, 1.0, 14.0, 4.0).unwrap();
        assert!((e.combined.0 - 10.8).abs() < 1e-12);
        assert!((e.combined.1 - 0.8).abs() < 1e-12);
        let eq = ensemble(3.0, 2.0, 5.0, 2.0).unwrap();
        assert_eq!(eq.weights, (0.5, 0.5));
        assert_eq!(eq.combined.0, 4.0);
        let lim = ensemble(10.0, 1.0, 99.0, 1e12).unwrap();
        assert!((lim.combined.0 - 10.0).abs() < 1e-9);
        assert_eq!(ensemble(1.0, 0.0, 1.0, 1.0), Err(SpatialError::NonPositiveVariance(0.0)));
    }

    #[test]
    fn census_variance_falls_with_recall() {
        let agb = [100.0, 250.0, 900.0, 40.0];
        let v: Vec<f64> = [0.5, 0.8, 0.9, 1.0].iter().map(|&r| census_variance(&agb, 1.0, r).unwrap()).collect();
        assert!(v.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(v[3], 0.0);
    }

    #[test]
    fn zero_error() {
        let r = error_report(120.0, 4.0, 120.0).unwrap();
        assert_eq!((r.bias, r.rmse_pct, r.within_ci), (0.0, 0.0, true));
    }
}
