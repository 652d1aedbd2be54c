use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::SpatialError;
use crate::numeric::{fmt6, neumaier_sum};

pub const DEFAULT_PLOT_RADIUS_M: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundPlot {
    pub x: f64,
    pub y: f64,
    #[serde(rename = "radius_m")]
    pub radius: f64,
    #[serde(rename = "biomass_mg_ha")]
    pub biomass_density: f64,
}

impl GroundPlot {
    pub fn area_ha(&self) -> f64 {
        PI * self.radius * self.radius / 1e4
    }
}

/// A stem position with its above-ground biomass, from ground truth or a census.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StemRecord {
    pub x: f64,
    pub y: f64,
    pub agb_kg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotParams {
    pub spacing_m: f64,
    pub radius_m: f64,
    /// Reject radii outside the 7–15 m field protocol.
    pub enforce_protocol_radius: bool,
}

impl Default for PlotParams {
    fn default() -> Self {
        PlotParams { spacing_m: 300.0, radius_m: DEFAULT_PLOT_RADIUS_M, enforce_protocol_radius: true }
    }
}

impl PlotParams {
    pub fn validate(&self) -> Result<(), SpatialError> {
        let bad = |m: String| Err(SpatialError::InvalidArgument(m));
        if !(self.radius_m > 0.0 && self.radius_m.is_finite()) {
            return bad(format!("plot radius {} must be positive", self.radius_m));
        }
        if self.enforce_protocol_radius && !(7.0..=15.0).contains(&self.radius_m) {
            return bad(format!("plot radius {} outside 7–15 m", self.radius_m));
        }
        // Disjoint discs: each stem belongs to at most one plot.
        if !(self.spacing_m >= 2.0 * self.radius_m && self.spacing_m.is_finite()) {
            return bad(format!("plot spacing {} must be at least twice the radius", self.spacing_m));
        }
        Ok(())
    }
}

/// Plot centres on a regular lattice centred in `extent = (xmin, ymin, xmax, ymax)`,
/// ordered by ascending y then x. Every disc lies inside the extent.
pub fn plot_centres(extent: (f64, f64, f64, f64), params: &PlotParams) -> Vec<(f64, f64)> {
    let axis = |lo: f64, hi: f64| -> Vec<f64> {
        let n = ((hi - lo) / params.spacing_m).floor() as usize;
        let off = lo + ((hi - lo) - (n.max(1) - 1) as f64 * params.spacing_m) / 2.0;
        (0..n).map(|i| off + i as f64 * params.spacing_m).collect()
    };
    let (xs, ys) = (axis(extent.0, extent.2), axis(extent.1, extent.3));
    ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect()
}

pub fn sample_plots(
    stems: &[StemRecord],
    extent: (f64, f64, f64, f64),
    params: &PlotParams,
) -> Result<Vec<GroundPlot>, SpatialError> {
    params.validate()?;
    let centres = plot_centres(extent, params);
    let Some(&(x0, y0)) = centres.first() else { return Ok(Vec::new()) };
    let nx = centres.iter().take_while(|c| c.1 == y0).count();
    let ny = centres.len() / nx;
    let r2 = params.radius_m * params.radius_m;
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); centres.len()];
    for s in stems {
        let i = ((s.x - x0) / params.spacing_m).round();
        let j = ((s.y - y0) / params.spacing_m).round();
        if i < 0.0 || j < 0.0 || i >= nx as f64 || j >= ny as f64 {
            continue;
        }
        let k = j as usize * nx + i as usize;
        let (cx, cy) = centres[k];
        if (s.x - cx).powi(2) + (s.y - cy).powi(2) <= r2 {
            members[k].push(s.agb_kg);
        }
    }
    let area_ha = PI * r2 / 1e4;
    Ok(centres
        .iter()
        .zip(members)
        .map(|(&(x, y), m)| GroundPlot {
            x,
            y,
            radius: params.radius_m,
            biomass_density: neumaier_sum(m) / 1000.0 / area_ha,
        })
        .collect())
}

pub fn parse_plots_csv(text: &str) -> Result<Vec<GroundPlot>, SpatialError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| SpatialError::Parse { line: 1, reason: e.to_string() })?;
    if headers.iter().collect::<Vec<_>>() != ["x", "y", "radius_m", "biomass_mg_ha"] {
        return Err(SpatialError::Parse { line: 1, reason: "header must be x,y,radius_m,biomass_mg_ha".into() });
    }
    let mut out = Vec::new();
    for rec in rdr.deserialize::<GroundPlot>() {
        let p = rec.map_err(|e| SpatialError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = out.len() as u64 + 2;
        if ![p.x, p.y, p.radius, p.biomass_density].iter().all(|v| v.is_finite()) {
            return Err(SpatialError::Parse { line, reason: "non-finite value".into() });
        }
        if p.radius <= 0.0 || p.biomass_density < 0.0 {
            return Err(SpatialError::Parse { line, reason: "radius must be positive and biomass non-negative".into() });
        }
        out.push(p);
    }
    Ok(out)
}

/// Coordinates at centimetres like the truth table; radius and biomass at
/// 6 significant digits.
pub fn plots_to_csv(plots: &[GroundPlot]) -> String {
    let mut out = String::from("x,y,radius_m,biomass_mg_ha\n");
    for p in plots {
        out.push_str(&format!("{:.2},{:.2},{},{}\n", p.x, p.y, fmt6(p.radius), fmt6(p.biomass_density)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXTENT: (f64, f64, f64, f64) = (0.0, 0.0, 1000.0, 700.0);

    #[test]
    fn lattice_is_centred() {
        let c = plot_centres(EXTENT, &PlotParams::default());
        assert_eq!(c.len(), 3 * 2);
        assert_eq!(c[0], (200.0, 200.0));
        assert_eq!(c[5], (800.0, 500.0));
    }

    #[test]
    fn empty_forest_gives_zero_plots() {
        let plots = sample_plots(&[], EXTENT, &PlotParams::default()).unwrap();
        assert!(plots.iter().all(|p| p.biomass_density == 0.0));
    }

    #[test]
    fn single_tree_density() {
        let stems = [StemRecord { x: 205.0, y: 195.0, agb_kg: 500.0 }, StemRecord { x: 230.0, y: 200.0, agb_kg: 9.0 }];
        let plots = sample_plots(&stems, EXTENT, &PlotParams::default()).unwrap();
        let a = plots[0].area_ha();
        assert_eq!(plots[0].biomass_density, 500.0 / 1000.0 / a);
        assert!(plots[1..].iter().all(|p| p.biomass_density == 0.0));
    }

    #[test]
    fn radius_protocol() {
        let p = PlotParams { radius_m: 20.0, ..PlotParams::default() };
        assert!(p.validate().is_err());
        assert!(PlotParams { enforce_protocol_radius: false, ..p }.validate().is_ok());
        assert!(PlotParams { spacing_m: 20.0, ..PlotParams::default() }.validate().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let plots = vec![GroundPlot { x: 1.5, y: -2.0, radius: 12.0, biomass_density: 210.25 }];
        let text = plots_to_csv(&plots);
        assert_eq!(text, "x,y,radius_m,biomass_mg_ha\n1.50,-2.00,12,210.25\n");
        assert_eq!(parse_plots_csv(&text).unwrap(), plots);
        assert!(matches!(
            parse_plots_csv("x,y,radius_m,biomass_mg_ha\n1,2,-3,4\n"),
            Err(SpatialError::Parse { line: 2, .. })
        ));
    }
}
