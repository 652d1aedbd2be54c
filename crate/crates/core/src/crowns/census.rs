use std::collections::BTreeMap;

use serde::Serialize;

use super::CrownRecord;

pub const HEIGHT_BIN_M: f64 = 5.0;
pub const CROWN_DIAMETER_BIN_M: f64 = 1.0;

/// Fixed-width histogram starting at 0; `counts[i]` covers
/// `[i·bin_width, (i+1)·bin_width)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(bin_width: f64, values: impl IntoIterator<Item = f64>) -> Self {
        let mut counts = Vec::new();
        for v in values {
            let bin = (v.max(0.0) / bin_width).floor() as usize;
            if counts.len() <= bin {
                counts.resize(bin + 1, 0);
            }
            counts[bin] += 1;
        }
        Histogram { bin_width, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Visible-crown census. Counts crowns seen from above, not stems.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CensusSummary {
    pub tree_count: usize,
    pub per_species: BTreeMap<u8, usize>,
    pub height_histogram: Histogram,
    pub crown_diameter_histogram: Histogram,
    pub area_ha: f64,
    pub stems_per_ha: f64,
}

pub fn census(crowns: &[CrownRecord], area_ha: f64) -> CensusSummary {
    let mut per_species = BTreeMap::new();
    for c in crowns {
        *per_species.entry(c.species_id).or_insert(0) += 1;
    }
    CensusSummary {
        tree_count: crowns.len(),
        per_species,
        height_histogram: Histogram::new(HEIGHT_BIN_M, crowns.iter().map(|c| c.top.height)),
        crown_diameter_histogram: Histogram::new(CROWN_DIAMETER_BIN_M, crowns.iter().map(|c| c.crown_diameter)),
        area_ha,
        stems_per_ha: if area_ha > 0.0 { crowns.len() as f64 / area_ha } else { 0.0 },
    }
}
