//! Scoring an inventory against synthetic ground truth.

use canopy_core::crowns::CrownRecord;
use canopy_core::synthforest::SynthTree;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Detection {
    pub true_positives: usize,
    pub detected: usize,
    pub truth: usize,
    pub precision: f64,
    pub recall: f64,
    /// `(record index, truth index)` for every match.
    #[serde(skip)]
    pub pairs: Vec<(usize, usize)>,
}

/// Match tolerance for a true tree: a quarter of its crown diameter, but no
/// less than two pixels.
pub fn match_radius(tree: &SynthTree, resolution: f64) -> f64 {
    (0.25 * tree.crown_diameter).max(2.0 * resolution)
}

/// One-to-one matching of detected treetops to true stems, closest pairs first.
pub fn match_trees(records: &[CrownRecord], truth: &[SynthTree], resolution: f64) -> Detection {
    let reach = truth.iter().map(|t| match_radius(t, resolution)).fold(0.0, f64::max);
    let mut sorted: Vec<usize> = (0..truth.len()).collect();
    sorted.sort_by(|&a, &b| truth[a].x.total_cmp(&truth[b].x));
    let xs: Vec<f64> = sorted.iter().map(|&i| truth[i].x).collect();
    let mut cands = Vec::new();
    for (ri, r) in records.iter().enumerate() {
        let lo = xs.partition_point(|&x| x < r.top.x - reach);
        for &ti in &sorted[lo..] {
            let t = &truth[ti];
            if t.x > r.top.x + reach {
                break;
            }
            let d = (t.x - r.top.x).hypot(t.y - r.top.y);
            if d <= match_radius(t, resolution) {
                cands.push((d, ri, ti));
            }
        }
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let (mut used_r, mut used_t) = (vec![false; records.len()], vec![false; truth.len()]);
    let mut pairs = Vec::new();
    for (_, ri, ti) in cands {
        if !used_r[ri] && !used_t[ti] {
            used_r[ri] = true;
            used_t[ti] = true;
            pairs.push((ri, ti));
        }
    }
    let tp = pairs.len();
    let ratio = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
    Detection {
        true_positives: tp,
        detected: records.len(),
        truth: truth.len(),
        precision: ratio(tp, records.len()),
        recall: ratio(tp, truth.len()),
        pairs,
    }
}
