use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, VecDeque};
use std::sync::atomic::{AtomicU32, Ordering};

use rayon::prelude::*;

use super::{equivalent_diameter, CrownError, CrownParams, CrownRecord, TreeTop};
use crate::grid::GridError;
use crate::raster::{Grid, RasterHeader};

/// Crown records plus the label raster they were measured from.
#[derive(Debug, Clone, PartialEq)]
pub struct Delineation {
    pub records: Vec<CrownRecord>,
    /// Per-pixel tree_id on the CHM lattice; 0 is unassigned.
    pub labels: Vec<u32>,
    pub header: RasterHeader,
}

const NEIGHBORS: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

#[inline]
fn neighbors(i: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let (c, r) = ((i % w) as isize, (i / w) as isize);
    NEIGHBORS.iter().filter_map(move |&(dc, dr)| {
        let (cc, rr) = (c + dc, r + dr);
        (cc >= 0 && rr >= 0 && (cc as usize) < w && (rr as usize) < h).then(|| rr as usize * w + cc as usize)
    })
}

/// 8-connected components of the canopy mask; 0 outside canopy.
fn canopy_components(canopy: &[bool], w: usize, h: usize) -> Vec<u32> {
    let mut comp = vec![0u32; w * h];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !canopy[start] || comp[start] != 0 {
            continue;
        }
        next += 1;
        comp[start] = next;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            for q in neighbors(p, w, h) {
                if canopy[q] && comp[q] == 0 {
                    comp[q] = next;
                    queue.push_back(q);
                }
            }
        }
    }
    comp
}

/// Priority flood from one component's markers. Highest pixels leave the
/// queue first; equal heights leave in push order. Labels are written only
/// inside the component, so concurrent floods never touch the same pixel.
fn flood(chm: &[f32], canopy: &[bool], w: usize, h: usize, markers: &[usize], floors: &[f32], labels: &[AtomicU32]) {
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    for &p in markers {
        heap.push((chm[p].to_bits(), Reverse(seq), p));
        seq += 1;
    }
    while let Some((_, _, p)) = heap.pop() {
        let id = labels[p].load(Ordering::Relaxed);
        let floor = floors[id as usize - 1];
        for q in neighbors(p, w, h) {
            if canopy[q] && chm[q] >= floor && labels[q].load(Ordering::Relaxed) == 0 {
                labels[q].store(id, Ordering::Relaxed);
                heap.push((chm[q].to_bits(), Reverse(seq), q));
                seq += 1;
            }
        }
    }
}

/// Marker-controlled watershed on the inverted CHM.
///
/// Canopy pixels (CHM ≥ `min_tree_height`) are flooded from the treetops in
/// order of decreasing height. A crown never claims a pixel lower than
/// `crown_floor_fraction` × its top height. Disconnected canopy patches are
/// flooded independently and in parallel; the result does not depend on the
/// schedule.
pub fn watershed_crowns(
    chm: &Grid,
    tops: &[TreeTop],
    species: &Grid,
    params: &CrownParams,
) -> Result<Delineation, CrownError> {
    params.validate()?;
    if !species.header().same_lattice(chm.header()) {
        return Err(GridError::LatticeMismatch.into());
    }
    let (w, h) = (chm.width(), chm.height());
    let v = chm.to_f32_vec();
    let min_h = params.min_tree_height;
    let canopy: Vec<bool> = v.iter().map(|&x| !x.is_nan() && x as f64 >= min_h).collect();

    let mut marker_at = HashMap::new();
    for (index, t) in tops.iter().enumerate() {
        let (col, row) = (t.col, t.row);
        if col >= w || row >= h || !canopy[row * w + col] {
            return Err(CrownError::MarkerOutsideCanopy { index, col, row });
        }
        if marker_at.insert(row * w + col, index).is_some() {
            return Err(CrownError::DuplicateMarker { index, col, row });
        }
    }

    let comp = canopy_components(&canopy, w, h);
    let labels: Vec<AtomicU32> = (0..w * h).map(|_| AtomicU32::new(0)).collect();
    let mut floors = Vec::with_capacity(tops.len());
    let mut by_component: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (index, t) in tops.iter().enumerate() {
        let p = t.row * w + t.col;
        floors.push((params.crown_floor_fraction * v[p] as f64) as f32);
        labels[p].store(index as u32 + 1, Ordering::Relaxed);
        by_component.entry(comp[p]).or_default().push(p);
    }
    by_component.into_par_iter().for_each(|(_, markers)| flood(&v, &canopy, w, h, &markers, &floors, &labels));
    let labels: Vec<u32> = labels.into_iter().map(AtomicU32::into_inner).collect();

    let n = tops.len();
    let mut counts = vec![0usize; n];
    let mut species_counts = vec![[0u32; 256]; n];
    for (i, &id) in labels.iter().enumerate() {
        if id > 0 {
            let k = id as usize - 1;
            counts[k] += 1;
            if let Some(s) = species.value(i) {
                species_counts[k][s as u8 as usize] += 1;
            }
        }
    }
    let pixel_area = chm.geotransform().pixel_area();
    let records = tops
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let sc = &species_counts[k];
            let mut best = (0u32, 0u8);
            for s in 1..256 {
                if sc[s] > best.0 {
                    best = (sc[s], s as u8);
                }
            }
            let crown_area = counts[k] as f64 * pixel_area;
            CrownRecord {
                tree_id: k as u32 + 1,
                top: *t,
                crown_area,
                crown_diameter: equivalent_diameter(crown_area),
                species_id: best.1,
                pixel_count: counts[k],
            }
        })
        .collect();
    Ok(Delineation { records, labels, header: chm.header().clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crowns::detect_treetops;
    use crate::raster::{GeoTransform, SampleType};

    fn chm(w: usize, h: usize, v: Vec<f32>) -> Grid {
        Grid::from_f32(&RasterHeader::new(w, h, SampleType::Float32, GeoTransform::north_up(0.0, 0.0, 0.5)), v).unwrap()
    }

    fn species_for(g: &Grid, id: u8) -> Grid {
        Grid::from_u8(g.header(), vec![id; g.len()], None).unwrap()
    }

    #[test]
    fn isolated_crown_claims_pixels_above_floor() {
        let n = 31;
        let v: Vec<f32> = (0..n * n)
            .map(|i| {
                let (x, y) = ((i % n) as f32 - 15.0, (i / n) as f32 - 15.0);
                (20.0 - 0.1 * (x * x + y * y)).max(0.0)
            })
            .collect();
        let g = chm(n, n, v.clone());
        let p = CrownParams::default();
        let tops = detect_treetops(&g, &p).unwrap();
        let d = watershed_crowns(&g, &tops, &species_for(&g, 2), &p).unwrap();
        let expected = v.iter().filter(|&&x| x >= 6.0).count();
        assert_eq!(d.records.len(), 1);
        assert_eq!(d.records[0].pixel_count, expected);
        assert_eq!(d.records[0].crown_area, expected as f64 * 0.25);
        assert_eq!(d.records[0].species_id, 2);
        let dia = d.records[0].crown_diameter;
        assert!((dia - 2.0 * (expected as f64 * 0.25 / std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_markers_and_bad_markers() {
        let g = chm(4, 4, vec![5.0; 16]);
        let s = species_for(&g, 0);
        let d = watershed_crowns(&g, &[], &s, &CrownParams::default()).unwrap();
        assert!(d.records.is_empty() && d.labels.iter().all(|&l| l == 0));
        let low = TreeTop { col: 0, row: 0, x: 0.0, y: 0.0, height: 1.0 };
        let g2 = chm(4, 4, vec![1.0; 16]);
        assert!(matches!(
            watershed_crowns(&g2, &[low], &s, &CrownParams::default()),
            Err(CrownError::MarkerOutsideCanopy { index: 0, .. })
        ));
    }
}
