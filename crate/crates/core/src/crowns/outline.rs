use std::collections::HashMap;

use super::Delineation;

/// Closed ring of world coordinates; the last point repeats the first.
pub type Ring = Vec<(f64, f64)>;

type Vertex = (i64, i64);

/// Outline of every crown along pixel edges, indexed by `tree_id - 1`.
///
/// The first ring is the exterior (counter-clockwise in world coordinates),
/// the rest are holes (clockwise). Diagonally touching pixels of one crown
/// stay in a single ring that touches itself at the shared corner.
pub fn crown_rings(d: &Delineation) -> Vec<Vec<Ring>> {
    let (w, h) = (d.header.width, d.header.height);
    let mut edges: HashMap<u32, Vec<(Vertex, Vertex)>> = HashMap::new();
    let at = |c: i64, r: i64| -> u32 {
        if c < 0 || r < 0 || c >= w as i64 || r >= h as i64 {
            0
        } else {
            d.labels[r as usize * w + c as usize]
        }
    };
    for r in 0..h as i64 {
        for c in 0..w as i64 {
            let id = at(c, r);
            if id == 0 {
                continue;
            }
            let e = edges.entry(id).or_default();
            if at(c, r - 1) != id {
                e.push(((c + 1, r), (c, r)));
            }
            if at(c - 1, r) != id {
                e.push(((c, r), (c, r + 1)));
            }
            if at(c, r + 1) != id {
                e.push(((c, r + 1), (c + 1, r + 1)));
            }
            if at(c + 1, r) != id {
                e.push(((c + 1, r + 1), (c + 1, r)));
            }
        }
    }
    let gt = d.header.geotransform;
    let world = |(c, r): Vertex| (gt.origin_x + c as f64 * gt.pixel_size_x, gt.origin_y + r as f64 * gt.pixel_size_y);
    d.records
        .iter()
        .map(|rec| {
            let rings = edges.get(&rec.tree_id).map(|e| trace(e)).unwrap_or_default();
            let mut rings: Vec<Ring> = rings.into_iter().map(|r| r.into_iter().map(world).collect()).collect();
            for ring in &mut rings {
                ring.push(ring[0]);
            }
            // Exterior first, with orientations fixed for south-up lattices.
            rings.sort_by(|a, b| signed_area(b).abs().total_cmp(&signed_area(a).abs()));
            for (i, ring) in rings.iter_mut().enumerate() {
                let ccw = signed_area(ring) > 0.0;
                if (i == 0) != ccw {
                    ring.reverse();
                }
            }
            rings
        })
        .collect()
}

fn trace(edges: &[(Vertex, Vertex)]) -> Vec<Vec<Vertex>> {
    let mut out_of: HashMap<Vertex, Vec<usize>> = HashMap::new();
    for (i, (a, _)) in edges.iter().enumerate() {
        out_of.entry(*a).or_default().push(i);
    }
    let mut used = vec![false; edges.len()];
    let mut rings = Vec::new();
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let mut ring = vec![edges[start].0];
        let (mut prev, mut cur) = edges[start];
        loop {
            let dir = (cur.0 - prev.0, cur.1 - prev.1);
            // Right turn, straight, left turn, in y-down pixel space.
            let prefs = [(-dir.1, dir.0), dir, (dir.1, -dir.0)];
            let next = out_of.get(&cur).and_then(|cands| {
                prefs.iter().find_map(|p| {
                    cands.iter().copied().find(|&e| {
                        let (a, b) = edges[e];
                        !used[e] && (b.0 - a.0, b.1 - a.1) == *p
                    })
                })
            });
            let Some(e) = next else { break };
            used[e] = true;
            if dir != (edges[e].1 .0 - cur.0, edges[e].1 .1 - cur.1) {
                ring.push(cur);
            }
            prev = cur;
            cur = edges[e].1;
        }
        // Drop the start vertex when it lies mid-way along a straight run.
        if ring.len() > 2 {
            let (a, b, c) = (ring[ring.len() - 1], ring[0], ring[1]);
            if (b.0 - a.0) * (c.1 - b.1) == (b.1 - a.1) * (c.0 - b.0) {
                ring.remove(0);
            }
        }
        rings.push(ring);
    }
    rings
}

/// Shoelace area of a closed ring, positive when counter-clockwise.
pub(crate) fn signed_area(ring: &[(f64, f64)]) -> f64 {
    let Some(&(x0, y0)) = ring.first() else { return 0.0 };
    ring.windows(2)
        .map(|p| (p[0].0 - x0) * (p[1].1 - y0) - (p[1].0 - x0) * (p[0].1 - y0))
        .sum::<f64>()
        / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crowns::{CrownRecord, TreeTop};
    use crate::raster::{GeoTransform, RasterHeader, SampleType};

    fn delineation(w: usize, h: usize, labels: Vec<u32>, ids: u32) -> Delineation {
        let top = TreeTop { col: 0, row: 0, x: 0.0, y: 0.0, height: 5.0 };
        let records = (1..=ids)
            .map(|tree_id| CrownRecord {
                tree_id,
                top,
                crown_area: 0.0,
                crown_diameter: 0.0,
                species_id: 0,
                pixel_count: 0,
            })
            .collect();
        Delineation {
            records,
            labels,
            header: RasterHeader::new(w, h, SampleType::Float32, GeoTransform::north_up(100.0, 200.0, 0.5)),
        }
    }

    #[test]
    fn single_pixel_square() {
        let rings = crown_rings(&delineation(1, 1, vec![1], 1));
        assert_eq!(rings[0], vec![vec![(100.5, 200.0), (100.0, 200.0), (100.0, 199.5), (100.5, 199.5), (100.5, 200.0)]]);
        assert!(signed_area(&rings[0][0]) > 0.0);
    }

    #[test]
    fn diagonal_pixels_share_one_ring() {
        let rings = crown_rings(&delineation(2, 2, vec![1, 0, 0, 1], 1));
        assert_eq!(rings[0].len(), 1);
        assert!((signed_area(&rings[0][0]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn hole_is_clockwise() {
        let mut labels = vec![1u32; 9];
        labels[4] = 0;
        let rings = crown_rings(&delineation(3, 3, labels, 1));
        assert_eq!(rings[0].len(), 2);
        assert!((signed_area(&rings[0][0]) - 2.25).abs() < 1e-12);
        assert!((signed_area(&rings[0][1]) + 0.25).abs() < 1e-12);
        assert_eq!(rings[0][0].len(), 5);
    }
}
