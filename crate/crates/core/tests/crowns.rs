use canopy_core::crowns::{crown_rings, detect_treetops, watershed_crowns, CrownParams, TreeTop};
use canopy_core::raster::{GeoTransform, Grid, RasterHeader, SampleType};
use proptest::prelude::*;

fn chm(w: usize, h: usize, v: Vec<f32>) -> Grid {
    Grid::from_f32(&RasterHeader::new(w, h, SampleType::Float32, GeoTransform::north_up(500.0, 900.0, 0.5)), v).unwrap()
}

fn no_species(g: &Grid) -> Grid {
    Grid::from_u8(g.header(), vec![0; g.len()], None).unwrap()
}

/// Paraboloid crowns `h·(1 - 0.5·(d/R)²)` combined by maximum.
fn crowns_surface(w: usize, h: usize, trees: &[(f32, f32, f32, f32)]) -> Vec<f32> {
    (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f32, (i / w) as f32);
            trees
                .iter()
                .map(|&(cx, cy, top, r)| {
                    let d2 = ((x - cx).powi(2) + (y - cy).powi(2)) / (r * r);
                    if d2 <= 1.0 {
                        top * (1.0 - 0.5 * d2)
                    } else {
                        0.0
                    }
                })
                .fold(0.0, f32::max)
        })
        .collect()
}

/// Reference flood: keep every claimed-but-unexpanded pixel in a plain list
/// and expand the highest one, earliest claim first on ties.
fn oracle_flood(v: &[f32], w: usize, h: usize, tops: &[TreeTop], p: &CrownParams) -> Vec<u32> {
    let mut labels = vec![0u32; w * h];
    let mut frontier: Vec<(usize, u64)> = Vec::new();
    let mut floor = Vec::new();
    let mut order = 0u64;
    for (k, t) in tops.iter().enumerate() {
        let i = t.row * w + t.col;
        labels[i] = k as u32 + 1;
        floor.push((p.crown_floor_fraction * v[i] as f64) as f32);
        frontier.push((i, order));
        order += 1;
    }
    while !frontier.is_empty() {
        let mut best = 0;
        for j in 1..frontier.len() {
            let (a, b) = (frontier[j], frontier[best]);
            if v[a.0] > v[b.0] || (v[a.0] == v[b.0] && a.1 < b.1) {
                best = j;
            }
        }
        let (i, _) = frontier.swap_remove(best);
        let id = labels[i];
        let (c, r) = ((i % w) as i64, (i / w) as i64);
        for dr in -1..=1i64 {
            for dc in -1..=1i64 {
                if (dr, dc) == (0, 0) {
                    continue;
                }
                let (cc, rr) = (c + dc, r + dr);
                if cc < 0 || rr < 0 || cc >= w as i64 || rr >= h as i64 {
                    continue;
                }
                let q = rr as usize * w + cc as usize;
                let x = v[q];
                if labels[q] == 0 && !x.is_nan() && x as f64 >= p.min_tree_height && x >= floor[id as usize - 1] {
                    labels[q] = id;
                    frontier.push((q, order));
                    order += 1;
                }
            }
        }
    }
    labels
}

#[test]
fn saddle_between_equal_crowns_matches_oracle() {
    let (w, h) = (48, 32);
    let v = crowns_surface(w, h, &[(15.0, 16.0, 18.0, 11.0), (32.0, 16.0, 18.0, 11.0)]);
    let g = chm(w, h, v.clone());
    let p = CrownParams::default();
    let tops = detect_treetops(&g, &p).unwrap();
    assert_eq!(tops.len(), 2);
    let d = watershed_crowns(&g, &tops, &no_species(&g), &p).unwrap();
    assert_eq!(d.labels, oracle_flood(&v, w, h, &tops, &p));
    // The saddle ridge sits midway between the apexes.
    let left = d.records.iter().find(|r| r.top.col == 15).unwrap().tree_id;
    for row in 0..h {
        for col in 0..w {
            let l = d.labels[row * w + col];
            if l != 0 {
                assert_eq!(l == left, col <= 23, "({col}, {row})");
            }
        }
    }
}

#[test]
fn polygons_cover_crown_area() {
    let (w, h) = (40, 40);
    let v = crowns_surface(w, h, &[(12.0, 12.0, 20.0, 9.0), (27.0, 25.0, 14.0, 8.0), (10.0, 30.0, 9.0, 5.0)]);
    let g = chm(w, h, v);
    let p = CrownParams::default();
    let tops = detect_treetops(&g, &p).unwrap();
    let d = watershed_crowns(&g, &tops, &no_species(&g), &p).unwrap();
    let rings = crown_rings(&d);
    for (rec, rs) in d.records.iter().zip(&rings) {
        let area: f64 = rs
            .iter()
            .map(|ring| {
                let (x0, y0) = ring[0];
                ring.windows(2).map(|q| (q[0].0 - x0) * (q[1].1 - y0) - (q[1].0 - x0) * (q[0].1 - y0)).sum::<f64>() / 2.0
            })
            .sum();
        assert!((area - rec.crown_area).abs() < 1e-9, "{area} vs {}", rec.crown_area);
    }
}

fn arb_scene() -> impl Strategy<Value = (usize, usize, Vec<(f32, f32, f32, f32)>)> {
    (16usize..64, 16usize..64).prop_flat_map(|(w, h)| {
        let tree = (0.0..w as f32, 0.0..h as f32, 4.0f32..30.0, 2.0f32..10.0);
        (Just(w), Just(h), prop::collection::vec(tree, 0..8))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn watershed_matches_oracle_and_partitions((w, h, trees) in arb_scene(), noise in any::<u64>()) {
        let mut v = crowns_surface(w, h, &trees);
        let mut s = noise;
        for x in v.iter_mut() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            *x += ((s >> 40) % 4) as f32 * 0.25;
        }
        let g = chm(w, h, v.clone());
        let p = CrownParams::default();
        let tops = detect_treetops(&g, &p).unwrap();
        let d = watershed_crowns(&g, &tops, &no_species(&g), &p).unwrap();
        prop_assert_eq!(&d.labels, &oracle_flood(&v, w, h, &tops, &p));
        prop_assert_eq!(d.records.len(), tops.len());
        for (i, &l) in d.labels.iter().enumerate() {
            if l != 0 {
                prop_assert!(v[i] as f64 >= p.min_tree_height);
            }
        }
        for (k, t) in tops.iter().enumerate() {
            prop_assert_eq!(d.labels[t.row * w + t.col], k as u32 + 1);
        }
        let total: usize = d.records.iter().map(|r| r.pixel_count).sum();
        prop_assert_eq!(total, d.labels.iter().filter(|&&l| l != 0).count());
    }

    #[test]
    fn raising_min_height_never_adds_tops((w, h, trees) in arb_scene(), a in 1.0f64..10.0, b in 0.0f64..10.0) {
        let g = chm(w, h, crowns_surface(w, h, &trees));
        let lo = CrownParams { min_tree_height: a, ..CrownParams::default() };
        let hi = CrownParams { min_tree_height: a + b + 1e-3, ..lo };
        prop_assert!(detect_treetops(&g, &hi).unwrap().len() <= detect_treetops(&g, &lo).unwrap().len());
    }
}
