use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::generate::{rng, STREAM_NOISE_BASE};
use super::{GroundTruth, SynthParams};
use crate::raster::Grid;
use crate::species::GROUND_SIGNATURE;

const TILE: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneRasters {
    pub dsm: Grid,
    pub dem: Grid,
    pub red: Grid,
    pub green: Grid,
    pub blue: Grid,
    pub nir: Grid,
}

impl SceneRasters {
    pub fn bands(&self) -> [&Grid; 4] {
        [&self.red, &self.green, &self.blue, &self.nir]
    }
}

/// Paraboloid crowns `h·(1 − ½(d/R)²)` for `d ≤ R`, combined by maximum over
/// the terrain. Pixels take the spectrum of the tallest crown covering
/// them, or the ground signature.
pub fn render(truth: &GroundTruth, p: &SynthParams) -> SceneRasters {
    let dem = &truth.terrain;
    let header = dem.header().clone();
    let (w, h) = (header.width, header.height);
    let gt = header.geotransform;
    let centroids: Vec<[f64; 4]> = truth
        .trees
        .iter()
        .map(|t| p.species.iter().find(|s| s.0.species_id == t.species_id).expect("tree species is in the mix").0.centroid())
        .collect();

    // Trees whose crowns touch each tile.
    let (tx, ty) = (w.div_ceil(TILE), h.div_ceil(TILE));
    let mut tile_trees: Vec<Vec<usize>> = vec![Vec::new(); tx * ty];
    for (i, t) in truth.trees.iter().enumerate() {
        let r = t.crown_diameter / 2.0;
        let (c0, r0) = gt.world_to_pixel(t.x - r, t.y + r);
        let (c1, r1) = gt.world_to_pixel(t.x + r, t.y - r);
        let span = |a: f64, b: f64, n: usize| -> Option<(usize, usize)> {
            let (lo, hi) = (a.min(b).floor(), a.max(b).ceil());
            if hi < 0.0 || lo > n as f64 - 1.0 {
                return None;
            }
            Some((lo.max(0.0) as usize / TILE, hi.min(n as f64 - 1.0) as usize / TILE))
        };
        let (Some((cx0, cx1)), Some((ry0, ry1))) = (span(c0, c1, w), span(r0, r1, h)) else { continue };
        for by in ry0..=ry1 {
            for bx in cx0..=cx1 {
                tile_trees[by * tx + bx].push(i);
            }
        }
    }

    let dem_v = dem.as_f32().expect("terrain is Float32");
    let rows: Vec<(Vec<f32>, [Vec<f32>; 4])> = (0..h)
        .into_par_iter()
        .map(|row| {
            let mut dsm = Vec::with_capacity(w);
            let mut bands: [Vec<f32>; 4] = std::array::from_fn(|_| Vec::with_capacity(w));
            let mut noise = (p.spectral_noise > 0.0).then(|| rng(p.seed, STREAM_NOISE_BASE + row as u64));
            for col in 0..w {
                let (x, y) = gt.pixel_center(col as f64, row as f64);
                let cands = &tile_trees[(row / TILE) * tx + col / TILE];
                let mut best = 0.0f64;
                let mut owner = None;
                for &i in cands {
                    let t = &truth.trees[i];
                    let r = t.crown_diameter / 2.0;
                    let d2 = (x - t.x).powi(2) + (y - t.y).powi(2);
                    if d2 <= r * r {
                        let z = t.height * (1.0 - 0.5 * d2 / (r * r));
                        if z > best {
                            best = z;
                            owner = Some(i);
                        }
                    }
                }
                dsm.push(dem_v[row * w + col] + best as f32);
                let base = owner.map_or(GROUND_SIGNATURE, |i| centroids[i]);
                for (k, band) in bands.iter_mut().enumerate() {
                    let e: f64 = noise.as_mut().map_or(0.0, |r| StandardNormal.sample(r));
                    band.push((base[k] + p.spectral_noise * e).clamp(0.0, 1.0) as f32);
                }
            }
            (dsm, bands)
        })
        .collect();

    let mut dsm = Vec::with_capacity(w * h);
    let mut bands: [Vec<f32>; 4] = std::array::from_fn(|_| Vec::with_capacity(w * h));
    for (d, b) in rows {
        dsm.extend(d);
        for (acc, v) in bands.iter_mut().zip(b) {
            acc.extend(v);
        }
    }
    let grid = |v: Vec<f32>| Grid::from_f32(&header, v).expect("render size matches terrain");
    let [red, green, blue, nir] = bands;
    SceneRasters { dsm: grid(dsm), dem: dem.clone(), red: grid(red), green: grid(green), blue: grid(blue), nir: grid(nir) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allometry::AllometricModel;
    use crate::synthforest::{generate, SynthTree};

    fn params() -> SynthParams {
        SynthParams { width_m: 30.0, height_m: 20.0, resolution: 0.5, ..SynthParams::default() }
    }

    #[test]
    fn bare_ground_dsm_equals_dem() {
        let p = SynthParams { stems_per_ha: 0.0, ..params() };
        let t = generate(&p, &AllometricModel::tropical_with_height(), 0.47).unwrap();
        let s = render(&t, &p);
        assert_eq!(s.dsm, s.dem);
    }

    #[test]
    fn apex_height_within_half_pixel() {
        let p = SynthParams { stems_per_ha: 0.0, spectral_noise: 0.0, ..params() };
        let mut t = generate(&p, &AllometricModel::tropical_with_height(), 0.47).unwrap();
        let sp = p.species[0].0.clone();
        t.trees.push(SynthTree {
            tree_id: 1,
            x: p.origin.0 + 12.3,
            y: p.origin.1 - 8.9,
            height: 17.0,
            crown_diameter: 5.0,
            dbh_cm: 25.0,
            species_id: sp.species_id,
            agb_kg: 1.0,
            carbon_kg: 0.47,
            co2e_kg: 1.0,
        });
        let s = render(&t, &p);
        let (dsm, dem) = (s.dsm.to_f32_vec(), s.dem.to_f32_vec());
        let top = dsm.iter().zip(&dem).map(|(a, b)| (a - b) as f64).fold(0.0, f64::max);
        // Half-pixel diagonal from the apex.
        let drop = 17.0 * 0.5 * (0.5f64.powi(2) / 2.0) / 2.5f64.powi(2);
        assert!(top <= 17.0 + 1e-4 && top >= 17.0 - drop - 1e-4, "{top}");
        let (c, r) = s.dsm.geotransform().world_to_pixel(p.origin.0 + 12.3, p.origin.1 - 8.9);
        let i = r.round() as usize * s.dsm.width() + c.round() as usize;
        assert_eq!(s.nir.to_f32_vec()[i], sp.nir as f32);
        assert_eq!(s.nir.to_f32_vec()[0], GROUND_SIGNATURE[3] as f32);
    }

    #[test]
    fn dsm_never_below_dem_and_threads_agree() {
        let p = SynthParams { width_m: 50.0, height_m: 50.0, ..params() };
        let t = generate(&p, &AllometricModel::tropical_with_height(), 0.47).unwrap();
        let s = render(&t, &p);
        assert!(s.dsm.to_f32_vec().iter().zip(s.dem.to_f32_vec()).all(|(a, b)| *a >= b));
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| render(&t, &p));
        assert_eq!(one, s);
    }
}
