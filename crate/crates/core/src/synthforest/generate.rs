use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use serde::Serialize;

use super::{SynthError, SynthParams};
use crate::allometry::{agb, carbon_and_co2e, crown_from_dbh, stand_totals, AllometricModel, StandCarbon, TreeBiomass};
use crate::numeric::fmt6;
use crate::raster::{GeoTransform, Grid, RasterHeader, SampleType};

// Independent random streams of one seed.
const STREAM_MARK_PRESAMPLE: u64 = 0;
const STREAM_PARENTS: u64 = 1;
const STREAM_TERRAIN: u64 = 2;
const STREAM_FIELD: u64 = 3;
pub(super) const STREAM_NOISE_BASE: u64 = 1 << 32;

const PRESAMPLE: usize = 4096;
const MAX_HEIGHT_DRAWS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SynthTree {
    pub tree_id: u32,
    pub x: f64,
    pub y: f64,
    pub height: f64,
    pub crown_diameter: f64,
    pub dbh_cm: f64,
    pub species_id: u8,
    pub agb_kg: f64,
    pub carbon_kg: f64,
    pub co2e_kg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub trees: Vec<SynthTree>,
    /// The true DEM on the render lattice.
    pub terrain: Grid,
    pub totals: StandCarbon,
    pub area_ha: f64,
}

pub(super) fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

struct Mark {
    species: usize,
    height: f64,
    dbh: f64,
    crown: f64,
}

fn draw_mark(p: &SynthParams, heights: &LogNormal<f64>, r: &mut ChaCha8Rng) -> Mark {
    let u: f64 = r.random();
    let mut acc = 0.0;
    let mut species = p.species.len() - 1;
    for (i, (_, prop)) in p.species.iter().enumerate() {
        acc += prop;
        if u < acc {
            species = i;
            break;
        }
    }
    let mut height = heights.sample(r);
    for _ in 0..MAX_HEIGHT_DRAWS {
        if (p.min_height..=p.max_height).contains(&height) {
            break;
        }
        height = heights.sample(r);
    }
    let height = height.clamp(p.min_height, p.max_height);
    let dbh = p.dbh_a * height.powf(p.dbh_b);
    let crown = crown_from_dbh(dbh, &p.species[species].0);
    Mark { species, height, dbh, crown }
}

/// Smooth intensity modulation in [-1, 1].
struct Field {
    waves: Vec<(f64, f64, f64)>,
}

impl Field {
    fn new(p: &SynthParams) -> Self {
        let mut r = rng(p.seed, STREAM_FIELD);
        let waves = (0..4)
            .map(|_| {
                let theta = r.random_range(0.0..PI);
                let k = 2.0 * PI / (p.heterogeneity_scale_m * r.random_range(0.7..1.4));
                (k * theta.cos(), k * theta.sin(), r.random_range(0.0..2.0 * PI))
            })
            .collect();
        Field { waves }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        self.waves.iter().map(|(kx, ky, ph)| (kx * x + ky * y + ph).sin()).sum::<f64>() / self.waves.len() as f64
    }
}

fn terrain(p: &SynthParams) -> Grid {
    let (w, h) = p.grid_size();
    let gt = GeoTransform::north_up(p.origin.0, p.origin.1, p.resolution);
    let mut r = rng(p.seed, STREAM_TERRAIN);
    let k = p.terrain_components.max(1);
    let waves: Vec<(f64, f64, f64)> = (0..p.terrain_components)
        .map(|_| {
            let theta = r.random_range(0.0..2.0 * PI);
            let kk = 2.0 * PI / r.random_range(300.0..1500.0);
            (kk * theta.cos(), kk * theta.sin(), r.random_range(0.0..2.0 * PI))
        })
        .collect();
    let amp = p.terrain_amplitude_m / k as f64;
    let data = (0..w * h)
        .map(|i| {
            let (x, y) = gt.pixel_center((i % w) as f64, (i / w) as f64);
            let (lx, ly) = (x - p.origin.0, p.origin.1 - y);
            (p.terrain_base_m + waves.iter().map(|(kx, ky, ph)| amp * (kx * lx + ky * ly + ph).sin()).sum::<f64>()) as f32
        })
        .collect();
    Grid::from_f32(&RasterHeader::new(w, h, SampleType::Float32, gt), data).expect("terrain size matches lattice")
}

/// Draw a forest. Stems follow a Matérn II hard-core process whose parent
/// intensity is set so that the retained density matches `stems_per_ha`.
pub fn generate(p: &SynthParams, model: &AllometricModel, carbon_fraction: f64) -> Result<GroundTruth, SynthError> {
    p.validate()?;
    model.validate("synthetic forest model")?;
    let heights = LogNormal::new(p.height_mu, p.height_sigma).map_err(|e| SynthError::InvalidParams(e.to_string()))?;

    let mut pre = rng(p.seed, STREAM_MARK_PRESAMPLE);
    let marks: Vec<Mark> = (0..PRESAMPLE).map(|_| draw_mark(p, &heights, &mut pre)).collect();
    let mean_crown = marks.iter().map(|m| m.crown).sum::<f64>() / PRESAMPLE as f64;
    // Expected squared interaction distance.
    let d2 = if p.non_overlapping {
        marks.chunks(2).map(|c| ((c[0].crown + c[1].crown) / 2.0).powi(2)).sum::<f64>() / (PRESAMPLE / 2) as f64
    } else {
        (p.hard_core_factor * mean_crown).powi(2)
    };
    let rho = p.stems_per_ha / 1e4;
    let a = PI * d2;
    let lambda = if a == 0.0 || rho == 0.0 {
        rho
    } else if rho * a < 0.95 {
        -(1.0 - rho * a).ln() / a
    } else {
        return Err(SynthError::InvalidParams(format!(
            "{} stems/ha cannot be reached with a hard core of {:.2} m",
            p.stems_per_ha,
            d2.sqrt()
        )));
    };

    let area_m2 = p.width_m * p.height_m;
    let lambda_max = lambda * (1.0 + p.heterogeneity);
    let mut r = rng(p.seed, STREAM_PARENTS);
    let n = if lambda_max > 0.0 {
        Poisson::new(lambda_max * area_m2).map_err(|e| SynthError::InvalidParams(e.to_string()))?.sample(&mut r) as usize
    } else {
        0
    };
    let field = Field::new(p);
    struct Parent {
        x: f64,
        y: f64,
        arrival: f64,
        mark: Mark,
    }
    let mut parents = Vec::with_capacity(n);
    for _ in 0..n {
        let x = p.origin.0 + r.random::<f64>() * p.width_m;
        let y = p.origin.1 - r.random::<f64>() * p.height_m;
        let arrival: f64 = r.random();
        let keep: f64 = r.random();
        let mark = draw_mark(p, &heights, &mut r);
        let m = 1.0 + p.heterogeneity * field.at(x - p.origin.0, p.origin.1 - y);
        if keep * (1.0 + p.heterogeneity) < m {
            parents.push(Parent { x, y, arrival, mark });
        }
    }

    // Matérn II: a parent survives unless an earlier-arriving parent lies
    // within the hard core. Deleted parents still inhibit.
    let reach = if p.non_overlapping {
        parents.iter().map(|q| q.mark.crown).fold(0.0, f64::max)
    } else {
        d2.sqrt()
    };
    let keep: Vec<bool> = if reach == 0.0 || parents.is_empty() {
        vec![true; parents.len()]
    } else {
        let cols = (p.width_m / reach).ceil().max(1.0) as usize;
        let rows = (p.height_m / reach).ceil().max(1.0) as usize;
        let cell = |q: &Parent| {
            let c = (((q.x - p.origin.0) / reach) as usize).min(cols - 1);
            let r = (((p.origin.1 - q.y) / reach) as usize).min(rows - 1);
            (c, r)
        };
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); cols * rows];
        for (i, q) in parents.iter().enumerate() {
            let (c, r) = cell(q);
            buckets[r * cols + c].push(i);
        }
        parents
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let (c, rr) = cell(q);
                for br in rr.saturating_sub(1)..=(rr + 1).min(rows - 1) {
                    for bc in c.saturating_sub(1)..=(c + 1).min(cols - 1) {
                        for &j in &buckets[br * cols + bc] {
                            if j == i {
                                continue;
                            }
                            let o = &parents[j];
                            let limit = if p.non_overlapping { (q.mark.crown + o.mark.crown) / 2.0 } else { reach };
                            let earlier = o.arrival < q.arrival || (o.arrival == q.arrival && j < i);
                            if earlier && (q.x - o.x).powi(2) + (q.y - o.y).powi(2) < limit * limit {
                                return false;
                            }
                        }
                    }
                }
                true
            })
            .collect()
    };

    let mut trees = Vec::new();
    for (q, _) in parents.iter().zip(&keep).filter(|(_, &k)| k) {
        let sp = &p.species[q.mark.species].0;
        let agb_kg = agb(q.mark.dbh, q.mark.height, sp.wood_density, model)?;
        let (carbon_kg, co2e_kg) = carbon_and_co2e(agb_kg, carbon_fraction)?;
        trees.push(SynthTree {
            tree_id: trees.len() as u32 + 1,
            x: q.x,
            y: q.y,
            height: q.mark.height,
            crown_diameter: q.mark.crown,
            dbh_cm: q.mark.dbh,
            species_id: sp.species_id,
            agb_kg,
            carbon_kg,
            co2e_kg,
        });
    }
    let area_ha = p.area_ha();
    let biomass: Vec<TreeBiomass> = trees
        .iter()
        .map(|t| TreeBiomass { tree_id: t.tree_id, dbh_cm: t.dbh_cm, agb_kg: t.agb_kg, carbon_kg: t.carbon_kg, co2e_kg: t.co2e_kg })
        .collect();
    Ok(GroundTruth { totals: stand_totals(&biomass, area_ha), trees, terrain: terrain(p), area_ha })
}

pub const TRUTH_CSV_HEADER: &str = "tree_id,x,y,height_m,crown_diameter_m,dbh_cm,species_id,agb_kg,carbon_kg,co2e_kg";

pub fn truth_to_csv(trees: &[SynthTree]) -> String {
    let mut out = String::from(TRUTH_CSV_HEADER);
    out.push('\n');
    for t in trees {
        // Coordinates keep centimetre precision; 6 significant digits would
        // round projected eastings to metres.
        out.push_str(&format!(
            "{},{:.2},{:.2},{},{},{},{},{},{},{}\n",
            t.tree_id,
            t.x,
            t.y,
            fmt6(t.height),
            fmt6(t.crown_diameter),
            fmt6(t.dbh_cm),
            t.species_id,
            fmt6(t.agb_kg),
            fmt6(t.carbon_kg),
            fmt6(t.co2e_kg)
        ));
    }
    out
}
