//! Acceptance criteria, one test each. Every test prints a single
//! `[PASS]` or `[FAIL]` line with its measurements and runtime, then asserts.
//! Lines go straight to stdout so they appear without `--nocapture`.

use std::collections::BTreeMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::Instant;

use canopy_cli::commands::benchmark::{run_scene, BenchmarkSettings};
use canopy_cli::eval::match_trees;
use canopy_cli::pipeline::{run_pipeline, PipelineParams, SpeciesSource};
use canopy_core::allometry::{agb, dbh_from_crown, tree_biomass, AllometricModel, DEFAULT_CARBON_FRACTION};
use canopy_core::chm::{raw_chm, ChmParams};
use canopy_core::crowns::{detect_treetops, watershed_crowns, CrownParams, TreeTop};
use canopy_core::economics::{
    compare_tonnes, default_offset_models, default_survey_models, offset_cost_per_tonne, survey_cost,
};
use canopy_core::raster::{
    read_geotiff, read_geotiff_band, read_internal, write_geotiff_with, write_internal, Compression, GeoTransform, Grid,
    Layout, Predictor, RasterHeader, Samples, WriteOptions,
};
use canopy_core::spatial::{GroundPlot, OrdinaryKriging, VariogramModel};
use canopy_core::species::default_species;
use canopy_core::synthforest::{generate, render, SynthParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria run one at a time so that their runtimes are comparable.
static SERIAL: Mutex<()> = Mutex::new(());

/// Run `check`, print one verdict line, and fail unless it passed within
/// `budget_s` seconds. A panic inside `check` counts as a failure.
fn criterion(n: u32, name: &str, budget_s: Option<f64>, check: impl FnOnce() -> (bool, String)) {
    let _serial = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(check));
    let secs = t.elapsed().as_secs_f64();
    let (ok, detail) = outcome.unwrap_or_else(|p| {
        let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
        (false, format!("panicked: {}", msg.unwrap_or_default()))
    });
    let in_time = budget_s.is_none_or(|b| secs <= b);
    let budget = budget_s.map_or(String::new(), |b| format!(" of {b} s"));
    let line = format!(
        "[{}] criterion {n}: {name}: {detail} ({secs:.2} s{budget})\n",
        if ok && in_time { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stdout().write_all(line.as_bytes());
    assert!(ok, "criterion {n} failed: {detail}");
    assert!(in_time, "criterion {n} took {secs:.2} s{budget}");
}

#[test]
fn c1_economics_golden() {
    criterion(1, "economics golden figures", Some(1.0), || {
        let survey = default_survey_models();
        let ground = survey.iter().find(|m| m.method == "ground_plots").unwrap();
        let drone = survey.iter().find(|m| m.method == "drone").unwrap();
        let g = survey_cost(100.0, ground).unwrap();
        let d = survey_cost(100.0, drone).unwrap();
        let offset = default_offset_models();
        let forest = offset.iter().find(|m| m.method == "forest").unwrap();
        let dac = offset.iter().find(|m| m.method == "direct_air_capture").unwrap();
        let report = compare_tonnes(&offset, 1.0).unwrap();
        let cheapest: Vec<_> = report.rows.iter().filter(|r| r.cheapest).map(|r| r.method.as_str()).collect();
        let checks = [
            ("ground 300 USD/ha", ground.usd_per_ha == 300.0 && g.usd == 30000.0),
            ("drone 10 USD/ha", drone.usd_per_ha == 10.0 && d.usd == 1000.0),
            ("drone 100 ha in 1 mission of 5 h", d.missions == 1 && d.hours == 5.0 && drone.ha_per_mission == 100.0),
            ("7 trees x 3 USD = 21", offset_cost_per_tonne(7.0, 3.0).unwrap() == 21.0),
            ("forest 18-24", (forest.usd_per_tco2_low, forest.usd_per_tco2_high) == (18.0, 24.0)),
            ("stated band 20-25", forest.stated_band == Some((20.0, 25.0))),
            ("DAC 94-232", (dac.usd_per_tco2_low, dac.usd_per_tco2_high) == (94.0, 232.0)),
            ("forest cheapest", cheapest == ["forest"]),
        ];
        let failed: Vec<_> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
        (failed.is_empty(), if failed.is_empty() { format!("{} figures exact", checks.len()) } else { format!("mismatch: {failed:?}") })
    });
}

#[test]
fn c2_chm_identity() {
    criterion(2, "CHM identity", Some(5.0), || {
        let (w, h) = (1000, 1000);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let header = RasterHeader::new(w, h, canopy_core::raster::SampleType::Float32, GeoTransform::north_up(500000.0, 9000000.0, 0.5));
        let dem: Vec<f32> = (0..w * h).map(|_| rng.random_range(100.0f32..4000.0)).collect();
        let dsm: Vec<f32> = dem.iter().map(|&d| d + rng.random_range(0.0f32..60.0)).collect();
        let (dem_g, dsm_g) = (Grid::from_f32(&header, dem.clone()).unwrap(), Grid::from_f32(&header, dsm.clone()).unwrap());
        let chm = raw_chm(&dsm_g, &dem_g, &ChmParams { smooth_radius: 0, ..ChmParams::default() }).unwrap().to_f32_vec();
        let exact = chm.iter().zip(&dem).zip(&dsm).filter(|((c, d), s)| (**c + **d).to_bits() == s.to_bits()).count();

        // Clamp and cap: below-ground surfaces, blunders above the cap.
        let hdr = RasterHeader::new(4, 1, canopy_core::raster::SampleType::Float32, GeoTransform::north_up(0.0, 0.0, 1.0));
        let dem_s = Grid::from_f32(&hdr, vec![200.0; 4]).unwrap();
        let dsm_s = Grid::from_f32(&hdr, vec![195.0, 230.0, 290.0, 290.5]).unwrap();
        let clamped = raw_chm(&dsm_s, &dem_s, &ChmParams::default()).unwrap().to_f32_vec();
        let unclamped = raw_chm(&dsm_s, &dem_s, &ChmParams { clamp_negative: false, ..ChmParams::default() }).unwrap().to_f32_vec();
        let rules = clamped[0] == 0.0
            && clamped[1] == 30.0
            && clamped[2] == 90.0
            && clamped[3].is_nan()
            && unclamped[0] == -5.0;
        (
            exact == w * h && rules,
            format!("{exact}/{} pixels bit-exact, clamp/cap rules {}", w * h, if rules { "hold" } else { "violated" }),
        )
    });
}

fn random_grid(rng: &mut ChaCha8Rng, w: usize, h: usize, kind: usize) -> Grid {
    let n = w * h;
    let samples = match kind % 3 {
        0 => Samples::UInt8((0..n).map(|_| rng.random()).collect()),
        1 => Samples::UInt16((0..n).map(|_| rng.random()).collect()),
        _ => Samples::Float32((0..n).map(|_| f32::from_bits(rng.random())).collect()),
    };
    let nodata = rng.random_bool(0.5).then(|| rng.random_range(-1e4..1e4));
    let header = RasterHeader::new(w, h, samples.sample_type(), GeoTransform::north_up(rng.random_range(-1e6..1e6), rng.random_range(-1e6..1e7), 0.25))
        .with_nodata(nodata)
        .with_crs(if rng.random_bool(0.5) { "EPSG:32735" } else { "" });
    Grid::new(header, samples).unwrap()
}

fn random_options(rng: &mut ChaCha8Rng) -> WriteOptions {
    WriteOptions {
        layout: if rng.random_bool(0.5) {
            Layout::Strips
        } else {
            Layout::Tiles { width: 16 * rng.random_range(1..=16), height: 16 * rng.random_range(1..=16) }
        },
        compression: if rng.random_bool(0.5) { Compression::Deflate } else { Compression::None },
        predictor: if rng.random_bool(0.5) { Predictor::Horizontal } else { Predictor::None },
    }
}

#[test]
fn c3_raster_round_trip_and_fuzz() {
    criterion(3, "raster round-trip and mutated inputs", Some(60.0), || {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut exact = 0;
        let mut seeds: Vec<Vec<u8>> = Vec::new();
        for i in 0..200 {
            let (w, h) = match i {
                0 => (1, 1),
                1 => (1025, 513),
                _ => (rng.random_range(1..=1025), rng.random_range(1..=513)),
            };
            let g = random_grid(&mut rng, w, h, i);
            let opts = random_options(&mut rng);
            let bytes = write_geotiff_with(&g, &opts).unwrap();
            let back = read_geotiff(&bytes).unwrap();
            if back.samples().to_le_bytes() == g.samples().to_le_bytes() && back.header() == &g.header().clone().with_layout(opts.layout) {
                exact += 1;
            }
            if w * h <= 4096 {
                seeds.push(bytes);
                seeds.push(write_internal(&g));
            }
        }
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures");
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.extension().is_some_and(|x| x == "tif") {
                seeds.push(std::fs::read(p).unwrap());
            }
        }
        let mut panics = 0;
        let mut decoded = 0;
        for k in 0..10_000 {
            let mut b = seeds[k % seeds.len()].clone();
            match rng.random_range(0..4) {
                0 => {
                    for _ in 0..rng.random_range(1..=8) {
                        let at = rng.random_range(0..b.len());
                        b[at] = rng.random();
                    }
                }
                1 => b.truncate(rng.random_range(0..b.len())),
                2 => {
                    let at = rng.random_range(0..b.len());
                    b[at] ^= 1 << rng.random_range(0..8);
                }
                _ => {
                    // Overwrite a 4-byte field with an extreme value.
                    let at = rng.random_range(0..b.len().saturating_sub(4).max(1));
                    let v: u32 = [0, 1, u32::MAX, 0x7fff_ffff][rng.random_range(0..4)];
                    for (j, byte) in v.to_le_bytes().iter().enumerate() {
                        if at + j < b.len() {
                            b[at + j] = *byte;
                        }
                    }
                }
            }
            let r = catch_unwind(|| {
                let a = read_geotiff(&b).is_ok();
                let c = read_geotiff_band(&b, 1).is_ok();
                let d = read_internal(&b).is_ok();
                a as usize + c as usize + d as usize
            });
            match r {
                Ok(n) => decoded += n,
                Err(_) => panics += 1,
            }
        }
        (
            exact == 200 && panics == 0,
            format!("{exact}/200 bit-exact, 10000 mutated inputs: {panics} panics, {decoded} still decoded"),
        )
    });
}

/// Per-tree discretization bound: the drop of the tree's own paraboloid one
/// pixel away from its apex.
fn pixel_equivalent(height: f64, crown_diameter: f64, resolution: f64) -> f64 {
    let r = crown_diameter / 2.0;
    height * 0.5 * resolution * resolution / (r * r)
}

#[test]
fn c4_crown_oracle_and_noisy_detection() {
    criterion(4, "crown oracle and noisy detection", Some(120.0), || {
        let model = AllometricModel::tropical_with_height();
        let p = SynthParams::crown_oracle(1);
        let truth = generate(&p, &model, DEFAULT_CARBON_FRACTION).unwrap();
        let scene = render(&truth, &p);
        let mut params = PipelineParams::default();
        params.chm.smooth_radius = 0;
        let inv = run_pipeline(&scene.dsm, &scene.dem, SpeciesSource::Bands(scene.bands()), &params).unwrap();
        let det = match_trees(&inv.delineation.records, &truth.trees, p.resolution);
        let count_exact = inv.trees.len() == truth.trees.len() && det.true_positives == truth.trees.len();
        let mut worst_ratio = 0.0f64;
        let mut sq = 0.0;
        for &(ri, ti) in &det.pairs {
            let (r, t) = (&inv.delineation.records[ri], &truth.trees[ti]);
            worst_ratio = worst_ratio.max((r.top.height - t.height).abs() / pixel_equivalent(t.height, t.crown_diameter, p.resolution));
            sq += ((r.crown_diameter - t.crown_diameter) / t.crown_diameter).powi(2);
        }
        let cd_rmse = (sq / det.pairs.len().max(1) as f64).sqrt();

        let mut noisy = Vec::new();
        for seed in 1..=5 {
            let p = SynthParams::noisy_overlapping(seed);
            let truth = generate(&p, &model, DEFAULT_CARBON_FRACTION).unwrap();
            let scene = render(&truth, &p);
            let inv = run_pipeline(&scene.dsm, &scene.dem, SpeciesSource::Bands(scene.bands()), &PipelineParams::default()).unwrap();
            let d = match_trees(&inv.delineation.records, &truth.trees, p.resolution);
            noisy.push((d.precision, d.recall));
        }
        let min_p = noisy.iter().map(|x| x.0).fold(1.0, f64::min);
        let min_r = noisy.iter().map(|x| x.1).fold(1.0, f64::min);
        let ok = count_exact && worst_ratio <= 1.0 && cd_rmse <= 0.10 && min_p >= 0.90 && min_r >= 0.90;
        (
            ok,
            format!(
                "oracle {}/{} trees, worst height error {:.3} px-eq, crown RMSE {:.2}%; noisy seeds 1-5 min precision {:.3} min recall {:.3}",
                inv.trees.len(),
                truth.trees.len(),
                worst_ratio,
                cd_rmse * 100.0,
                min_p,
                min_r
            ),
        )
    });
}

/// Brute-force reference flood: expand the highest claimed pixel, earliest
/// claim first on ties, rescanning the whole frontier each step.
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
                let (cc, rr) = (c + dc, r + dr);
                if (dr, dc) == (0, 0) || cc < 0 || rr < 0 || cc >= w as i64 || rr >= h as i64 {
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
fn c5_watershed_equivalence() {
    criterion(5, "watershed equals brute-force flood", Some(30.0), || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = CrownParams::default();
        let mut agree = 0;
        let mut crowns = 0;
        for _ in 0..100 {
            let (w, h) = (rng.random_range(8..=64), rng.random_range(8..=64));
            let trees: Vec<(f32, f32, f32, f32)> = (0..rng.random_range(0..12))
                .map(|_| (rng.random_range(0.0..w as f32), rng.random_range(0.0..h as f32), rng.random_range(4.0..30.0), rng.random_range(2.0..10.0)))
                .collect();
            let v: Vec<f32> = (0..w * h)
                .map(|i| {
                    let (x, y) = ((i % w) as f32, (i / w) as f32);
                    let surface = trees
                        .iter()
                        .map(|&(cx, cy, top, r)| {
                            let d2 = ((x - cx).powi(2) + (y - cy).powi(2)) / (r * r);
                            if d2 <= 1.0 { top * (1.0 - 0.5 * d2) } else { 0.0 }
                        })
                        .fold(0.0, f32::max);
                    // Quantized noise creates plateaus and ties.
                    surface + rng.random_range(0..4) as f32 * 0.25
                })
                .collect();
            let header = RasterHeader::new(w, h, canopy_core::raster::SampleType::Float32, GeoTransform::north_up(0.0, 0.0, 0.5));
            let g = Grid::from_f32(&header, v.clone()).unwrap();
            let species = Grid::from_u8(&header, vec![0; w * h], None).unwrap();
            let tops = detect_treetops(&g, &p).unwrap();
            let d = watershed_crowns(&g, &tops, &species, &p).unwrap();
            crowns += tops.len();
            if d.labels == oracle_flood(&v, w, h, &tops, &p) {
                agree += 1;
            }
        }
        (agree == 100, format!("{agree}/100 scenes pixel-exact ({crowns} crowns)"))
    });
}

#[test]
fn c6_kriging_properties() {
    criterion(6, "kriging properties", Some(10.0), || {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (mut worst_sum, mut worst_exact) = (0.0f64, 0.0f64);
        for _ in 0..50 {
            let n = rng.random_range(3..40);
            let plots: Vec<GroundPlot> = (0..n)
                .map(|_| GroundPlot {
                    x: rng.random_range(0.0..2000.0),
                    y: rng.random_range(0.0..2000.0),
                    radius: 12.0,
                    biomass_density: rng.random_range(0.0..300.0),
                })
                .collect();
            let sill = rng.random_range(1.0..1e4);
            let range_m = rng.random_range(20.0..3000.0);
            let with_nugget = VariogramModel { nugget: rng.random_range(0.0..0.9) * sill, sill, range_m };
            let ok = OrdinaryKriging::new(&plots, with_nugget).unwrap();
            for _ in 0..100 {
                let k = ok.predict(rng.random_range(-500.0..2500.0), rng.random_range(-500.0..2500.0));
                worst_sum = worst_sum.max((k.weights.iter().sum::<f64>() - 1.0).abs());
            }
            let exact = OrdinaryKriging::new(&plots, VariogramModel { nugget: 0.0, sill, range_m }).unwrap();
            for pl in &plots {
                worst_exact = worst_exact.max((exact.predict(pl.x, pl.y).mean - pl.biomass_density).abs() / sill);
            }
        }
        // Frozen from tests/oracle/kriging_oracle.py in canopy-core.
        const WEIGHTS: [f64; 3] = [0.40044974441142934004, 0.27988645228345702359, 0.31966380330511363637];
        const MEAN: f64 = 116.4005010417615764;
        const VARIANCE: f64 = 92.553800234955176226;
        let plot = |x, y, v| GroundPlot { x, y, radius: 12.0, biomass_density: v };
        let three = [plot(0.0, 0.0, 110.0), plot(100.0, 0.0, 150.0), plot(30.0, 80.0, 95.0)];
        let k = OrdinaryKriging::new(&three, VariogramModel { nugget: 0.0, sill: 250.0, range_m: 120.0 }).unwrap().predict(40.0, 25.0);
        let hand = k.weights.iter().zip(WEIGHTS).map(|(a, b)| (a - b).abs()).fold((k.mean - MEAN).abs().max((k.variance - VARIANCE).abs()), f64::max);
        (
            worst_sum <= 1e-9 && worst_exact <= 1e-6 && hand <= 1e-9,
            format!("max |sum w - 1| {worst_sum:.2e}, max plot error {worst_exact:.2e} x sill, 3-plot deviation {hand:.2e}"),
        )
    });
}

#[test]
fn c7_census_beats_sparse_plots() {
    criterion(7, "census vs 300 m plot kriging, 20 seeds", Some(600.0), || {
        let (mut census, mut kriging, mut ens) = (0.0, 0.0, 0.0);
        let mut census_wins = 0;
        for seed in 1..=20 {
            let settings = BenchmarkSettings::reference(seed);
            assert_eq!(settings.plots.spacing_m, 300.0);
            let o = run_scene(&settings).unwrap();
            census += o.census.abs_error / 20.0;
            kriging += o.kriging.abs_error / 20.0;
            ens += o.ensemble.abs_error / 20.0;
            census_wins += (o.census.abs_error < o.kriging.abs_error) as usize;
        }
        (
            census < kriging && ens <= census.min(kriging),
            format!(
                "mean abs error Mg/ha: census {census:.4}, kriging {kriging:.4}, ensemble {ens:.4}; census better on {census_wins}/20 seeds"
            ),
        )
    });
}

fn canopy(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_canopy")).args(args).output().expect("binary runs")
}

/// Every file in `dir`, with `manifest.json` stripped of its `run` block.
fn artifacts(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        let name = p.file_name().unwrap().to_string_lossy().to_string();
        let mut bytes = std::fs::read(&p).unwrap();
        if name == "manifest.json" {
            let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
            v.as_object_mut().unwrap().remove("run");
            bytes = serde_json::to_vec(&v).unwrap();
        }
        out.insert(name, bytes);
    }
    out
}

#[test]
fn c8_determinism() {
    criterion(8, "determinism across runs and thread counts", None, || {
        let tmp = tempfile::tempdir().unwrap();
        let t = tmp.path();
        let scene = t.join("scene");
        assert!(canopy(&["synth", "--seed", "8", "--out", scene.to_str().unwrap()]).status.success());
        let ini = scene.join("inventory.ini");
        let mut report = Vec::new();
        let mut ok = true;
        for (cmd, extra) in [("inventory", vec!["--config", ini.to_str().unwrap()]), ("benchmark", vec!["--seed", "8"])] {
            let mut runs = Vec::new();
            for (i, threads) in [None, None, Some("1"), Some("8")].iter().enumerate() {
                let out = t.join(format!("{cmd}{i}"));
                let mut args = Vec::new();
                if let Some(n) = threads {
                    args.extend(["--threads", n]);
                }
                args.push(cmd);
                args.extend(extra.iter().copied());
                args.extend(["--out", out.to_str().unwrap()]);
                let o = canopy(&args);
                assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
                runs.push(artifacts(&out));
            }
            let same = runs.iter().all(|r| r == &runs[0]);
            ok &= same;
            report.push(format!("{cmd} {} artifacts {}", runs[0].len(), if same { "identical x4" } else { "DIFFER" }));
        }
        (ok, format!("{} (runs: default, default, --threads 1, --threads 8)", report.join("; ")))
    });
}

#[test]
fn c9_allometry_oracle() {
    criterion(9, "allometry oracle and monotonicity", Some(5.0), || {
        let table = include_str!("../../core/tests/oracle/allometry_table.csv");
        let mut sp = default_species().remove(0);
        let (wh, nh) = (AllometricModel::tropical_with_height(), AllometricModel::tropical_no_height());
        let mut rdr = csv::Reader::from_reader(table.as_bytes());
        let (mut rows, mut worst) = (0, 0.0f64);
        for rec in rdr.records() {
            let rec = rec.unwrap();
            let f = |i: usize| rec[i].parse::<f64>().unwrap_or(f64::NAN);
            let got = match &rec[0] {
                "with_height" => agb(f(1), f(2), f(3), &wh).unwrap(),
                "no_height" => agb(f(1), 17.0, f(3), &nh).unwrap(),
                "bridge" => dbh_from_crown(f(4), &sp).unwrap(),
                "chain" => {
                    sp.wood_density = f(3);
                    tree_biomass(1, f(4), f(2), &sp, &wh, DEFAULT_CARBON_FRACTION).unwrap().agb_kg
                }
                k => panic!("unknown row kind {k}"),
            };
            worst = worst.max(((got - f(5)) / f(5)).abs());
            rows += 1;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut violations = 0;
        for _ in 0..10_000 {
            let (d, h, rho) = (rng.random_range(0.0..200.0), rng.random_range(1.0..70.0), rng.random_range(0.15..1.1));
            let (dd, dh) = (rng.random_range(1e-3..50.0), rng.random_range(1e-3..20.0));
            for m in [&wh, &nh] {
                violations += (agb(d + dd, h, rho, m).unwrap() <= agb(d, h, rho, m).unwrap()) as usize;
            }
            if d > 0.0 {
                violations += (agb(d, h + dh, rho, &wh).unwrap() <= agb(d, h, rho, &wh).unwrap()) as usize;
            }
        }
        (
            rows >= 20 && worst <= 1e-9 && violations == 0,
            format!("{rows} table rows, worst relative error {worst:.2e}; 10000 random points, {violations} monotonicity violations"),
        )
    });
}
