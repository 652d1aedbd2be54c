//! Text artifacts: JSON at 6 significant digits, the tree table, crown
//! polygons as GeoJSON, and an output directory that checksums what it writes.

use std::path::{Path, PathBuf};

use canopy_core::allometry::TreeBiomass;
use canopy_core::crowns::{crown_rings, CrownRecord, Delineation};
use canopy_core::numeric::{fmt6, round_sig};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Round every float in `v` to 6 significant digits, in place.
pub fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64 number"), 6);
            // -0 would print as "-0.0".
            *v = json!(if x == 0.0 { 0.0 } else { x });
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Pretty JSON with rounded floats and a trailing newline.
pub fn json_text<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("artifact serializes");
    round_floats(&mut v);
    serde_json::to_string_pretty(&v).expect("value serializes") + "\n"
}

/// Map coordinates keep millimetres regardless of magnitude.
fn coord(x: f64) -> f64 {
    let r = (x * 1000.0).round() / 1000.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub const TREES_CSV_HEADER: &str =
    "tree_id,x,y,height_m,crown_diameter_m,crown_area_m2,species_id,dbh_cm,agb_kg,carbon_kg,co2e_kg";

/// One row per crown; `trees` is parallel to `records`.
pub fn trees_csv(records: &[CrownRecord], trees: &[TreeBiomass]) -> String {
    let mut out = String::from(TREES_CSV_HEADER);
    out.push('\n');
    for (r, t) in records.iter().zip(trees) {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.tree_id,
            coord(r.top.x),
            coord(r.top.y),
            fmt6(r.top.height),
            fmt6(r.crown_diameter),
            fmt6(r.crown_area),
            r.species_id,
            fmt6(t.dbh_cm),
            fmt6(t.agb_kg),
            fmt6(t.carbon_kg),
            fmt6(t.co2e_kg)
        ));
    }
    out
}

/// RFC 7946 FeatureCollection of crown polygons. Exterior rings run
/// counter-clockwise and holes clockwise. Coordinates stay in the raster's
/// projected CRS, so no `crs` member is written.
pub fn crowns_geojson(d: &Delineation, trees: &[TreeBiomass]) -> String {
    let rings = crown_rings(d);
    let features: Vec<Value> = d
        .records
        .iter()
        .zip(trees)
        .zip(&rings)
        .map(|((r, t), rs)| {
            let polygon: Vec<Vec<[f64; 2]>> =
                rs.iter().map(|ring| ring.iter().map(|&(x, y)| [coord(x), coord(y)]).collect()).collect();
            let mut props = json!({
                "tree_id": r.tree_id,
                "species_id": r.species_id,
                "height_m": r.top.height,
                "crown_diameter_m": r.crown_diameter,
                "crown_area_m2": r.crown_area,
                "dbh_cm": t.dbh_cm,
                "agb_kg": t.agb_kg,
                "carbon_kg": t.carbon_kg,
                "co2e_kg": t.co2e_kg,
            });
            round_floats(&mut props);
            json!({
                "type": "Feature",
                "id": r.tree_id,
                "geometry": { "type": "Polygon", "coordinates": polygon },
                "properties": props,
            })
        })
        .collect();
    let fc = json!({ "type": "FeatureCollection", "features": features });
    serde_json::to_string(&fc).expect("geojson serializes") + "\n"
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Output directory that records the SHA-256 of every file written.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<OutputDir, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::config("output", format!("cannot create {}: {e}", dir.display())))?;
        Ok(OutputDir { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::stage("output", format!("cannot write {}: {e}", path.display())))?;
        self.files.push((name.to_string(), sha256_hex(bytes)));
        Ok(())
    }

    /// `(file name, sha256)` in write order.
    pub fn files(&self) -> &[(String, String)] {
        &self.files
    }
}
