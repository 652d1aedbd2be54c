//! `canopy costs`: survey and offset cost report for an area and a tonnage.

use std::path::Path;
use std::time::Instant;

use canopy_core::economics::{compare_tonnes, render_table};
use serde_json::json;

use super::{finish, survey_rows};
use crate::config::{Config, ConfigError};
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::output::{json_text, OutputDir};
use crate::params::{cost_models, Inputs};

const KEYS: &[&str] = &["inputs.cost_models", "inputs.stand", "costs.area_ha", "costs.tco2e"];

/// Area and tonnage from `costs.*`, falling back to a `stand_carbon.json`.
fn quantities(cfg: &Config, inputs: &mut Inputs) -> Result<(f64, f64), CliError> {
    let stand = match inputs.read_optional(cfg, "inputs.stand")? {
        None => None,
        Some(b) => {
            let v: serde_json::Value = serde_json::from_slice(&b).map_err(|e| CliError::input("inputs.stand", format!("inputs.stand: {e}")))?;
            let num = |p: &str| {
                v.pointer(p).and_then(|x| x.as_f64()).ok_or_else(|| CliError::input("inputs.stand", format!("inputs.stand: no number at {p}")))
            };
            Some((num("/area_ha")?, num("/stand/co2e_total_t")?))
        }
    };
    let area = cfg.parse_or("costs.area_ha", stand.map_or(100.0, |s| s.0))?;
    let tco2e = cfg.parse_or("costs.tco2e", stand.map_or(1.0, |s| s.1))?;
    for (k, v) in [("costs.area_ha", area), ("costs.tco2e", tco2e)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(ConfigError::field(k, format!("{v} must be a non-negative number")).into());
        }
    }
    Ok((area, tco2e))
}

/// Returns the manifest and the plain-text table.
pub fn run_costs(cfg: &Config, out: &Path) -> Result<(RunManifest, String), CliError> {
    let started = Instant::now();
    cfg.check_known(KEYS)?;
    let manifest = RunManifest::new("costs", cfg);
    let mut inputs = Inputs::default();
    let models = cost_models(cfg, &mut inputs, "inputs.cost_models")?;
    let (area, tco2e) = quantities(cfg, &mut inputs)?;
    let survey = survey_rows(&models.survey, area)?;
    let offset = compare_tonnes(&models.offset, tco2e).map_err(|e| CliError::stage("economics", e.to_string()))?;
    let mut table = String::from("Survey cost\n");
    for r in &survey {
        table.push_str(&format!(
            "{:<22} {:>12} USD {:>4} missions {:>8} h\n",
            r.method,
            canopy_core::numeric::fmt6(r.cost.usd),
            r.cost.missions,
            canopy_core::numeric::fmt6(r.cost.hours)
        ));
    }
    table.push('\n');
    table.push_str(&render_table(&offset));
    for m in &models.offset {
        if let Some((lo, hi)) = m.stated_band {
            table.push_str(&format!("{}: stated band {}-{} USD/tCO2\n", m.method, lo, hi));
        }
    }
    let report = json!({
        "area_ha": area,
        "survey": survey,
        "offset": offset,
        "offset_models": models.offset,
    });
    let mut dir = OutputDir::create(out)?;
    dir.write("costs.json", json_text(&report).as_bytes())?;
    dir.write("costs.txt", table.as_bytes())?;
    Ok((finish(manifest, inputs, dir, started)?, table))
}
