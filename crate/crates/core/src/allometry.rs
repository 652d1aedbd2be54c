//! Tree geometry to biomass and carbon.
//!
//! Units: crown diameter m, DBH cm, height m, wood density g/cm³, biomass kg
//! per tree and Mg/ha per stand.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::numeric::neumaier_sum;
use crate::species::SpeciesParams;

pub const DEFAULT_CARBON_FRACTION: f64 = 0.47;
/// Mass of CO2 per unit mass of carbon.
pub const CO2_PER_C: f64 = 44.0 / 12.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AllometryError {
    #[error("negative or non-finite input: {0}")]
    NegativeInput(String),
    #[error("invalid model {model}: {reason}")]
    InvalidModel { model: String, reason: String },
    #[error("model registry line {line}: {reason}")]
    Registry { line: u64, reason: String },
    #[error("unknown allometric model {0:?}")]
    UnknownModel(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum AllometricModel {
    /// `a · (ρ·D²·H)^b`.
    TropicalWithHeight { a: f64, b: f64 },
    /// `exp(intercept + e_coef·E + rho_exp·ln ρ + ln_d·ln D + ln_d2·(ln D)²)`,
    /// with E the environmental stress index.
    TropicalNoHeight { intercept: f64, e_coef: f64, e: f64, rho_exp: f64, ln_d: f64, ln_d2: f64 },
    /// `c · D^dbh_exp · H^height_exp · ρ^rho_exp`.
    Custom { c: f64, dbh_exp: f64, height_exp: f64, rho_exp: f64 },
}

impl AllometricModel {
    pub fn tropical_with_height() -> Self {
        AllometricModel::TropicalWithHeight { a: 0.0673, b: 0.976 }
    }

    pub fn tropical_no_height() -> Self {
        AllometricModel::TropicalNoHeight {
            intercept: -1.803,
            e_coef: -0.976,
            e: 0.0,
            rho_exp: 0.976,
            ln_d: 2.673,
            ln_d2: -0.0299,
        }
    }

    pub fn uses_height(&self) -> bool {
        match self {
            AllometricModel::TropicalWithHeight { .. } => true,
            AllometricModel::TropicalNoHeight { .. } => false,
            AllometricModel::Custom { height_exp, .. } => *height_exp != 0.0,
        }
    }

    /// Reject coefficients that would break AGB(0) = 0 or monotonicity.
    pub fn validate(&self, name: &str) -> Result<(), AllometryError> {
        let bad = |reason: &str| Err(AllometryError::InvalidModel { model: name.into(), reason: reason.into() });
        match *self {
            AllometricModel::TropicalWithHeight { a, b } => {
                if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite()) {
                    return bad("a and b must be positive");
                }
            }
            AllometricModel::TropicalNoHeight { intercept, e_coef, e, rho_exp, ln_d, ln_d2 } => {
                if ![intercept, e_coef, e, rho_exp, ln_d, ln_d2].iter().all(|v| v.is_finite()) {
                    return bad("coefficients must be finite");
                }
                if rho_exp <= 0.0 || ln_d <= 0.0 || ln_d2 > 0.0 {
                    return bad("need rho_exp > 0, ln_d > 0 and ln_d2 <= 0");
                }
            }
            AllometricModel::Custom { c, dbh_exp, height_exp, rho_exp } => {
                if !(c > 0.0 && c.is_finite()) || !(dbh_exp > 0.0 && dbh_exp.is_finite()) {
                    return bad("c and dbh_exp must be positive");
                }
                if !(height_exp >= 0.0 && height_exp.is_finite() && rho_exp >= 0.0 && rho_exp.is_finite()) {
                    return bad("height_exp and rho_exp must be non-negative");
                }
            }
        }
        Ok(())
    }

    /// Upper DBH (cm) of the range where the model is increasing.
    pub fn dbh_limit(&self) -> f64 {
        match *self {
            AllometricModel::TropicalNoHeight { ln_d, ln_d2, .. } if ln_d2 < 0.0 => (ln_d / (-2.0 * ln_d2)).exp(),
            _ => f64::INFINITY,
        }
    }
}

fn check(name: &str, v: f64) -> Result<(), AllometryError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(AllometryError::NegativeInput(format!("{name} = {v}")))
    }
}

/// Above-ground biomass in kg.
pub fn agb(dbh: f64, height: f64, rho: f64, model: &AllometricModel) -> Result<f64, AllometryError> {
    check("dbh", dbh)?;
    check("height", height)?;
    check("wood density", rho)?;
    if dbh == 0.0 {
        return Ok(0.0);
    }
    Ok(match *model {
        AllometricModel::TropicalWithHeight { a, b } => a * (rho * dbh * dbh * height).powf(b),
        AllometricModel::TropicalNoHeight { intercept, e_coef, e, rho_exp, ln_d, ln_d2 } => {
            if rho == 0.0 {
                return Ok(0.0);
            }
            let ld = dbh.ln();
            (intercept + e_coef * e + rho_exp * rho.ln() + ln_d * ld + ln_d2 * ld * ld).exp()
        }
        AllometricModel::Custom { c, dbh_exp, height_exp, rho_exp } => {
            c * dbh.powf(dbh_exp) * height.powf(height_exp) * rho.powf(rho_exp)
        }
    })
}

/// DBH (cm) from crown diameter (m) through the species power law.
pub fn dbh_from_crown(crown_diameter: f64, species: &SpeciesParams) -> Result<f64, AllometryError> {
    check("crown diameter", crown_diameter)?;
    Ok(species.crown_dbh_a * crown_diameter.powf(species.crown_dbh_b))
}

/// Crown diameter (m) whose bridged DBH is `dbh`.
pub fn crown_from_dbh(dbh: f64, species: &SpeciesParams) -> f64 {
    (dbh / species.crown_dbh_a).powf(1.0 / species.crown_dbh_b)
}

/// `(carbon, co2e)` in the unit of `agb`. `co2e` is defined as
/// `carbon * CO2_PER_C`.
pub fn carbon_and_co2e(agb: f64, carbon_fraction: f64) -> Result<(f64, f64), AllometryError> {
    check("agb", agb)?;
    if !(carbon_fraction > 0.0 && carbon_fraction <= 1.0) {
        return Err(AllometryError::NegativeInput(format!("carbon fraction {carbon_fraction} outside (0, 1]")));
    }
    let carbon = carbon_fraction * agb;
    Ok((carbon, carbon * CO2_PER_C))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeBiomass {
    pub tree_id: u32,
    pub dbh_cm: f64,
    pub agb_kg: f64,
    pub carbon_kg: f64,
    pub co2e_kg: f64,
}

pub fn tree_biomass(
    tree_id: u32,
    crown_diameter: f64,
    height: f64,
    species: &SpeciesParams,
    model: &AllometricModel,
    carbon_fraction: f64,
) -> Result<TreeBiomass, AllometryError> {
    let dbh_cm = dbh_from_crown(crown_diameter, species)?;
    let agb_kg = agb(dbh_cm, height, species.wood_density, model)?;
    let (carbon_kg, co2e_kg) = carbon_and_co2e(agb_kg, carbon_fraction)?;
    Ok(TreeBiomass { tree_id, dbh_cm, agb_kg, carbon_kg, co2e_kg })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StandCarbon {
    pub tree_count: usize,
    pub area_ha: f64,
    pub agb_total_mg: f64,
    pub carbon_total_mg: f64,
    pub co2e_total_t: f64,
    pub agb_mg_per_ha: f64,
    pub carbon_mg_per_ha: f64,
    pub co2e_t_per_ha: f64,
}

/// Stand totals with compensated summation. Densities are zero for a
/// non-positive area.
pub fn stand_totals(trees: &[TreeBiomass], area_ha: f64) -> StandCarbon {
    let agb = neumaier_sum(trees.iter().map(|t| t.agb_kg)) / 1000.0;
    let carbon = neumaier_sum(trees.iter().map(|t| t.carbon_kg)) / 1000.0;
    let co2e = neumaier_sum(trees.iter().map(|t| t.co2e_kg)) / 1000.0;
    let per_ha = |v: f64| if area_ha > 0.0 { v / area_ha } else { 0.0 };
    StandCarbon {
        tree_count: trees.len(),
        area_ha,
        agb_total_mg: agb,
        carbon_total_mg: carbon,
        co2e_total_t: co2e,
        agb_mg_per_ha: per_ha(agb),
        carbon_mg_per_ha: per_ha(carbon),
        co2e_t_per_ha: per_ha(co2e),
    }
}

/// Built-in registry, in the same `model_id,param,value` form as user files.
pub const DEFAULT_REGISTRY_CSV: &str = "model_id,param,value
tropical_with_height,a,0.0673
tropical_with_height,b,0.976
tropical_no_height,intercept,-1.803
tropical_no_height,e_coef,-0.976
tropical_no_height,e,0
tropical_no_height,rho_exp,0.976
tropical_no_height,ln_d,2.673
tropical_no_height,ln_d2,-0.0299
";

/// Named allometric models. `tropical_with_height` and `tropical_no_height`
/// ids select the built-in forms; any other id is a custom power law with
/// parameters `c`, `dbh_exp`, `height_exp` (default 0) and `rho_exp`
/// (default 0).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRegistry {
    models: BTreeMap<String, AllometricModel>,
}

impl Default for ModelRegistry {
    fn default() -> Self {
        ModelRegistry::parse_csv(DEFAULT_REGISTRY_CSV).expect("built-in registry is valid")
    }
}

impl ModelRegistry {
    pub fn get(&self, id: &str) -> Result<&AllometricModel, AllometryError> {
        self.models.get(id).ok_or_else(|| AllometryError::UnknownModel(id.into()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }

    /// Add or replace models from another registry.
    pub fn merge(&mut self, other: ModelRegistry) {
        self.models.extend(other.models);
    }

    pub fn parse_csv(text: &str) -> Result<ModelRegistry, AllometryError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut params: BTreeMap<String, BTreeMap<String, (f64, u64)>> = BTreeMap::new();
        let headers = rdr.headers().map_err(|e| AllometryError::Registry { line: 1, reason: e.to_string() })?.clone();
        if headers.iter().collect::<Vec<_>>() != ["model_id", "param", "value"] {
            return Err(AllometryError::Registry { line: 1, reason: "header must be model_id,param,value".into() });
        }
        for rec in rdr.records() {
            let rec = rec.map_err(|e| AllometryError::Registry {
                line: e.position().map_or(0, |p| p.line()),
                reason: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            let value: f64 = rec[2]
                .parse()
                .map_err(|_| AllometryError::Registry { line, reason: format!("value {:?} is not a number", &rec[2]) })?;
            if rec[0].is_empty() || rec[1].is_empty() {
                return Err(AllometryError::Registry { line, reason: "empty model_id or param".into() });
            }
            let entry = params.entry(rec[0].to_string()).or_default();
            if entry.insert(rec[1].to_string(), (value, line)).is_some() {
                return Err(AllometryError::Registry { line, reason: format!("duplicate parameter {}", &rec[1]) });
            }
        }
        let mut models = BTreeMap::new();
        for (id, p) in params {
            let model = build_model(&id, &p)?;
            model.validate(&id)?;
            models.insert(id, model);
        }
        Ok(ModelRegistry { models })
    }
}

fn build_model(id: &str, p: &BTreeMap<String, (f64, u64)>) -> Result<AllometricModel, AllometryError> {
    let allowed: &[&str] = match id {
        "tropical_with_height" => &["a", "b"],
        "tropical_no_height" => &["intercept", "e_coef", "e", "rho_exp", "ln_d", "ln_d2"],
        _ => &["c", "dbh_exp", "height_exp", "rho_exp"],
    };
    if let Some((name, (_, line))) = p.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        return Err(AllometryError::Registry { line: *line, reason: format!("model {id} has no parameter {name}") });
    }
    let need = |k: &str| {
        p.get(k).map(|v| v.0).ok_or_else(|| AllometryError::InvalidModel {
            model: id.into(),
            reason: format!("missing parameter {k}"),
        })
    };
    let opt = |k: &str, d: f64| p.get(k).map_or(d, |v| v.0);
    Ok(match id {
        "tropical_with_height" => AllometricModel::TropicalWithHeight { a: need("a")?, b: need("b")? },
        "tropical_no_height" => AllometricModel::TropicalNoHeight {
            intercept: need("intercept")?,
            e_coef: need("e_coef")?,
            e: opt("e", 0.0),
            rho_exp: need("rho_exp")?,
            ln_d: need("ln_d")?,
            ln_d2: need("ln_d2")?,
        },
        _ => AllometricModel::Custom {
            c: need("c")?,
            dbh_exp: need("dbh_exp")?,
            height_exp: opt("height_exp", 0.0),
            rho_exp: opt("rho_exp", 0.0),
        },
    })
}
