//! Survey cost per hectare and carbon-offset cost per tonne across methods.

use serde::Serialize;

use crate::allometry::StandCarbon;
use crate::numeric::fmt6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EconomicsError {
    #[error("{0} must be positive")]
    NonPositive(String),
    #[error("cost models line {line}: {reason}")]
    Parse { line: u64, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurveyCostModel {
    pub method: String,
    pub usd_per_ha: f64,
    pub ha_per_mission: f64,
    pub hours_per_mission: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurveyCost {
    pub usd: f64,
    /// Whole missions needed to cover the area.
    pub missions: u64,
    pub hours: f64,
}

fn positive(name: &str, v: f64) -> Result<(), EconomicsError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(EconomicsError::NonPositive(format!("{name} ({v})")))
    }
}

impl SurveyCostModel {
    pub fn validate(&self) -> Result<(), EconomicsError> {
        positive("usd_per_ha", self.usd_per_ha)?;
        positive("ha_per_mission", self.ha_per_mission)?;
        positive("hours_per_mission", self.hours_per_mission)
    }
}

pub fn survey_cost(area_ha: f64, model: &SurveyCostModel) -> Result<SurveyCost, EconomicsError> {
    model.validate()?;
    if !(area_ha >= 0.0 && area_ha.is_finite()) {
        return Err(EconomicsError::NonPositive(format!("area ({area_ha})")));
    }
    let missions = (area_ha / model.ha_per_mission).ceil() as u64;
    Ok(SurveyCost { usd: area_ha * model.usd_per_ha, missions, hours: missions as f64 * model.hours_per_mission })
}

/// Cost to offset one tonne of CO2 by planting.
pub fn offset_cost_per_tonne(trees_per_tonne: f64, usd_per_tree: f64) -> Result<f64, EconomicsError> {
    positive("trees_per_tonne", trees_per_tonne)?;
    positive("usd_per_tree", usd_per_tree)?;
    Ok(trees_per_tonne * usd_per_tree)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffsetCostModel {
    pub method: String,
    pub usd_per_tco2_low: f64,
    pub usd_per_tco2_high: f64,
    /// A published band that the itemised arithmetic does not reproduce,
    /// kept for display next to the computed one.
    pub stated_band: Option<(f64, f64)>,
    /// Display-only cost shares, e.g. `("labour", 0.45)`.
    pub breakdown: Vec<(String, f64)>,
    pub basis: String,
}

impl OffsetCostModel {
    pub fn validate(&self) -> Result<(), EconomicsError> {
        positive("usd_per_tco2_low", self.usd_per_tco2_low)?;
        positive("usd_per_tco2_high", self.usd_per_tco2_high)?;
        if self.usd_per_tco2_low > self.usd_per_tco2_high {
            return Err(EconomicsError::NonPositive(format!("offset band width for {}", self.method)));
        }
        Ok(())
    }

    pub fn midpoint(&self) -> f64 {
        (self.usd_per_tco2_low + self.usd_per_tco2_high) / 2.0
    }
}

pub fn default_survey_models() -> Vec<SurveyCostModel> {
    vec![
        SurveyCostModel { method: "ground_plots".into(), usd_per_ha: 300.0, ha_per_mission: 20.0, hours_per_mission: 36.0 },
        SurveyCostModel { method: "drone".into(), usd_per_ha: 10.0, ha_per_mission: 100.0, hours_per_mission: 5.0 },
    ]
}

pub fn default_offset_models() -> Vec<OffsetCostModel> {
    vec![
        OffsetCostModel {
            method: "forest".into(),
            usd_per_tco2_low: offset_cost_per_tonne(6.0, 3.0).expect("positive"),
            usd_per_tco2_high: offset_cost_per_tonne(8.0, 3.0).expect("positive"),
            stated_band: Some((20.0, 25.0)),
            breakdown: vec![("seedling".into(), 0.30), ("labour".into(), 0.45), ("monitoring".into(), 0.25)],
            basis: "6-8 trees per tCO2 at 3 USD per tree".into(),
        },
        OffsetCostModel {
            method: "direct_air_capture".into(),
            usd_per_tco2_low: 94.0,
            usd_per_tco2_high: 232.0,
            stated_band: None,
            breakdown: Vec::new(),
            basis: "published plant cost range".into(),
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub method: String,
    pub usd_per_tco2_low: f64,
    pub usd_per_tco2_high: f64,
    pub usd_low: f64,
    pub usd_high: f64,
    pub cheapest: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub tco2e: f64,
    pub rows: Vec<ComparisonRow>,
}

/// USD to offset the stand's CO2e under each method. The method with the
/// lowest band midpoint is flagged; ties go to the first listed.
pub fn compare(models: &[OffsetCostModel], stand: &StandCarbon) -> Result<ComparisonReport, EconomicsError> {
    compare_tonnes(models, stand.co2e_total_t)
}

pub fn compare_tonnes(models: &[OffsetCostModel], tco2e: f64) -> Result<ComparisonReport, EconomicsError> {
    for m in models {
        m.validate()?;
    }
    let cheapest = models.iter().enumerate().min_by(|a, b| a.1.midpoint().total_cmp(&b.1.midpoint()).then(a.0.cmp(&b.0))).map(|m| m.0);
    let rows = models
        .iter()
        .enumerate()
        .map(|(i, m)| ComparisonRow {
            method: m.method.clone(),
            usd_per_tco2_low: m.usd_per_tco2_low,
            usd_per_tco2_high: m.usd_per_tco2_high,
            usd_low: tco2e * m.usd_per_tco2_low,
            usd_high: tco2e * m.usd_per_tco2_high,
            cheapest: Some(i) == cheapest,
        })
        .collect();
    Ok(ComparisonReport { tco2e, rows })
}

/// Plain-text table of a comparison.
pub fn render_table(report: &ComparisonReport) -> String {
    let mut out = format!("Offsetting {} tCO2e\n", fmt6(report.tco2e));
    out.push_str(&format!("{:<22} {:>16} {:>24}  \n", "method", "USD/tCO2", "total USD"));
    for r in &report.rows {
        let band = format!("{}-{}", fmt6(r.usd_per_tco2_low), fmt6(r.usd_per_tco2_high));
        let total = format!("{}-{}", fmt6(r.usd_low), fmt6(r.usd_high));
        out.push_str(&format!("{:<22} {:>16} {:>24}  {}\n", r.method, band, total, if r.cheapest { "cheapest" } else { "" }));
    }
    out.lines().map(str::trim_end).collect::<Vec<_>>().join("\n") + "\n"
}

pub const COST_MODELS_HEADER: &str =
    "kind,method,usd_per_ha,ha_per_mission,hours_per_mission,trees_per_tco2_low,trees_per_tco2_high,usd_per_tree,usd_per_tco2_low,usd_per_tco2_high,stated_low,stated_high,breakdown,basis";

/// Built-in models in cost-file form.
pub const DEFAULT_COST_MODELS_CSV: &str = "kind,method,usd_per_ha,ha_per_mission,hours_per_mission,trees_per_tco2_low,trees_per_tco2_high,usd_per_tree,usd_per_tco2_low,usd_per_tco2_high,stated_low,stated_high,breakdown,basis
survey,ground_plots,300,20,36,,,,,,,,,
survey,drone,10,100,5,,,,,,,,,
offset,forest,,,,6,8,3,,,20,25,seedling:0.30;labour:0.45;monitoring:0.25,6-8 trees per tCO2 at 3 USD per tree
offset,direct_air_capture,,,,,,,94,232,,,,published plant cost range
";

#[derive(Debug, Clone, PartialEq)]
pub struct CostModels {
    pub survey: Vec<SurveyCostModel>,
    pub offset: Vec<OffsetCostModel>,
}

impl Default for CostModels {
    fn default() -> Self {
        CostModels { survey: default_survey_models(), offset: default_offset_models() }
    }
}

/// Parse a cost-models file. Offset rows give either a per-tonne band
/// directly or trees per tonne with a per-tree price.
pub fn parse_cost_models(text: &str) -> Result<CostModels, EconomicsError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(false).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| EconomicsError::Parse { line: 1, reason: e.to_string() })?;
    if headers.iter().collect::<Vec<_>>().join(",") != COST_MODELS_HEADER {
        return Err(EconomicsError::Parse { line: 1, reason: format!("header must be {COST_MODELS_HEADER}") });
    }
    let mut models = CostModels { survey: Vec::new(), offset: Vec::new() };
    for rec in rdr.records() {
        let rec = rec.map_err(|e| EconomicsError::Parse { line: e.position().map_or(0, |p| p.line()), reason: e.to_string() })?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |reason: String| EconomicsError::Parse { line, reason };
        let num = |i: usize| -> Result<Option<f64>, EconomicsError> {
            if rec[i].is_empty() {
                return Ok(None);
            }
            rec[i].parse::<f64>().map(Some).map_err(|_| err(format!("column {} is not a number: {:?}", i + 1, &rec[i])))
        };
        let need = |i: usize| num(i)?.ok_or_else(|| err(format!("column {} is required", i + 1)));
        let method = rec[1].to_string();
        if method.is_empty() {
            return Err(err("method is empty".into()));
        }
        match &rec[0] {
            "survey" => {
                let m = SurveyCostModel { method, usd_per_ha: need(2)?, ha_per_mission: need(3)?, hours_per_mission: need(4)? };
                m.validate().map_err(|e| err(e.to_string()))?;
                models.survey.push(m);
            }
            "offset" => {
                let (low, high) = match (num(5)?, num(6)?, num(7)?) {
                    (Some(a), Some(b), Some(price)) => (
                        offset_cost_per_tonne(a, price).map_err(|e| err(e.to_string()))?,
                        offset_cost_per_tonne(b, price).map_err(|e| err(e.to_string()))?,
                    ),
                    (None, None, None) => (need(8)?, need(9)?),
                    _ => return Err(err("trees_per_tco2_low, trees_per_tco2_high and usd_per_tree go together".into())),
                };
                let stated_band = match (num(10)?, num(11)?) {
                    (Some(a), Some(b)) => Some((a, b)),
                    (None, None) => None,
                    _ => return Err(err("stated_low and stated_high go together".into())),
                };
                let breakdown = if rec[12].is_empty() {
                    Vec::new()
                } else {
                    rec[12]
                        .split(';')
                        .map(|part| {
                            let (k, v) = part.split_once(':').ok_or_else(|| err(format!("breakdown item {part:?} lacks ':'")))?;
                            let v = v.trim().parse::<f64>().map_err(|_| err(format!("breakdown share {v:?} is not a number")))?;
                            Ok((k.trim().to_string(), v))
                        })
                        .collect::<Result<_, EconomicsError>>()?
                };
                let m = OffsetCostModel {
                    method,
                    usd_per_tco2_low: low,
                    usd_per_tco2_high: high,
                    stated_band,
                    breakdown,
                    basis: rec[13].to_string(),
                };
                m.validate().map_err(|e| err(e.to_string()))?;
                models.offset.push(m);
            }
            k => return Err(err(format!("kind must be survey or offset, got {k:?}"))),
        }
    }
    Ok(models)
}
