//! Per-species parameters shared by classification, allometry and the
//! synthetic forest. Loaded from the signatures CSV:
//! `species_id,label,r,g,b,nir,wood_density,crown_dbh_a,crown_dbh_b`.

use serde::{Deserialize, Serialize};

use crate::spectral::SpectralSignature;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpeciesError {
    #[error("signatures CSV line {line}: {reason}")]
    Parse { line: u64, reason: String },
    #[error("invalid species table: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesParams {
    pub species_id: u8,
    pub label: String,
    pub r: f64,
    pub g: f64,
    pub b: f64,
    pub nir: f64,
    /// g/cm³, in (0.1, 1.2).
    pub wood_density: f64,
    /// DBH (cm) = a · crown_diameter (m) ^ b.
    pub crown_dbh_a: f64,
    pub crown_dbh_b: f64,
}

impl SpeciesParams {
    pub fn centroid(&self) -> [f64; 4] {
        [self.r, self.g, self.b, self.nir]
    }

    pub fn signature(&self) -> SpectralSignature {
        SpectralSignature { species_id: self.species_id, label: self.label.clone(), centroid: self.centroid() }
    }

    pub fn validate(&self) -> Result<(), SpeciesError> {
        let id = self.species_id;
        if id == 0 {
            return Err(SpeciesError::Invalid("species_id 0 is reserved for ground".into()));
        }
        if !(self.wood_density > 0.1 && self.wood_density < 1.2) {
            return Err(SpeciesError::Invalid(format!("species {id}: wood_density {} outside (0.1, 1.2)", self.wood_density)));
        }
        if !(self.crown_dbh_a > 0.0 && self.crown_dbh_a.is_finite() && self.crown_dbh_b > 0.0 && self.crown_dbh_b.is_finite()) {
            return Err(SpeciesError::Invalid(format!("species {id}: crown_dbh coefficients must be positive")));
        }
        if self.centroid().iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(SpeciesError::Invalid(format!("species {id}: centroid components must lie in [0, 1]")));
        }
        Ok(())
    }
}

/// Check a whole table: valid rows, unique ids, distinct centroids.
pub fn validate_table(species: &[SpeciesParams]) -> Result<(), SpeciesError> {
    if species.is_empty() {
        return Err(SpeciesError::Invalid("no species".into()));
    }
    for (i, s) in species.iter().enumerate() {
        s.validate()?;
        for t in &species[..i] {
            if t.species_id == s.species_id {
                return Err(SpeciesError::Invalid(format!("duplicate species_id {}", s.species_id)));
            }
            if t.centroid() == s.centroid() {
                return Err(SpeciesError::Invalid(format!(
                    "species {} and {} share a spectral centroid",
                    t.species_id, s.species_id
                )));
            }
        }
    }
    Ok(())
}

pub fn parse_species_csv(text: &str) -> Result<Vec<SpeciesParams>, SpeciesError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.deserialize::<SpeciesParams>() {
        let rec = rec.map_err(|e| SpeciesError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        out.push(rec);
    }
    validate_table(&out)?;
    Ok(out)
}

pub fn species_to_csv(species: &[SpeciesParams]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in species {
        w.serialize(s).expect("in-memory CSV");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("CSV is UTF-8")
}

/// Three synthetic canopy species with well separated spectra.
pub fn default_species() -> Vec<SpeciesParams> {
    let sp = |id, label: &str, r, g, b, nir, rho| SpeciesParams {
        species_id: id,
        label: label.into(),
        r,
        g,
        b,
        nir,
        wood_density: rho,
        crown_dbh_a: 3.48,
        crown_dbh_b: 1.20,
    };
    vec![
        sp(1, "broadleaf_a", 0.08, 0.20, 0.06, 0.55, 0.60),
        sp(2, "broadleaf_b", 0.05, 0.12, 0.04, 0.38, 0.72),
        sp(3, "emergent_c", 0.14, 0.30, 0.11, 0.72, 0.35),
    ]
}

/// Reflectance of bare ground and understory gaps; its NDVI sits below the
/// default canopy gate.
pub const GROUND_SIGNATURE: [f64; 4] = [0.30, 0.26, 0.20, 0.36];
