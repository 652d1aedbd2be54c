//! Spectral indices and the nearest-centroid species classifier.
//!
//! Species maps are UInt8 grids without nodata; 0 means ground or
//! unclassified.

use rayon::prelude::*;

use crate::grid::GridError;
use crate::raster::Grid;

pub const DEFAULT_NDVI_THRESHOLD: f32 = 0.3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error("no spectral signatures supplied")]
    EmptySignatureSet,
    #[error("invalid signature: {0}")]
    InvalidSignature(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSignature {
    pub species_id: u8,
    pub label: String,
    /// (r, g, b, nir), each in [0, 1].
    pub centroid: [f64; 4],
}

fn same_lattice(grids: &[&Grid]) -> Result<(), SpectralError> {
    let first = grids[0].header();
    for g in &grids[1..] {
        if g.header().crs != first.crs {
            return Err(GridError::CrsMismatch { a: first.crs.clone(), b: g.header().crs.clone() }.into());
        }
        if !g.header().same_lattice(first) {
            return Err(GridError::LatticeMismatch.into());
        }
    }
    Ok(())
}

#[inline]
fn ndvi_value(red: f32, nir: f32) -> f32 {
    let sum = nir + red;
    if sum == 0.0 || red.is_nan() || nir.is_nan() {
        f32::NAN
    } else {
        ((nir - red) / sum).clamp(-1.0, 1.0)
    }
}

/// `(nir - red) / (nir + red)`, nodata where the sum is zero.
pub fn ndvi(red: &Grid, nir: &Grid) -> Result<Grid, SpectralError> {
    same_lattice(&[red, nir])?;
    let (r, n) = (red.to_f32_vec(), nir.to_f32_vec());
    let out: Vec<f32> = r.par_iter().zip(n.par_iter()).map(|(&r, &n)| ndvi_value(r, n)).collect();
    Ok(Grid::from_f32(red.header(), out).expect("same lattice"))
}

fn check_signatures(signatures: &[SpectralSignature]) -> Result<Vec<&SpectralSignature>, SpectralError> {
    if signatures.is_empty() {
        return Err(SpectralError::EmptySignatureSet);
    }
    let mut sorted: Vec<&SpectralSignature> = signatures.iter().collect();
    sorted.sort_by_key(|s| s.species_id);
    for (i, s) in sorted.iter().enumerate() {
        if s.species_id == 0 {
            return Err(SpectralError::InvalidSignature("species_id 0 is reserved for ground".into()));
        }
        if s.centroid.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(SpectralError::InvalidSignature(format!("species {} centroid outside [0, 1]", s.species_id)));
        }
        if i > 0 && sorted[i - 1].species_id == s.species_id {
            return Err(SpectralError::InvalidSignature(format!("duplicate species_id {}", s.species_id)));
        }
        if sorted[..i].iter().any(|t| t.centroid == s.centroid) {
            return Err(SpectralError::InvalidSignature(format!("species {} centroid is not distinct", s.species_id)));
        }
    }
    Ok(sorted)
}

/// Nearest-centroid label of one pixel; candidates must be sorted by id so
/// that ties resolve to the lowest id.
#[inline]
fn nearest(px: [f64; 4], sorted: &[&SpectralSignature]) -> u8 {
    let mut best = (f64::INFINITY, 0u8);
    for s in sorted {
        let d: f64 = (0..4).map(|k| (px[k] - s.centroid[k]).powi(2)).sum();
        if d < best.0 {
            best = (d, s.species_id);
        }
    }
    best.1
}

/// Per-pixel species map from aligned red, green, blue and NIR bands.
/// Pixels with NDVI below `ndvi_threshold`, or any nodata band, get 0.
pub fn classify_pixels(
    bands: [&Grid; 4],
    signatures: &[SpectralSignature],
    ndvi_threshold: f32,
) -> Result<Grid, SpectralError> {
    let sorted = check_signatures(signatures)?;
    same_lattice(&bands)?;
    let vals: Vec<Vec<f32>> = bands.iter().map(|b| b.to_f32_vec()).collect();
    let out: Vec<u8> = (0..bands[0].len())
        .into_par_iter()
        .map(|i| {
            let px = [vals[0][i], vals[1][i], vals[2][i], vals[3][i]];
            if px.iter().any(|v| v.is_nan()) {
                return 0;
            }
            let nd = ndvi_value(px[0], px[3]);
            if nd.is_nan() || nd < ndvi_threshold {
                return 0;
            }
            nearest(px.map(|v| v as f64), &sorted)
        })
        .collect();
    Ok(Grid::from_u8(bands[0].header(), out, None).expect("same lattice"))
}

/// Relabel each nonzero pixel with the modal nonzero label of its square
/// window. Ground pixels stay 0. A tie for the mode keeps the original label.
pub fn majority_filter(map: &Grid, radius: usize) -> Grid {
    let (w, h) = (map.width(), map.height());
    let src: Vec<u8> = (0..map.len()).map(|i| map.value(i).map_or(0, |v| v as u8)).collect();
    let mut out = vec![0u8; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(row, line)| {
        let mut counts = [0u32; 256];
        let (r0, r1) = (row.saturating_sub(radius), (row + radius).min(h - 1));
        for (col, cell) in line.iter_mut().enumerate() {
            let own = src[row * w + col];
            if own == 0 {
                continue;
            }
            let (c0, c1) = (col.saturating_sub(radius), (col + radius).min(w - 1));
            let mut seen = Vec::new();
            for r in r0..=r1 {
                for &l in &src[r * w + c0..=r * w + c1] {
                    if l != 0 {
                        if counts[l as usize] == 0 {
                            seen.push(l);
                        }
                        counts[l as usize] += 1;
                    }
                }
            }
            let top = seen.iter().map(|&l| counts[l as usize]).max().unwrap_or(0);
            let mut modes = seen.iter().filter(|&&l| counts[l as usize] == top);
            *cell = match (modes.next(), modes.next()) {
                (Some(&l), None) => l,
                _ => own,
            };
            for &l in &seen {
                counts[l as usize] = 0;
            }
        }
    });
    Grid::from_u8(map.header(), out, None).expect("same lattice")
}
