//! Georeferenced rasters and the two on-disk encodings the pipeline accepts.
//!
//! Every stage downstream of input parsing works on [`Grid`]: one band of
//! `UInt8`, `UInt16` or `Float32` samples in row-major order, an optional
//! nodata value, a north-up affine geotransform and an opaque CRS string.
//!
//! Two encodings are supported:
//!
//! * a GeoTIFF subset ([`read_geotiff`], [`write_geotiff`]): classic
//!   little/big-endian TIFF, strips or tiles, no compression or Deflate,
//!   optional horizontal-differencing predictor, GDAL nodata tag;
//! * a flat internal format ([`read_internal`], [`write_internal`]) used for
//!   test fixtures.

mod internal;
mod tiff;

pub use internal::{read_internal, write_internal};
pub use tiff::{
    read_geotiff, read_geotiff_band, write_geotiff, write_geotiff_with, Compression, Predictor,
    WriteOptions,
};

use thiserror::Error;

/// Errors produced while decoding or validating rasters.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RasterError {
    #[error("unsupported feature at byte {offset}: {feature}")]
    UnsupportedFeature { offset: u64, feature: String },
    #[error("malformed raster at byte {offset}: {reason}")]
    Malformed { offset: u64, reason: String },
    #[error("invalid raster: {0}")]
    Invalid(String),
}

impl RasterError {
    pub(crate) fn malformed(offset: u64, reason: impl Into<String>) -> Self {
        RasterError::Malformed { offset, reason: reason.into() }
    }

    pub(crate) fn unsupported(offset: u64, feature: impl Into<String>) -> Self {
        RasterError::UnsupportedFeature { offset, feature: feature.into() }
    }

    /// Byte offset the error refers to, when it came from a decoder.
    pub fn offset(&self) -> Option<u64> {
        match self {
            RasterError::UnsupportedFeature { offset, .. } | RasterError::Malformed { offset, .. } => {
                Some(*offset)
            }
            RasterError::Invalid(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SampleType {
    UInt8,
    UInt16,
    Float32,
}

impl SampleType {
    pub fn bytes(self) -> usize {
        match self {
            SampleType::UInt8 => 1,
            SampleType::UInt16 => 2,
            SampleType::Float32 => 4,
        }
    }
}

/// Storage layout of the encoded raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layout {
    Strips,
    Tiles { width: u32, height: u32 },
}

/// Affine map from pixel indices to world coordinates (meters).
///
/// `origin_x`/`origin_y` locate the outer corner of pixel (0, 0); a north-up
/// raster has a negative `pixel_size_y`.
#[derive(Debug, Clone, Copy)]
pub struct GeoTransform {
    pub origin_x: f64,
    pub origin_y: f64,
    pub pixel_size_x: f64,
    pub pixel_size_y: f64,
}

impl PartialEq for GeoTransform {
    fn eq(&self, other: &Self) -> bool {
        self.origin_x.to_bits() == other.origin_x.to_bits()
            && self.origin_y.to_bits() == other.origin_y.to_bits()
            && self.pixel_size_x.to_bits() == other.pixel_size_x.to_bits()
            && self.pixel_size_y.to_bits() == other.pixel_size_y.to_bits()
    }
}

impl Default for GeoTransform {
    fn default() -> Self {
        GeoTransform { origin_x: 0.0, origin_y: 0.0, pixel_size_x: 1.0, pixel_size_y: -1.0 }
    }
}

impl GeoTransform {
    pub fn north_up(origin_x: f64, origin_y: f64, pixel_size: f64) -> Self {
        GeoTransform { origin_x, origin_y, pixel_size_x: pixel_size, pixel_size_y: -pixel_size }
    }

    /// World coordinates of the center of pixel (col, row).
    pub fn pixel_center(&self, col: f64, row: f64) -> (f64, f64) {
        (
            self.origin_x + (col + 0.5) * self.pixel_size_x,
            self.origin_y + (row + 0.5) * self.pixel_size_y,
        )
    }

    /// Continuous pixel coordinates of a world point, where integer values
    /// are pixel centers.
    pub fn world_to_pixel(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.origin_x) / self.pixel_size_x - 0.5,
            (y - self.origin_y) / self.pixel_size_y - 0.5,
        )
    }

    pub fn pixel_area(&self) -> f64 {
        (self.pixel_size_x * self.pixel_size_y).abs()
    }

    /// Bounding box `(min_x, min_y, max_x, max_y)` of a `width × height` grid.
    pub fn extent(&self, width: usize, height: usize) -> (f64, f64, f64, f64) {
        let x0 = self.origin_x;
        let x1 = self.origin_x + width as f64 * self.pixel_size_x;
        let y0 = self.origin_y;
        let y1 = self.origin_y + height as f64 * self.pixel_size_y;
        (x0.min(x1), y0.min(y1), x0.max(x1), y0.max(y1))
    }
}

#[derive(Debug, Clone)]
pub struct RasterHeader {
    pub width: usize,
    pub height: usize,
    pub sample_type: SampleType,
    pub nodata: Option<f64>,
    pub geotransform: GeoTransform,
    /// Coordinate reference system, carried verbatim and compared by equality.
    pub crs: String,
    pub layout: Layout,
}

impl PartialEq for RasterHeader {
    fn eq(&self, other: &Self) -> bool {
        let nodata_eq = match (self.nodata, other.nodata) {
            (None, None) => true,
            (Some(a), Some(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        };
        self.width == other.width
            && self.height == other.height
            && self.sample_type == other.sample_type
            && nodata_eq
            && self.geotransform == other.geotransform
            && self.crs == other.crs
            && self.layout == other.layout
    }
}

impl RasterHeader {
    pub fn new(width: usize, height: usize, sample_type: SampleType, geotransform: GeoTransform) -> Self {
        RasterHeader {
            width,
            height,
            sample_type,
            nodata: None,
            geotransform,
            crs: String::new(),
            layout: Layout::Strips,
        }
    }

    pub fn with_nodata(mut self, nodata: Option<f64>) -> Self {
        self.nodata = nodata;
        self
    }

    pub fn with_crs(mut self, crs: impl Into<String>) -> Self {
        self.crs = crs.into();
        self
    }

    pub fn with_layout(mut self, layout: Layout) -> Self {
        self.layout = layout;
        self
    }

    pub fn with_sample_type(mut self, sample_type: SampleType) -> Self {
        self.sample_type = sample_type;
        self
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<(), RasterError> {
        if self.width == 0 || self.height == 0 {
            return Err(RasterError::Invalid(format!(
                "dimensions must be positive, got {}x{}",
                self.width, self.height
            )));
        }
        let gt = &self.geotransform;
        if !(gt.pixel_size_x > 0.0) || !gt.pixel_size_x.is_finite() {
            return Err(RasterError::Invalid(format!("pixel_size_x must be > 0, got {}", gt.pixel_size_x)));
        }
        if gt.pixel_size_y == 0.0 || !gt.pixel_size_y.is_finite() {
            return Err(RasterError::Invalid("pixel_size_y must be finite and non-zero".into()));
        }
        if !gt.origin_x.is_finite() || !gt.origin_y.is_finite() {
            return Err(RasterError::Invalid("origin must be finite".into()));
        }
        if let Layout::Tiles { width, height } = self.layout {
            if width == 0 || height == 0 || width % 16 != 0 || height % 16 != 0 {
                return Err(RasterError::Invalid(format!(
                    "tile dimensions must be positive multiples of 16, got {width}x{height}"
                )));
            }
        }
        Ok(())
    }

    /// True when both headers describe the same pixel lattice.
    pub fn same_lattice(&self, other: &RasterHeader) -> bool {
        self.width == other.width && self.height == other.height && self.geotransform == other.geotransform
    }
}

/// Decoded sample storage. Equality is bitwise, so NaN samples compare equal
/// to themselves.
#[derive(Debug, Clone)]
pub enum Samples {
    UInt8(Vec<u8>),
    UInt16(Vec<u16>),
    Float32(Vec<f32>),
}

impl PartialEq for Samples {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Samples::UInt8(a), Samples::UInt8(b)) => a == b,
            (Samples::UInt16(a), Samples::UInt16(b)) => a == b,
            (Samples::Float32(a), Samples::Float32(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            _ => false,
        }
    }
}

impl Samples {
    pub fn len(&self) -> usize {
        match self {
            Samples::UInt8(v) => v.len(),
            Samples::UInt16(v) => v.len(),
            Samples::Float32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_type(&self) -> SampleType {
        match self {
            Samples::UInt8(_) => SampleType::UInt8,
            Samples::UInt16(_) => SampleType::UInt16,
            Samples::Float32(_) => SampleType::Float32,
        }
    }

    #[inline]
    pub fn get_f64(&self, i: usize) -> f64 {
        match self {
            Samples::UInt8(v) => v[i] as f64,
            Samples::UInt16(v) => v[i] as f64,
            Samples::Float32(v) => v[i] as f64,
        }
    }

    /// Little-endian byte image of the samples.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        match self {
            Samples::UInt8(v) => v.clone(),
            Samples::UInt16(v) => v.iter().flat_map(|s| s.to_le_bytes()).collect(),
            Samples::Float32(v) => v.iter().flat_map(|s| s.to_le_bytes()).collect(),
        }
    }

    pub(crate) fn from_le_bytes(sample_type: SampleType, bytes: &[u8]) -> Samples {
        match sample_type {
            SampleType::UInt8 => Samples::UInt8(bytes.to_vec()),
            SampleType::UInt16 => {
                Samples::UInt16(bytes.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect())
            }
            SampleType::Float32 => Samples::Float32(
                bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect(),
            ),
        }
    }
}

/// One georeferenced raster band.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    header: RasterHeader,
    samples: Samples,
}

impl Grid {
    pub fn new(header: RasterHeader, samples: Samples) -> Result<Grid, RasterError> {
        header.validate()?;
        if samples.sample_type() != header.sample_type {
            return Err(RasterError::Invalid(format!(
                "header declares {:?} but samples are {:?}",
                header.sample_type,
                samples.sample_type()
            )));
        }
        if samples.len() != header.len() {
            return Err(RasterError::Invalid(format!(
                "expected {} samples for {}x{}, got {}",
                header.len(),
                header.width,
                header.height,
                samples.len()
            )));
        }
        Ok(Grid { header, samples })
    }

    /// Float32 grid on the lattice of `template`, with NaN nodata.
    pub fn from_f32(template: &RasterHeader, data: Vec<f32>) -> Result<Grid, RasterError> {
        let header = template.clone().with_sample_type(SampleType::Float32).with_nodata(Some(f64::NAN));
        Grid::new(header, Samples::Float32(data))
    }

    pub fn from_u8(template: &RasterHeader, data: Vec<u8>, nodata: Option<f64>) -> Result<Grid, RasterError> {
        let header = template.clone().with_sample_type(SampleType::UInt8).with_nodata(nodata);
        Grid::new(header, Samples::UInt8(data))
    }

    /// Constant Float32 grid, mostly for tests and synthetic scenes.
    pub fn filled(width: usize, height: usize, geotransform: GeoTransform, value: f32) -> Grid {
        let header = RasterHeader::new(width, height, SampleType::Float32, geotransform);
        Grid::new(header, Samples::Float32(vec![value; width * height])).expect("valid constant grid")
    }

    pub fn header(&self) -> &RasterHeader {
        &self.header
    }

    pub fn samples(&self) -> &Samples {
        &self.samples
    }

    pub fn into_parts(self) -> (RasterHeader, Samples) {
        (self.header, self.samples)
    }

    pub fn width(&self) -> usize {
        self.header.width
    }

    pub fn height(&self) -> usize {
        self.header.height
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn geotransform(&self) -> &GeoTransform {
        &self.header.geotransform
    }

    pub fn nodata(&self) -> Option<f64> {
        self.header.nodata
    }

    #[inline]
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.header.width + col
    }

    /// True when a raw sample value is nodata. NaN is never valid data.
    #[inline]
    pub fn is_nodata_value(&self, v: f64) -> bool {
        if v.is_nan() {
            return true;
        }
        match self.header.nodata {
            Some(nd) => v == nd,
            None => false,
        }
    }

    /// Sample `i` as f64, or `None` for nodata.
    #[inline]
    pub fn value(&self, i: usize) -> Option<f64> {
        let v = self.samples.get_f64(i);
        if self.is_nodata_value(v) {
            None
        } else {
            Some(v)
        }
    }

    #[inline]
    pub fn value_at(&self, col: usize, row: usize) -> Option<f64> {
        self.value(self.index(col, row))
    }

    /// Float32 working copy with nodata mapped to NaN.
    pub fn to_f32_vec(&self) -> Vec<f32> {
        (0..self.len()).map(|i| self.value(i).map_or(f32::NAN, |v| v as f32)).collect()
    }

    /// Borrow the samples when the grid is Float32.
    pub fn as_f32(&self) -> Option<&[f32]> {
        match &self.samples {
            Samples::Float32(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_u8(&self) -> Option<&[u8]> {
        match &self.samples {
            Samples::UInt8(v) => Some(v),
            _ => None,
        }
    }

    /// Number of valid (non-nodata) cells.
    pub fn valid_count(&self) -> usize {
        (0..self.len()).filter(|&i| self.value(i).is_some()).count()
    }

    /// Minimum and maximum over valid cells.
    pub fn min_max(&self) -> Option<(f64, f64)> {
        let mut it = (0..self.len()).filter_map(|i| self.value(i));
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }

    pub fn with_header(self, header: RasterHeader) -> Result<Grid, RasterError> {
        Grid::new(header, self.samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(w: usize, h: usize) -> RasterHeader {
        RasterHeader::new(w, h, SampleType::Float32, GeoTransform::north_up(100.0, 200.0, 0.5))
    }

    #[test]
    fn rejects_wrong_sample_count() {
        let err = Grid::new(header(2, 2), Samples::Float32(vec![0.0; 3])).unwrap_err();
        assert!(matches!(err, RasterError::Invalid(_)));
    }

    #[test]
    fn rejects_bad_tiles_and_pixel_size() {
        let h = header(2, 2).with_layout(Layout::Tiles { width: 24, height: 16 });
        assert!(h.validate().is_err());
        let mut h = header(2, 2);
        h.geotransform.pixel_size_x = -1.0;
        assert!(h.validate().is_err());
        let mut h = header(2, 2);
        h.geotransform.pixel_size_y = 0.0;
        assert!(h.validate().is_err());
        assert!(header(0, 2).validate().is_err());
    }

    #[test]
    fn pixel_centers_are_affine() {
        let gt = GeoTransform::north_up(100.0, 200.0, 0.5);
        assert_eq!(gt.pixel_center(0.0, 0.0), (100.25, 199.75));
        assert_eq!(gt.pixel_center(3.0, 2.0), (101.75, 198.75));
        let (c, r) = gt.world_to_pixel(101.75, 198.75);
        assert!((c - 3.0).abs() < 1e-12 && (r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn nodata_cells_are_skipped() {
        let h = header(3, 1).with_nodata(Some(-9999.0));
        let g = Grid::new(h, Samples::Float32(vec![1.0, -9999.0, f32::NAN])).unwrap();
        assert_eq!(g.value(0), Some(1.0));
        assert_eq!(g.value(1), None);
        assert_eq!(g.value(2), None);
        assert_eq!(g.valid_count(), 1);
        assert_eq!(g.min_max(), Some((1.0, 1.0)));
    }

    #[test]
    fn float_equality_is_bitwise() {
        assert_eq!(Samples::Float32(vec![f32::NAN]), Samples::Float32(vec![f32::NAN]));
        assert_ne!(Samples::Float32(vec![0.0]), Samples::Float32(vec![-0.0]));
    }
}
