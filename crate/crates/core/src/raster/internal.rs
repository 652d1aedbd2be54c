//! Flat fixture format: `CCR1` magic, a fixed little-endian header, then raw
//! little-endian samples.
//!
//! ```text
//! 0   "CCR1"
//! 4   u32 width
//! 8   u32 height
//! 12  u8  sample type (0 = u8, 1 = u16, 2 = f32)
//! 13  u8  layout (0 = strips, 1 = tiles)
//! 14  u32 tile width
//! 18  u32 tile height
//! 22  u8  nodata present
//! 23  f64 nodata
//! 31  f64 origin x, f64 origin y, f64 pixel size x, f64 pixel size y
//! 63  u32 crs byte length, followed by that many UTF-8 bytes
//!     samples
//! ```

use super::{GeoTransform, Grid, Layout, RasterError, RasterHeader, SampleType, Samples};

const MAGIC: &[u8; 4] = b"CCR1";
const FIXED_LEN: usize = 67;

pub fn write_internal(grid: &Grid) -> Vec<u8> {
    let h = grid.header();
    let mut out = Vec::with_capacity(FIXED_LEN + h.crs.len() + grid.len() * h.sample_type.bytes());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(h.width as u32).to_le_bytes());
    out.extend_from_slice(&(h.height as u32).to_le_bytes());
    out.push(match h.sample_type {
        SampleType::UInt8 => 0,
        SampleType::UInt16 => 1,
        SampleType::Float32 => 2,
    });
    let (layout, tw, th) = match h.layout {
        Layout::Strips => (0u8, 0u32, 0u32),
        Layout::Tiles { width, height } => (1, width, height),
    };
    out.push(layout);
    out.extend_from_slice(&tw.to_le_bytes());
    out.extend_from_slice(&th.to_le_bytes());
    out.push(h.nodata.is_some() as u8);
    out.extend_from_slice(&h.nodata.unwrap_or(0.0).to_le_bytes());
    let gt = &h.geotransform;
    for v in [gt.origin_x, gt.origin_y, gt.pixel_size_x, gt.pixel_size_y] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(h.crs.len() as u32).to_le_bytes());
    out.extend_from_slice(h.crs.as_bytes());
    out.extend_from_slice(&grid.samples().to_le_bytes());
    out
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], RasterError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len()).ok_or_else(|| {
            RasterError::malformed(self.pos as u64, format!("truncated while reading {what}"))
        })?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8, RasterError> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32, RasterError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f64(&mut self, what: &str) -> Result<f64, RasterError> {
        let b = self.take(8, what)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(f64::from_le_bytes(a))
    }
}

pub fn read_internal(bytes: &[u8]) -> Result<Grid, RasterError> {
    let mut r = Reader { data: bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(RasterError::malformed(0, "missing CCR1 magic"));
    }
    let width = r.u32("width")? as usize;
    let height = r.u32("height")? as usize;
    let type_pos = r.pos as u64;
    let sample_type = match r.u8("sample type")? {
        0 => SampleType::UInt8,
        1 => SampleType::UInt16,
        2 => SampleType::Float32,
        other => return Err(RasterError::malformed(type_pos, format!("unknown sample type code {other}"))),
    };
    let layout_pos = r.pos as u64;
    let layout_code = r.u8("layout")?;
    let tw = r.u32("tile width")?;
    let th = r.u32("tile height")?;
    let layout = match layout_code {
        0 => Layout::Strips,
        1 => Layout::Tiles { width: tw, height: th },
        other => return Err(RasterError::malformed(layout_pos, format!("unknown layout code {other}"))),
    };
    let has_nodata = r.u8("nodata flag")?;
    let nodata = r.f64("nodata")?;
    let geotransform = GeoTransform {
        origin_x: r.f64("origin x")?,
        origin_y: r.f64("origin y")?,
        pixel_size_x: r.f64("pixel size x")?,
        pixel_size_y: r.f64("pixel size y")?,
    };
    let crs_len = r.u32("crs length")? as usize;
    let crs_pos = r.pos as u64;
    let crs = std::str::from_utf8(r.take(crs_len, "crs")?)
        .map_err(|_| RasterError::malformed(crs_pos, "crs is not valid UTF-8"))?
        .to_owned();
    let header = RasterHeader {
        width,
        height,
        sample_type,
        nodata: (has_nodata != 0).then_some(nodata),
        geotransform,
        crs,
        layout,
    };
    let data_pos = r.pos;
    header.validate().map_err(|e| RasterError::malformed(4, e.to_string()))?;
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(sample_type.bytes()))
        .ok_or_else(|| RasterError::malformed(4, "dimensions overflow"))?;
    let rest = bytes.len() - data_pos;
    if rest != expected {
        return Err(RasterError::malformed(
            data_pos as u64,
            format!("expected {expected} sample bytes, found {rest}"),
        ));
    }
    let samples = Samples::from_le_bytes(sample_type, &bytes[data_pos..]);
    Grid::new(header, samples).map_err(|e| RasterError::malformed(data_pos as u64, e.to_string()))
}
