//! GeoTIFF subset reader and writer.
//!
//! Reads classic TIFF (either byte order), one IFD, 8/16-bit unsigned or
//! 32-bit float samples, strips or tiles, compression none (1) or Deflate
//! (8), predictor none (1) or horizontal differencing (2). Images with 3 or
//! 4 interleaved samples per pixel are only readable one band at a time via
//! [`read_geotiff_band`].
//!
//! Horizontal differencing on Float32 works on the raw 32-bit words with
//! wrapping arithmetic, the way libtiff implements it.

use std::io::{Read, Write};

use flate2::read::ZlibDecoder;
use flate2::write::ZlibEncoder;
use rayon::prelude::*;

use super::{GeoTransform, Grid, Layout, RasterError, RasterHeader, SampleType, Samples};

const TAG_IMAGE_WIDTH: u16 = 256;
const TAG_IMAGE_LENGTH: u16 = 257;
const TAG_BITS_PER_SAMPLE: u16 = 258;
const TAG_COMPRESSION: u16 = 259;
const TAG_PHOTOMETRIC: u16 = 262;
const TAG_STRIP_OFFSETS: u16 = 273;
const TAG_SAMPLES_PER_PIXEL: u16 = 277;
const TAG_ROWS_PER_STRIP: u16 = 278;
const TAG_STRIP_BYTE_COUNTS: u16 = 279;
const TAG_PLANAR_CONFIG: u16 = 284;
const TAG_PREDICTOR: u16 = 317;
const TAG_TILE_WIDTH: u16 = 322;
const TAG_TILE_LENGTH: u16 = 323;
const TAG_TILE_OFFSETS: u16 = 324;
const TAG_TILE_BYTE_COUNTS: u16 = 325;
const TAG_SAMPLE_FORMAT: u16 = 339;
const TAG_MODEL_PIXEL_SCALE: u16 = 33550;
const TAG_MODEL_TIEPOINT: u16 = 33922;
const TAG_MODEL_TRANSFORMATION: u16 = 34264;
const TAG_GEO_KEY_DIRECTORY: u16 = 34735;
const TAG_GEO_DOUBLE_PARAMS: u16 = 34736;
const TAG_GEO_ASCII_PARAMS: u16 = 34737;
const TAG_GDAL_NODATA: u16 = 42113;

const TYPE_BYTE: u16 = 1;
const TYPE_ASCII: u16 = 2;
const TYPE_SHORT: u16 = 3;
const TYPE_LONG: u16 = 4;
const TYPE_DOUBLE: u16 = 12;

const GT_CITATION_GEO_KEY: u16 = 1026;
const GEOKEYS_PREFIX: &str = "geokeys:";

/// Largest expansion ratio a Deflate stream can achieve.
const MAX_DEFLATE_RATIO: u64 = 1032;
const MAX_PIXELS: u64 = 1 << 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compression {
    None,
    Deflate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Predictor {
    None,
    Horizontal,
}

/// Encoding choices for [`write_geotiff_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WriteOptions {
    pub layout: Layout,
    pub compression: Compression,
    pub predictor: Predictor,
}

impl Default for WriteOptions {
    fn default() -> Self {
        WriteOptions {
            layout: Layout::Tiles { width: 256, height: 256 },
            compression: Compression::Deflate,
            predictor: Predictor::None,
        }
    }
}

fn type_size(typ: u16) -> Option<u64> {
    match typ {
        1 | 2 | 6 | 7 => Some(1),
        3 | 8 => Some(2),
        4 | 9 | 11 => Some(4),
        5 | 10 | 12 => Some(8),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    tag: u16,
    typ: u16,
    count: u64,
    /// Offset of the 12-byte directory entry.
    pos: u64,
    /// Offset of the first value, when the type is known.
    value_pos: Option<u64>,
}

struct TiffBytes<'a> {
    data: &'a [u8],
    big_endian: bool,
}

impl<'a> TiffBytes<'a> {
    fn slice(&self, off: u64, len: u64, what: &str) -> Result<&'a [u8], RasterError> {
        let end = off.checked_add(len).filter(|&e| e <= self.data.len() as u64).ok_or_else(|| {
            RasterError::malformed(
                off.min(self.data.len() as u64),
                format!("{what}: {len} bytes at offset {off} run past end of file ({} bytes)", self.data.len()),
            )
        })?;
        Ok(&self.data[off as usize..end as usize])
    }

    fn u16(&self, off: u64, what: &str) -> Result<u16, RasterError> {
        let b = self.slice(off, 2, what)?;
        let a = [b[0], b[1]];
        Ok(if self.big_endian { u16::from_be_bytes(a) } else { u16::from_le_bytes(a) })
    }

    fn u32(&self, off: u64, what: &str) -> Result<u32, RasterError> {
        let b = self.slice(off, 4, what)?;
        let a = [b[0], b[1], b[2], b[3]];
        Ok(if self.big_endian { u32::from_be_bytes(a) } else { u32::from_le_bytes(a) })
    }

    fn f64_at(&self, off: u64, what: &str) -> Result<f64, RasterError> {
        let b = self.slice(off, 8, what)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(if self.big_endian { f64::from_be_bytes(a) } else { f64::from_le_bytes(a) })
    }

    fn uints(&self, e: &Entry) -> Result<Vec<u64>, RasterError> {
        let size = match e.typ {
            TYPE_BYTE => 1,
            TYPE_SHORT => 2,
            TYPE_LONG => 4,
            other => {
                return Err(RasterError::malformed(
                    e.pos,
                    format!("tag {} has type {other}, expected an unsigned integer type", e.tag),
                ))
            }
        };
        let start = e.value_pos.expect("integer types have a size");
        let raw = self.slice(start, e.count * size, &format!("values of tag {}", e.tag))?;
        Ok(raw
            .chunks_exact(size as usize)
            .map(|c| match size {
                1 => c[0] as u64,
                2 => {
                    let a = [c[0], c[1]];
                    (if self.big_endian { u16::from_be_bytes(a) } else { u16::from_le_bytes(a) }) as u64
                }
                _ => {
                    let a = [c[0], c[1], c[2], c[3]];
                    (if self.big_endian { u32::from_be_bytes(a) } else { u32::from_le_bytes(a) }) as u64
                }
            })
            .collect())
    }

    fn uint(&self, e: &Entry) -> Result<u64, RasterError> {
        self.uints(e)?
            .first()
            .copied()
            .ok_or_else(|| RasterError::malformed(e.pos, format!("tag {} has no values", e.tag)))
    }

    fn doubles(&self, e: &Entry) -> Result<Vec<f64>, RasterError> {
        if e.typ != TYPE_DOUBLE {
            return Err(RasterError::malformed(e.pos, format!("tag {} has type {}, expected DOUBLE", e.tag, e.typ)));
        }
        let start = e.value_pos.expect("double has a size");
        self.slice(start, e.count * 8, &format!("values of tag {}", e.tag))?;
        (0..e.count).map(|i| self.f64_at(start + 8 * i, "double value")).collect()
    }

    fn ascii(&self, e: &Entry) -> Result<String, RasterError> {
        if e.typ != TYPE_ASCII && e.typ != TYPE_BYTE && e.typ != 7 {
            return Err(RasterError::malformed(e.pos, format!("tag {} has type {}, expected ASCII", e.tag, e.typ)));
        }
        let raw = self.slice(e.value_pos.expect("ascii has a size"), e.count, &format!("values of tag {}", e.tag))?;
        let end = raw.iter().rposition(|&b| b != 0).map_or(0, |p| p + 1);
        Ok(String::from_utf8_lossy(&raw[..end]).into_owned())
    }
}

struct Ifd {
    entries: Vec<Entry>,
    pos: u64,
}

impl Ifd {
    fn get(&self, tag: u16) -> Option<&Entry> {
        self.entries.iter().find(|e| e.tag == tag)
    }

    fn require(&self, tag: u16, name: &str) -> Result<&Entry, RasterError> {
        self.get(tag).ok_or_else(|| RasterError::malformed(self.pos, format!("missing required tag {tag} ({name})")))
    }
}

fn parse_header(data: &[u8]) -> Result<(TiffBytes<'_>, Ifd), RasterError> {
    if data.len() < 8 {
        return Err(RasterError::malformed(data.len() as u64, "file shorter than the 8-byte TIFF header"));
    }
    let big_endian = match &data[0..2] {
        b"II" => false,
        b"MM" => true,
        _ => return Err(RasterError::malformed(0, "byte-order mark is neither II nor MM")),
    };
    let t = TiffBytes { data, big_endian };
    match t.u16(2, "magic")? {
        42 => {}
        43 => return Err(RasterError::unsupported(2, "BigTIFF")),
        other => return Err(RasterError::malformed(2, format!("bad TIFF magic {other}"))),
    }
    let ifd_pos = t.u32(4, "first IFD offset")? as u64;
    if ifd_pos < 8 {
        return Err(RasterError::malformed(4, format!("first IFD offset {ifd_pos} points into the header")));
    }
    let n = t.u16(ifd_pos, "IFD entry count")? as u64;
    if n == 0 {
        return Err(RasterError::malformed(ifd_pos, "IFD has no entries"));
    }
    let mut entries = Vec::with_capacity(n as usize);
    for i in 0..n {
        let pos = ifd_pos + 2 + 12 * i;
        let tag = t.u16(pos, "IFD entry tag")?;
        let typ = t.u16(pos + 2, "IFD entry type")?;
        let count = t.u32(pos + 4, "IFD entry count")? as u64;
        let value_pos = match type_size(typ) {
            Some(size) => {
                let total = count * size;
                let vp = if total <= 4 { pos + 8 } else { t.u32(pos + 8, "IFD entry value offset")? as u64 };
                Some(vp)
            }
            None => {
                // Values of unknown types are never read; still make sure the
                // entry itself is complete.
                t.u32(pos + 8, "IFD entry value offset")?;
                None
            }
        };
        if entries.iter().any(|e: &Entry| e.tag == tag) {
            continue;
        }
        entries.push(Entry { tag, typ, count, pos, value_pos });
    }
    t.u32(ifd_pos + 2 + 12 * n, "next IFD offset")?;
    Ok((t, Ifd { entries, pos: ifd_pos }))
}

/// A sample type as it appears in a decoded chunk.
trait Sample: Copy + Send + Sync + Default + 'static {
    const BYTES: usize;
    fn decode(b: &[u8], big_endian: bool) -> Self;
    fn encode_le(self, out: &mut Vec<u8>);
    fn undifference(self, prev: Self) -> Self;
    fn difference(self, prev: Self) -> Self;
}

impl Sample for u8 {
    const BYTES: usize = 1;
    fn decode(b: &[u8], _: bool) -> Self {
        b[0]
    }
    fn encode_le(self, out: &mut Vec<u8>) {
        out.push(self)
    }
    fn undifference(self, prev: Self) -> Self {
        self.wrapping_add(prev)
    }
    fn difference(self, prev: Self) -> Self {
        self.wrapping_sub(prev)
    }
}

impl Sample for u16 {
    const BYTES: usize = 2;
    fn decode(b: &[u8], be: bool) -> Self {
        let a = [b[0], b[1]];
        if be {
            u16::from_be_bytes(a)
        } else {
            u16::from_le_bytes(a)
        }
    }
    fn encode_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes())
    }
    fn undifference(self, prev: Self) -> Self {
        self.wrapping_add(prev)
    }
    fn difference(self, prev: Self) -> Self {
        self.wrapping_sub(prev)
    }
}

impl Sample for f32 {
    const BYTES: usize = 4;
    fn decode(b: &[u8], be: bool) -> Self {
        let a = [b[0], b[1], b[2], b[3]];
        if be {
            f32::from_be_bytes(a)
        } else {
            f32::from_le_bytes(a)
        }
    }
    fn encode_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes())
    }
    fn undifference(self, prev: Self) -> Self {
        f32::from_bits(self.to_bits().wrapping_add(prev.to_bits()))
    }
    fn difference(self, prev: Self) -> Self {
        f32::from_bits(self.to_bits().wrapping_sub(prev.to_bits()))
    }
}

/// Geometry of one strip or tile.
#[derive(Debug, Clone, Copy)]
struct Chunk {
    /// Top-left pixel in the image.
    col: usize,
    row: usize,
    /// Stored dimensions (tiles are always full size, the last strip may be short).
    width: usize,
    height: usize,
}

fn chunk_grid(width: usize, height: usize, layout: Layout, rows_per_strip: usize) -> Vec<Chunk> {
    match layout {
        Layout::Strips => {
            let rps = rows_per_strip.clamp(1, height);
            (0..height.div_ceil(rps))
                .map(|i| Chunk { col: 0, row: i * rps, width, height: rps.min(height - i * rps) })
                .collect()
        }
        Layout::Tiles { width: tw, height: th } => {
            let (tw, th) = (tw as usize, th as usize);
            let across = width.div_ceil(tw);
            let down = height.div_ceil(th);
            (0..down)
                .flat_map(|r| (0..across).map(move |c| Chunk { col: c * tw, row: r * th, width: tw, height: th }))
                .collect()
        }
    }
}

fn chunk_count(width: usize, height: usize, layout: Layout, rows_per_strip: usize) -> u64 {
    match layout {
        Layout::Strips => height.div_ceil(rows_per_strip.clamp(1, height)) as u64,
        Layout::Tiles { width: tw, height: th } => {
            (width.div_ceil(tw as usize) as u64).saturating_mul(height.div_ceil(th as usize) as u64)
        }
    }
}

struct DecodePlan {
    width: usize,
    height: usize,
    spp: usize,
    band: usize,
    big_endian: bool,
    compression: Compression,
    predictor: Predictor,
}

fn decode_chunk<T: Sample>(
    plan: &DecodePlan,
    chunk: &Chunk,
    raw: &[u8],
    raw_pos: u64,
) -> Result<Vec<T>, RasterError> {
    let n_values = chunk.width * chunk.height * plan.spp;
    let needed = n_values * T::BYTES;
    let bytes: std::borrow::Cow<'_, [u8]> = match plan.compression {
        Compression::None => {
            if raw.len() < needed {
                return Err(RasterError::malformed(
                    raw_pos,
                    format!("chunk holds {} bytes, expected {needed}", raw.len()),
                ));
            }
            std::borrow::Cow::Borrowed(&raw[..needed])
        }
        Compression::Deflate => {
            let mut out = Vec::with_capacity(needed);
            ZlibDecoder::new(raw)
                .take(needed as u64)
                .read_to_end(&mut out)
                .map_err(|e| RasterError::malformed(raw_pos, format!("invalid Deflate stream: {e}")))?;
            if out.len() < needed {
                return Err(RasterError::malformed(
                    raw_pos,
                    format!("Deflate stream decoded to {} bytes, expected {needed}", out.len()),
                ));
            }
            std::borrow::Cow::Owned(out)
        }
    };
    let mut values: Vec<T> = bytes.chunks_exact(T::BYTES).map(|b| T::decode(b, plan.big_endian)).collect();
    if plan.predictor == Predictor::Horizontal {
        let row_len = chunk.width * plan.spp;
        for row in values.chunks_exact_mut(row_len) {
            for i in plan.spp..row_len {
                row[i] = row[i].undifference(row[i - plan.spp]);
            }
        }
    }
    Ok(values)
}

fn decode_image<T: Sample>(
    t: &TiffBytes<'_>,
    plan: &DecodePlan,
    chunks: &[Chunk],
    offsets: &[u64],
    counts: &[u64],
    entry_pos: u64,
) -> Result<Vec<T>, RasterError> {
    let raws: Vec<(&[u8], u64)> = offsets
        .iter()
        .zip(counts)
        .map(|(&off, &len)| t.slice(off, len, "image chunk").map(|s| (s, off)))
        .collect::<Result<_, _>>()
        .map_err(|e| match e {
            RasterError::Malformed { reason, .. } => RasterError::malformed(entry_pos, reason),
            other => other,
        })?;
    let decoded: Vec<Result<Vec<T>, RasterError>> = chunks
        .par_iter()
        .zip(raws.par_iter())
        .map(|(chunk, (raw, pos))| decode_chunk::<T>(plan, chunk, raw, *pos))
        .collect();
    let mut out = vec![T::default(); plan.width * plan.height];
    for (chunk, values) in chunks.iter().zip(decoded) {
        let values = values?;
        let rows = chunk.height.min(plan.height - chunk.row);
        let cols = chunk.width.min(plan.width - chunk.col);
        for r in 0..rows {
            let src = &values[r * chunk.width * plan.spp..];
            let dst = &mut out[(chunk.row + r) * plan.width + chunk.col..][..cols];
            for (c, d) in dst.iter_mut().enumerate() {
                *d = src[c * plan.spp + plan.band];
            }
        }
    }
    Ok(out)
}

/// Decode a single-band GeoTIFF.
pub fn read_geotiff(bytes: &[u8]) -> Result<Grid, RasterError> {
    read_impl(bytes, None)
}

/// Decode one band of a 1-, 3- or 4-sample-per-pixel interleaved GeoTIFF.
pub fn read_geotiff_band(bytes: &[u8], band: usize) -> Result<Grid, RasterError> {
    read_impl(bytes, Some(band))
}

fn read_impl(bytes: &[u8], band: Option<usize>) -> Result<Grid, RasterError> {
    let (t, ifd) = parse_header(bytes)?;

    let width_e = ifd.require(TAG_IMAGE_WIDTH, "ImageWidth")?;
    let height_e = ifd.require(TAG_IMAGE_LENGTH, "ImageLength")?;
    let width = t.uint(width_e)?;
    let height = t.uint(height_e)?;
    if width == 0 || height == 0 {
        return Err(RasterError::malformed(width_e.pos, format!("image is {width}x{height}")));
    }
    if width.saturating_mul(height) > MAX_PIXELS {
        return Err(RasterError::unsupported(width_e.pos, format!("image of {width}x{height} pixels")));
    }
    let (width, height) = (width as usize, height as usize);

    let spp = match ifd.get(TAG_SAMPLES_PER_PIXEL) {
        Some(e) => t.uint(e)? as usize,
        None => 1,
    };
    let spp_pos = ifd.get(TAG_SAMPLES_PER_PIXEL).map_or(ifd.pos, |e| e.pos);
    let band = match (spp, band) {
        (1, None) => 0,
        (1 | 3 | 4, Some(b)) if b < spp => b,
        (1 | 3 | 4, Some(b)) => {
            return Err(RasterError::Invalid(format!("band {b} requested from a {spp}-band image")));
        }
        (3 | 4, None) => {
            return Err(RasterError::unsupported(
                spp_pos,
                format!("SamplesPerPixel={spp} outside band-extraction read"),
            ))
        }
        (other, _) => return Err(RasterError::unsupported(spp_pos, format!("SamplesPerPixel={other}"))),
    };
    if spp > 1 {
        if let Some(e) = ifd.get(TAG_PLANAR_CONFIG) {
            let pc = t.uint(e)?;
            if pc != 1 {
                return Err(RasterError::unsupported(e.pos, format!("PlanarConfiguration={pc}")));
            }
        }
    }

    let bits = match ifd.get(TAG_BITS_PER_SAMPLE) {
        Some(e) => t.uints(e)?,
        None => vec![1],
    };
    let bits_pos = ifd.get(TAG_BITS_PER_SAMPLE).map_or(ifd.pos, |e| e.pos);
    if bits.is_empty() || bits.iter().any(|&b| b != bits[0]) {
        return Err(RasterError::unsupported(bits_pos, format!("mixed BitsPerSample {bits:?}")));
    }
    let format = match ifd.get(TAG_SAMPLE_FORMAT) {
        Some(e) => t.uints(e)?,
        None => vec![1],
    };
    let format_pos = ifd.get(TAG_SAMPLE_FORMAT).map_or(ifd.pos, |e| e.pos);
    if format.is_empty() || format.iter().any(|&f| f != format[0]) {
        return Err(RasterError::unsupported(format_pos, format!("mixed SampleFormat {format:?}")));
    }
    let sample_type = match (bits[0], format[0]) {
        (8, 1) => SampleType::UInt8,
        (16, 1) => SampleType::UInt16,
        (32, 3) => SampleType::Float32,
        (b, f) => {
            return Err(RasterError::unsupported(bits_pos, format!("BitsPerSample={b} with SampleFormat={f}")))
        }
    };

    let compression = match ifd.get(TAG_COMPRESSION) {
        Some(e) => match t.uint(e)? {
            1 => Compression::None,
            8 => Compression::Deflate,
            other => return Err(RasterError::unsupported(e.pos, format!("Compression={other}"))),
        },
        None => Compression::None,
    };
    let predictor = match ifd.get(TAG_PREDICTOR) {
        Some(e) => match t.uint(e)? {
            1 => Predictor::None,
            2 => Predictor::Horizontal,
            other => return Err(RasterError::unsupported(e.pos, format!("Predictor={other}"))),
        },
        None => Predictor::None,
    };
    if let Some(e) = ifd.get(TAG_PHOTOMETRIC) {
        let p = t.uint(e)?;
        if p > 2 {
            return Err(RasterError::unsupported(e.pos, format!("PhotometricInterpretation={p}")));
        }
    }
    if let Some(e) = ifd.get(TAG_MODEL_TRANSFORMATION) {
        return Err(RasterError::unsupported(e.pos, "ModelTransformationTag"));
    }

    let (layout, rows_per_strip, offsets_e, counts_e) = if let Some(tw_e) = ifd.get(TAG_TILE_WIDTH) {
        let th_e = ifd.require(TAG_TILE_LENGTH, "TileLength")?;
        let tw = t.uint(tw_e)?;
        let th = t.uint(th_e)?;
        if tw == 0 || th == 0 || tw % 16 != 0 || th % 16 != 0 || tw > u32::MAX as u64 || th > u32::MAX as u64 {
            return Err(RasterError::malformed(tw_e.pos, format!("tile size {tw}x{th} is not a multiple of 16")));
        }
        if tw.saturating_mul(th) > MAX_PIXELS {
            return Err(RasterError::unsupported(tw_e.pos, format!("tile size {tw}x{th}")));
        }
        (
            Layout::Tiles { width: tw as u32, height: th as u32 },
            0,
            ifd.require(TAG_TILE_OFFSETS, "TileOffsets")?,
            ifd.require(TAG_TILE_BYTE_COUNTS, "TileByteCounts")?,
        )
    } else {
        let rps = match ifd.get(TAG_ROWS_PER_STRIP) {
            Some(e) => t.uint(e)?,
            None => height as u64,
        };
        if rps == 0 {
            let e = ifd.require(TAG_ROWS_PER_STRIP, "RowsPerStrip")?;
            return Err(RasterError::malformed(e.pos, "RowsPerStrip is zero"));
        }
        (
            Layout::Strips,
            rps.min(height as u64) as usize,
            ifd.require(TAG_STRIP_OFFSETS, "StripOffsets")?,
            ifd.require(TAG_STRIP_BYTE_COUNTS, "StripByteCounts")?,
        )
    };
    // Count before building the chunk list: a forged header can imply
    // billions of tiny chunks.
    let expected = chunk_count(width, height, layout, rows_per_strip);
    if offsets_e.count != expected || counts_e.count != expected {
        return Err(RasterError::malformed(
            offsets_e.pos,
            format!(
                "expected {expected} chunk offsets and byte counts, found {} and {}",
                offsets_e.count, counts_e.count
            ),
        ));
    }
    let chunks = chunk_grid(width, height, layout, rows_per_strip);
    let offsets = t.uints(offsets_e)?;
    let counts = t.uints(counts_e)?;

    // Refuse to allocate more than the chunk data could possibly encode.
    let decoded_bytes: u64 = chunks.iter().map(|c| (c.width * c.height * spp * sample_type.bytes()) as u64).sum();
    let stored_bytes: u64 = counts.iter().sum();
    let capacity = match compression {
        Compression::None => stored_bytes,
        Compression::Deflate => stored_bytes.saturating_mul(MAX_DEFLATE_RATIO),
    };
    if decoded_bytes > capacity {
        return Err(RasterError::malformed(
            counts_e.pos,
            format!("chunks hold {stored_bytes} bytes, too few for {decoded_bytes} decoded bytes"),
        ));
    }

    let plan = DecodePlan { width, height, spp, band, big_endian: t.big_endian, compression, predictor };
    let samples = match sample_type {
        SampleType::UInt8 => Samples::UInt8(decode_image::<u8>(&t, &plan, &chunks, &offsets, &counts, offsets_e.pos)?),
        SampleType::UInt16 => {
            Samples::UInt16(decode_image::<u16>(&t, &plan, &chunks, &offsets, &counts, offsets_e.pos)?)
        }
        SampleType::Float32 => {
            Samples::Float32(decode_image::<f32>(&t, &plan, &chunks, &offsets, &counts, offsets_e.pos)?)
        }
    };

    let geotransform = read_geotransform(&t, &ifd)?;
    let crs = read_crs(&t, &ifd)?;
    let nodata = match ifd.get(TAG_GDAL_NODATA) {
        Some(e) => {
            let text = t.ascii(e)?;
            let trimmed = text.trim();
            Some(
                trimmed
                    .parse::<f64>()
                    .map_err(|_| RasterError::malformed(e.pos, format!("GDAL_NODATA {trimmed:?} is not a number")))?,
            )
        }
        None => None,
    };

    let header = RasterHeader { width, height, sample_type, nodata, geotransform, crs, layout };
    header.validate().map_err(|e| RasterError::malformed(ifd.pos, e.to_string()))?;
    Grid::new(header, samples).map_err(|e| RasterError::malformed(ifd.pos, e.to_string()))
}

fn read_geotransform(t: &TiffBytes<'_>, ifd: &Ifd) -> Result<GeoTransform, RasterError> {
    let mut gt = GeoTransform::default();
    if let Some(e) = ifd.get(TAG_MODEL_PIXEL_SCALE) {
        let scale = t.doubles(e)?;
        if scale.len() < 2 {
            return Err(RasterError::malformed(e.pos, "ModelPixelScale needs at least 2 values"));
        }
        gt.pixel_size_x = scale[0];
        gt.pixel_size_y = -scale[1];
    }
    if let Some(e) = ifd.get(TAG_MODEL_TIEPOINT) {
        let tp = t.doubles(e)?;
        if tp.len() < 6 {
            return Err(RasterError::malformed(e.pos, "ModelTiepoint needs at least 6 values"));
        }
        gt.origin_x = if tp[0] == 0.0 { tp[3] } else { tp[3] - tp[0] * gt.pixel_size_x };
        gt.origin_y = if tp[1] == 0.0 { tp[4] } else { tp[4] - tp[1] * gt.pixel_size_y };
    }
    Ok(gt)
}

/// Decode the GeoKey tags into an opaque string.
///
/// A directory holding only a citation key is returned as the citation text;
/// anything else is serialized verbatim as
/// `geokeys:<shorts>[;doubles:<f64s>][;ascii:<hex>]`.
fn read_crs(t: &TiffBytes<'_>, ifd: &Ifd) -> Result<String, RasterError> {
    let Some(dir_e) = ifd.get(TAG_GEO_KEY_DIRECTORY) else {
        return Ok(String::new());
    };
    let keys = t.uints(dir_e)?;
    let doubles = match ifd.get(TAG_GEO_DOUBLE_PARAMS) {
        Some(e) => t.doubles(e)?,
        None => Vec::new(),
    };
    let ascii = match ifd.get(TAG_GEO_ASCII_PARAMS) {
        Some(e) => {
            let raw = t.slice(e.value_pos.unwrap_or(e.pos), e.count, "GeoAsciiParams")?;
            let end = raw.iter().rposition(|&b| b != 0).map_or(0, |p| p + 1);
            raw[..end].to_vec()
        }
        None => Vec::new(),
    };
    if keys.len() == 8
        && keys[..4] == [1, 1, 0, 1]
        && keys[4] == GT_CITATION_GEO_KEY as u64
        && keys[5] == TAG_GEO_ASCII_PARAMS as u64
        && keys[7] == 0
        && doubles.is_empty()
        && keys[6] as usize == ascii.len()
        && ascii.last() == Some(&b'|')
    {
        if let Ok(text) = std::str::from_utf8(&ascii[..ascii.len() - 1]) {
            return Ok(text.to_owned());
        }
    }
    Ok(format_geokeys(&keys, &doubles, &ascii))
}

fn format_geokeys(keys: &[u64], doubles: &[f64], ascii: &[u8]) -> String {
    let mut s = String::from(GEOKEYS_PREFIX);
    s.push_str(&keys.iter().map(u64::to_string).collect::<Vec<_>>().join(","));
    if !doubles.is_empty() {
        s.push_str(";doubles:");
        s.push_str(&doubles.iter().map(|d| format!("{d:?}")).collect::<Vec<_>>().join(","));
    }
    if !ascii.is_empty() {
        s.push_str(";ascii:");
        for b in ascii {
            s.push_str(&format!("{b:02x}"));
        }
    }
    s
}

struct RawGeoKeys {
    keys: Vec<u16>,
    doubles: Vec<f64>,
    ascii: Vec<u8>,
}

fn parse_geokeys(s: &str) -> Option<RawGeoKeys> {
    let body = s.strip_prefix(GEOKEYS_PREFIX)?;
    let mut parts = body.split(';');
    let keys = parts
        .next()?
        .split(',')
        .map(|k| k.parse::<u16>().ok())
        .collect::<Option<Vec<_>>>()?;
    let mut doubles = Vec::new();
    let mut ascii = Vec::new();
    for part in parts {
        if let Some(d) = part.strip_prefix("doubles:") {
            doubles = d.split(',').map(|v| v.parse::<f64>().ok()).collect::<Option<Vec<_>>>()?;
        } else if let Some(h) = part.strip_prefix("ascii:") {
            if h.len() % 2 != 0 {
                return None;
            }
            ascii = (0..h.len())
                .step_by(2)
                .map(|i| u8::from_str_radix(h.get(i..i + 2)?, 16).ok())
                .collect::<Option<Vec<_>>>()?;
        } else {
            return None;
        }
    }
    let raw = RawGeoKeys { keys, doubles, ascii };
    let keys64: Vec<u64> = raw.keys.iter().map(|&k| k as u64).collect();
    // Only strings in canonical form are written raw, so reading them back
    // reproduces the same text.
    (format_geokeys(&keys64, &raw.doubles, &raw.ascii) == s && !is_citation_only(&raw)).then_some(raw)
}

fn is_citation_only(raw: &RawGeoKeys) -> bool {
    raw.keys.len() == 8
        && raw.keys[..4] == [1, 1, 0, 1]
        && raw.keys[4] == GT_CITATION_GEO_KEY
        && raw.keys[5] == TAG_GEO_ASCII_PARAMS
        && raw.keys[7] == 0
        && raw.doubles.is_empty()
        && raw.keys[6] as usize == raw.ascii.len()
        && raw.ascii.last() == Some(&b'|')
}

fn geokeys_for(crs: &str) -> Option<RawGeoKeys> {
    if crs.is_empty() {
        return None;
    }
    if let Some(raw) = parse_geokeys(crs) {
        return Some(raw);
    }
    let mut ascii = crs.as_bytes().to_vec();
    ascii.push(b'|');
    Some(RawGeoKeys {
        keys: vec![1, 1, 0, 1, GT_CITATION_GEO_KEY, TAG_GEO_ASCII_PARAMS, ascii.len() as u16, 0],
        doubles: Vec::new(),
        ascii,
    })
}

/// Encode with the default options: little-endian, 256×256 tiles, Deflate.
pub fn write_geotiff(grid: &Grid) -> Result<Vec<u8>, RasterError> {
    write_geotiff_with(grid, &WriteOptions::default())
}

struct OutEntry {
    tag: u16,
    typ: u16,
    count: u32,
    data: Vec<u8>,
}

impl OutEntry {
    fn shorts(tag: u16, v: &[u16]) -> Self {
        OutEntry { tag, typ: TYPE_SHORT, count: v.len() as u32, data: v.iter().flat_map(|x| x.to_le_bytes()).collect() }
    }
    fn longs(tag: u16, v: &[u32]) -> Self {
        OutEntry { tag, typ: TYPE_LONG, count: v.len() as u32, data: v.iter().flat_map(|x| x.to_le_bytes()).collect() }
    }
    fn doubles(tag: u16, v: &[f64]) -> Self {
        OutEntry { tag, typ: TYPE_DOUBLE, count: v.len() as u32, data: v.iter().flat_map(|x| x.to_le_bytes()).collect() }
    }
    fn ascii(tag: u16, bytes: &[u8]) -> Self {
        let mut data = bytes.to_vec();
        data.push(0);
        OutEntry { tag, typ: TYPE_ASCII, count: data.len() as u32, data }
    }
}

fn encode_chunk<T: Sample>(values: &[T], grid_width: usize, grid_height: usize, chunk: &Chunk, opts: &WriteOptions) -> Vec<u8> {
    let mut buf: Vec<T> = vec![T::default(); chunk.width * chunk.height];
    let rows = chunk.height.min(grid_height - chunk.row);
    let cols = chunk.width.min(grid_width - chunk.col);
    for r in 0..rows {
        let src = &values[(chunk.row + r) * grid_width + chunk.col..][..cols];
        buf[r * chunk.width..][..cols].copy_from_slice(src);
    }
    if opts.predictor == Predictor::Horizontal {
        for row in buf.chunks_exact_mut(chunk.width) {
            for i in (1..row.len()).rev() {
                row[i] = row[i].difference(row[i - 1]);
            }
        }
    }
    let mut bytes = Vec::with_capacity(buf.len() * T::BYTES);
    for v in buf {
        v.encode_le(&mut bytes);
    }
    match opts.compression {
        Compression::None => bytes,
        Compression::Deflate => {
            let mut enc = ZlibEncoder::new(Vec::new(), flate2::Compression::default());
            enc.write_all(&bytes).expect("writing to a Vec cannot fail");
            enc.finish().expect("writing to a Vec cannot fail")
        }
    }
}

fn encode_chunks<T: Sample>(values: &[T], grid: &Grid, chunks: &[Chunk], opts: &WriteOptions) -> Vec<Vec<u8>> {
    chunks.par_iter().map(|c| encode_chunk(values, grid.width(), grid.height(), c, opts)).collect()
}

/// Encode a grid as a little-endian GeoTIFF with explicit layout,
/// compression and predictor. The header's own `layout` field is ignored.
pub fn write_geotiff_with(grid: &Grid, opts: &WriteOptions) -> Result<Vec<u8>, RasterError> {
    let h = grid.header();
    h.clone().with_layout(opts.layout).validate()?;
    let (width, height) = (h.width, h.height);
    let row_bytes = width * h.sample_type.bytes();
    let rows_per_strip = (8192 / row_bytes.max(1)).max(1);
    let chunks = chunk_grid(width, height, opts.layout, rows_per_strip);
    let blobs = match grid.samples() {
        Samples::UInt8(v) => encode_chunks(v, grid, &chunks, opts),
        Samples::UInt16(v) => encode_chunks(v, grid, &chunks, opts),
        Samples::Float32(v) => encode_chunks(v, grid, &chunks, opts),
    };

    let too_big = || RasterError::Invalid("encoded image exceeds the 4 GiB classic TIFF limit".into());
    let (bits, format) = match h.sample_type {
        SampleType::UInt8 => (8u16, 1u16),
        SampleType::UInt16 => (16, 1),
        SampleType::Float32 => (32, 3),
    };
    let mut entries = vec![
        OutEntry::longs(TAG_IMAGE_WIDTH, &[u32::try_from(width).map_err(|_| too_big())?]),
        OutEntry::longs(TAG_IMAGE_LENGTH, &[u32::try_from(height).map_err(|_| too_big())?]),
        OutEntry::shorts(TAG_BITS_PER_SAMPLE, &[bits]),
        OutEntry::shorts(
            TAG_COMPRESSION,
            &[match opts.compression {
                Compression::None => 1,
                Compression::Deflate => 8,
            }],
        ),
        OutEntry::shorts(TAG_PHOTOMETRIC, &[1]),
        OutEntry::shorts(TAG_SAMPLES_PER_PIXEL, &[1]),
        OutEntry::shorts(TAG_PLANAR_CONFIG, &[1]),
        OutEntry::shorts(TAG_SAMPLE_FORMAT, &[format]),
        OutEntry::doubles(TAG_MODEL_PIXEL_SCALE, &[h.geotransform.pixel_size_x, -h.geotransform.pixel_size_y, 0.0]),
        OutEntry::doubles(TAG_MODEL_TIEPOINT, &[0.0, 0.0, 0.0, h.geotransform.origin_x, h.geotransform.origin_y, 0.0]),
    ];
    if opts.predictor == Predictor::Horizontal {
        entries.push(OutEntry::shorts(TAG_PREDICTOR, &[2]));
    }
    let n = chunks.len();
    let (offsets_tag, counts_tag) = match opts.layout {
        Layout::Strips => {
            entries.push(OutEntry::longs(TAG_ROWS_PER_STRIP, &[rows_per_strip.min(height) as u32]));
            (TAG_STRIP_OFFSETS, TAG_STRIP_BYTE_COUNTS)
        }
        Layout::Tiles { width: tw, height: th } => {
            entries.push(OutEntry::longs(TAG_TILE_WIDTH, &[tw]));
            entries.push(OutEntry::longs(TAG_TILE_LENGTH, &[th]));
            (TAG_TILE_OFFSETS, TAG_TILE_BYTE_COUNTS)
        }
    };
    let counts: Vec<u32> = blobs.iter().map(|b| u32::try_from(b.len())).collect::<Result<_, _>>().map_err(|_| too_big())?;
    entries.push(OutEntry::longs(counts_tag, &counts));
    // Placeholder, patched once the data section position is known.
    entries.push(OutEntry::longs(offsets_tag, &vec![0; n]));
    if let Some(raw) = geokeys_for(&h.crs) {
        entries.push(OutEntry::shorts(TAG_GEO_KEY_DIRECTORY, &raw.keys));
        if !raw.doubles.is_empty() {
            entries.push(OutEntry::doubles(TAG_GEO_DOUBLE_PARAMS, &raw.doubles));
        }
        if !raw.ascii.is_empty() {
            entries.push(OutEntry::ascii(TAG_GEO_ASCII_PARAMS, &raw.ascii));
        }
    }
    if let Some(nd) = h.nodata {
        entries.push(OutEntry::ascii(TAG_GDAL_NODATA, format!("{nd}").as_bytes()));
    }
    entries.sort_by_key(|e| e.tag);

    let ifd_pos = 8u64;
    let ifd_len = 2 + 12 * entries.len() as u64 + 4;
    let mut value_pos = Vec::with_capacity(entries.len());
    let mut cursor = ifd_pos + ifd_len;
    for e in &entries {
        if e.data.len() > 4 {
            cursor += cursor % 2;
            value_pos.push(Some(cursor));
            cursor += e.data.len() as u64;
        } else {
            value_pos.push(None);
        }
    }
    cursor += cursor % 2;
    let mut chunk_offsets = Vec::with_capacity(n);
    for b in &blobs {
        chunk_offsets.push(u32::try_from(cursor).map_err(|_| too_big())?);
        cursor += b.len() as u64;
    }
    u32::try_from(cursor).map_err(|_| too_big())?;
    let offsets_entry = entries.iter_mut().find(|e| e.tag == offsets_tag).expect("offsets entry present");
    offsets_entry.data = chunk_offsets.iter().flat_map(|x| x.to_le_bytes()).collect();

    let mut out = Vec::with_capacity(cursor as usize);
    out.extend_from_slice(b"II*\0");
    out.extend_from_slice(&(ifd_pos as u32).to_le_bytes());
    out.extend_from_slice(&(entries.len() as u16).to_le_bytes());
    for (e, vp) in entries.iter().zip(&value_pos) {
        out.extend_from_slice(&e.tag.to_le_bytes());
        out.extend_from_slice(&e.typ.to_le_bytes());
        out.extend_from_slice(&e.count.to_le_bytes());
        match vp {
            Some(p) => out.extend_from_slice(&(*p as u32).to_le_bytes()),
            None => {
                let mut inline = [0u8; 4];
                inline[..e.data.len()].copy_from_slice(&e.data);
                out.extend_from_slice(&inline);
            }
        }
    }
    out.extend_from_slice(&0u32.to_le_bytes());
    for (e, vp) in entries.iter().zip(&value_pos) {
        if let Some(p) = vp {
            out.resize(*p as usize, 0);
            out.extend_from_slice(&e.data);
        }
    }
    for (b, &off) in blobs.iter().zip(&chunk_offsets) {
        out.resize(off as usize, 0);
        out.extend_from_slice(b);
    }
    Ok(out)
}
