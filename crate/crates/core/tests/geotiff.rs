use std::path::PathBuf;

use canopy_core::raster::{
    read_geotiff, read_geotiff_band, write_geotiff, write_geotiff_with, Compression, GeoTransform, Grid, Layout,
    Predictor, RasterError, RasterHeader, SampleType, Samples, WriteOptions,
};

fn fixture(name: &str) -> (Vec<u8>, Vec<u8>) {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let tif = std::fs::read(dir.join(format!("{name}.tif"))).unwrap();
    let raw = std::fs::read(dir.join(format!("{name}.raw"))).unwrap();
    (tif, raw)
}

fn utm_geotransform() -> GeoTransform {
    GeoTransform::north_up(300000.0, 8800000.0, 0.25)
}

#[test]
fn float_strips_with_deflate_and_nodata() {
    let (tif, raw) = fixture("f32_deflate_strips");
    let g = read_geotiff(&tif).unwrap();
    assert_eq!((g.width(), g.height()), (37, 40));
    assert_eq!(g.header().sample_type, SampleType::Float32);
    assert_eq!(g.header().layout, Layout::Strips);
    assert_eq!(g.nodata(), Some(-9999.0));
    assert_eq!(*g.geotransform(), utm_geotransform());
    assert_eq!(g.samples().to_le_bytes(), raw);
    assert_eq!(g.value_at(4, 3), None);
}

#[test]
fn integer_predictor_tiles_match_trusted_writer() {
    let (tif, raw) = fixture("u16_deflate_pred2_tiles");
    let g = read_geotiff(&tif).unwrap();
    assert_eq!(g.header().layout, Layout::Tiles { width: 48, height: 32 });
    assert_eq!(g.samples().to_le_bytes(), raw);
}

#[test]
fn float_predictor_decodes_bit_exactly() {
    let (tif, raw) = fixture("f32_deflate_pred2");
    let g = read_geotiff(&tif).unwrap();
    assert_eq!((g.width(), g.height()), (23, 9));
    assert_eq!(g.samples().to_le_bytes(), raw);
}

#[test]
fn big_endian_tiles() {
    let (tif, raw) = fixture("u8_bigendian_tiles");
    assert_eq!(&tif[..2], b"MM");
    let g = read_geotiff(&tif).unwrap();
    assert_eq!(g.samples().to_le_bytes(), raw);
    assert_eq!(*g.geotransform(), utm_geotransform());
}

#[test]
fn four_band_image_is_read_per_band() {
    let (tif, raw) = fixture("rgbn_band2");
    assert!(matches!(read_geotiff(&tif), Err(RasterError::UnsupportedFeature { .. })));
    let g = read_geotiff_band(&tif, 2).unwrap();
    assert_eq!(g.samples().to_le_bytes(), raw);
}

#[test]
fn every_truncation_is_an_error_not_a_panic() {
    let (tif, _) = fixture("u16_deflate_pred2_tiles");
    for cut in 0..tif.len() {
        if let Err(e) = read_geotiff(&tif[..cut]) {
            assert!(e.offset().is_some_and(|o| o <= tif.len() as u64), "{e}");
        } else {
            panic!("truncated file of {cut} bytes decoded");
        }
    }
}

/// The independent `tiff` decoder must agree with our writer.
fn decode_with_tiff_crate(bytes: &[u8]) -> tiff::decoder::DecodingResult {
    let mut dec = tiff::decoder::Decoder::new(std::io::Cursor::new(bytes)).unwrap();
    dec.read_image().unwrap()
}

#[test]
fn writer_output_is_readable_by_tiff_crate() {
    let (w, h) = (300, 257);
    let f: Vec<f32> = (0..w * h).map(|i| (i as f32).sin() * 40.0).collect();
    let header = RasterHeader::new(w, h, SampleType::Float32, utm_geotransform()).with_crs("EPSG:32718");
    let g = Grid::new(header, Samples::Float32(f.clone())).unwrap();
    match decode_with_tiff_crate(&write_geotiff(&g).unwrap()) {
        tiff::decoder::DecodingResult::F32(v) => assert_eq!(v.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), f.iter().map(|x| x.to_bits()).collect::<Vec<_>>()),
        _ => panic!("wrong sample type"),
    }

    let u: Vec<u16> = (0..w * h).map(|i| (i * 37 % 65521) as u16).collect();
    let header = RasterHeader::new(w, h, SampleType::UInt16, utm_geotransform());
    let g = Grid::new(header, Samples::UInt16(u.clone())).unwrap();
    for layout in [Layout::Strips, Layout::Tiles { width: 64, height: 16 }] {
        let opts = WriteOptions { layout, compression: Compression::Deflate, predictor: Predictor::Horizontal };
        match decode_with_tiff_crate(&write_geotiff_with(&g, &opts).unwrap()) {
            tiff::decoder::DecodingResult::U16(v) => assert_eq!(v, u),
            _ => panic!("wrong sample type"),
        }
    }
}
