#![no_main]

use canopy_core::raster::read_geotiff_band;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&band, bytes)) = data.split_first() else { return };
    let _ = read_geotiff_band(bytes, (band % 8) as usize);
});
