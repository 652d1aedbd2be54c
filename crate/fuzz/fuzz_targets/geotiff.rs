#![no_main]

use canopy_core::raster::{read_geotiff, write_geotiff};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Whatever decodes must re-encode and decode to the same samples.
    if let Ok(g) = read_geotiff(data) {
        let again = read_geotiff(&write_geotiff(&g).expect("decoded grid encodes")).expect("own output decodes");
        assert_eq!(again.samples().to_le_bytes(), g.samples().to_le_bytes());
    }
});
