#![no_main]

use canopy_core::raster::{read_internal, write_internal};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(g) = read_internal(data) {
        let again = read_internal(&write_internal(&g)).expect("own output decodes");
        assert_eq!(again.samples().to_le_bytes(), g.samples().to_le_bytes());
    }
});
