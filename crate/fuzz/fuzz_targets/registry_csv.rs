#![no_main]

use canopy_core::allometry::ModelRegistry;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = ModelRegistry::parse_csv(text);
});
