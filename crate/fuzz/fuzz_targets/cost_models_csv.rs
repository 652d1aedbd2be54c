#![no_main]

use canopy_core::economics::parse_cost_models;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = parse_cost_models(text);
});
