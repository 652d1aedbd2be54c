#![no_main]

use canopy_core::species::{parse_species_csv, species_to_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(table) = parse_species_csv(text) {
        let _ = parse_species_csv(&species_to_csv(&table)).expect("own output parses");
    }
});
