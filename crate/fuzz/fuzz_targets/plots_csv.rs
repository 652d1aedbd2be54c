#![no_main]

use canopy_core::spatial::{parse_plots_csv, plots_to_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(plots) = parse_plots_csv(text) {
        let _ = parse_plots_csv(&plots_to_csv(&plots)).expect("own output parses");
    }
});
