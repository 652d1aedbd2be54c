#![no_main]

use std::path::Path;

use canopy_cli::config::Config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(cfg) = Config::parse(text, Some("synth"), Path::new(".")) {
        // The canonical form is a fixed point.
        let again = Config::parse(&cfg.canonical(), None, Path::new(".")).expect("canonical form parses");
        assert_eq!(again.canonical(), cfg.canonical());
    }
});
