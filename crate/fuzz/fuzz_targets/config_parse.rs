#![no_main]

use std::path::Path;

use fhn_cli::config::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = ExperimentConfig::parse(text) else { return };
    // Resolution may reject the config but must not panic.
    let _ = cfg.resolve(Path::new("."));
    ExperimentConfig::parse(&cfg.to_toml()).expect("serialized config parses back");
});
