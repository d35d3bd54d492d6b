#![no_main]

use libfuzzer_sys::fuzz_target;
use spectrabench::bench::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(json) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = RunConfig::from_json_str(json) {
        // Accepted configs satisfy their own validation.
        assert!(config.validate().is_ok());
        assert!(!config.canonical_modalities().is_empty());
    }
});
