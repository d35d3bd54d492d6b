#![no_main]

use libfuzzer_sys::fuzz_target;
use spectrabench::raster::parse_manifest_json;

fuzz_target!(|data: &[u8]| {
    let Ok(json) = std::str::from_utf8(data) else {
        return;
    };
    // Must reject or accept without panicking; accepted manifests carry
    // only valid band codes and no duplicates.
    if let Ok(manifest) = parse_manifest_json(json) {
        let mut seen = std::collections::BTreeSet::new();
        for (band, _) in &manifest.bands {
            assert!(seen.insert(*band), "duplicate band escaped validation");
        }
    }
});
