#![no_main]

use libfuzzer_sys::fuzz_target;
use spectrabench::bench::parse_index_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(entries) = parse_index_csv(data) {
        let mut ids = std::collections::BTreeSet::new();
        for entry in &entries {
            assert!(!entry.sample_id.is_empty());
            assert!(!entry.labels.is_empty());
            assert!(ids.insert(&entry.sample_id), "duplicate id escaped");
        }
    }
});
