#![no_main]

use libfuzzer_sys::fuzz_target;
use spectrabench::backend::Fixture;

fuzz_target!(|data: &[u8]| {
    let Ok(json) = std::str::from_utf8(data) else {
        return;
    };
    let _ = Fixture::from_json_str(json);
});
