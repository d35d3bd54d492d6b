#![no_main]

use libfuzzer_sys::fuzz_target;
use spectrabench::raster::decode_flat_matrix;

// Input layout: sidecar JSON up to the first newline, raw payload after it.
fuzz_target!(|data: &[u8]| {
    let split = data.iter().position(|&b| b == b'\n').unwrap_or(data.len());
    let Ok(sidecar) = std::str::from_utf8(&data[..split]) else {
        return;
    };
    let payload = data.get(split + 1..).unwrap_or(&[]);
    if let Ok((width, height, values)) = decode_flat_matrix(sidecar, payload) {
        assert_eq!(values.len(), width * height);
    }
});
