#![no_main]

use libfuzzer_sys::fuzz_target;
use uwoc_core::scenario::parse_hop_spec;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_hop_spec(text);
    }
});
