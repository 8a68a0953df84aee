#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use uwoc_core::scenario::{parse_scenario, ChannelCache};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // photon transport would dominate every run
    if text.contains("mc") {
        return;
    }
    let _ = parse_scenario(text, Path::new("/nonexistent"), &ChannelCache::in_memory());
});
