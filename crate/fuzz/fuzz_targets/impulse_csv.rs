#![no_main]

use libfuzzer_sys::fuzz_target;
use uwoc_core::transport::{channel_loss, parse_impulse_csv};

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(ir) = parse_impulse_csv(&text) {
        let loss = channel_loss(&ir, 1e-8);
        assert!(loss >= 0.0);
    }
});
