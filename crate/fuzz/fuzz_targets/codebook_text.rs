#![no_main]

use libfuzzer_sys::fuzz_target;
use uwoc_core::ooc::{validate_codebook, OocCodebook};

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(book) = OocCodebook::parse(&text) {
        if book.params.length() <= 4096 {
            let _ = validate_codebook(&book);
        }
        let again = OocCodebook::parse(&book.to_text()).expect("serialised codebook parses");
        assert_eq!(again.codewords, book.codewords);
    }
});
