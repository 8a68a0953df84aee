//! Replays the checked-in fuzz seeds through the same entry points as the
//! fuzz targets.

use std::fs;
use std::path::{Path, PathBuf};

use uwoc_core::ooc::OocCodebook;
use uwoc_core::scenario::{parse_hop_spec, parse_scenario, ChannelCache};
use uwoc_core::transport::parse_impulse_csv;

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let text = String::from_utf8_lossy(&fs::read(&p).unwrap()).into_owned();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn scenario_seeds() {
    let mut accepted = 0;
    for (path, text) in seeds("scenario_toml") {
        if parse_scenario(&text, Path::new("/nonexistent"), &ChannelCache::in_memory()).is_ok() {
            accepted += 1;
        } else {
            assert!(path.ends_with("over_capacity.toml"), "{}", path.display());
        }
    }
    assert!(accepted >= 3);
}

#[test]
fn codebook_seeds() {
    for (path, text) in seeds("codebook_text") {
        match OocCodebook::parse(&text) {
            Ok(book) => assert_eq!(OocCodebook::parse(&book.to_text()).unwrap().codewords, book.codewords),
            Err(e) => assert!(e.is_schema(), "{}: {e}", path.display()),
        }
    }
}

#[test]
fn hop_spec_seeds() {
    for (path, text) in seeds("hop_spec") {
        let ok = parse_hop_spec(&text).is_ok();
        assert_eq!(ok, !path.ends_with("bad_values"), "{}", path.display());
    }
}

#[test]
fn impulse_csv_seeds() {
    for (path, text) in seeds("impulse_csv") {
        let ok = parse_impulse_csv(&text).is_ok();
        assert_eq!(ok, !path.ends_with("no_bin_width"), "{}", path.display());
    }
}
