#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use mtfs::data::manifest::read_manifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(entries) = read_manifest(data, Path::new("base")) {
        assert!(!entries.is_empty());
    }
});
