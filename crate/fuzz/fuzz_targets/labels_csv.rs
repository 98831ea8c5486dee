#![no_main]

use libfuzzer_sys::fuzz_target;
use mtfs::data::io::{read_labels, write_labels};

fuzz_target!(|data: &[u8]| {
    if let Ok(labels) = read_labels(data) {
        let mut out = Vec::new();
        write_labels(&mut out, &labels).unwrap();
        assert_eq!(read_labels(out.as_slice()).unwrap(), labels);
    }
});
