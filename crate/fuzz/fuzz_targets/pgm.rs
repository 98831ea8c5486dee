#![no_main]

use libfuzzer_sys::fuzz_target;
use mtfs::gabor::{decode_pgm, encode_pgm};

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = decode_pgm(data) {
        let bytes = encode_pgm(&img).unwrap();
        assert_eq!(decode_pgm(&bytes).unwrap(), img);
        let a = img.to_array();
        assert!(a.iter().all(|v| (0.0..=1.0).contains(v)));
    }
});
