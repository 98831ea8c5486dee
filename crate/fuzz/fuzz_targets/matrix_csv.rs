#![no_main]

use libfuzzer_sys::fuzz_target;
use mtfs::data::io::{read_csv_matrix, write_csv_matrix};

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = read_csv_matrix(data) {
        let mut out = Vec::new();
        write_csv_matrix(&mut out, &m).unwrap();
        let back = read_csv_matrix(out.as_slice()).unwrap();
        assert_eq!(back.dim(), m.dim());
        for (a, b) in back.iter().zip(m.iter()) {
            assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
    }
});
