#![no_main]

use libfuzzer_sys::fuzz_target;
use mtfs::model_file::Model;

// Large declared shapes allocate up to MAX_ENTRIES coefficients; run with -rss_limit_mb=4096.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = Model::parse(text) {
        let again = Model::parse(&model.to_text().unwrap()).unwrap();
        assert_eq!(again.to_text().unwrap(), model.to_text().unwrap());
    }
});
