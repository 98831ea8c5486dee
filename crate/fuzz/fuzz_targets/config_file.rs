#![no_main]

use libfuzzer_sys::fuzz_target;
use mtfs_cli::config::ConfigFile;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ConfigFile::parse(text) {
        let _ = cfg.get::<usize>("budget", None);
        let _ = cfg.get::<f64>("lambda", None);
        let _ = cfg.finish();
    }
});
