#![no_main]
use crossprune::scorer::manifest::ExportManifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(m) = ExportManifest::parse(s) {
            let _ = m.referenced_files();
        }
    }
});
