#![no_main]
use crossprune::CompressionConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(cfg) = CompressionConfig::from_json(s) {
            let again = CompressionConfig::from_json(&serde_json::to_string(&cfg).unwrap()).expect("roundtrip");
            assert_eq!(cfg, again);
            assert!(cfg.target_count(10) >= 1);
        }
    }
});
