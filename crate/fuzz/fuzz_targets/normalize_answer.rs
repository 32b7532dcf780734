#![no_main]
use crossprune::eval::{exact_match, information_coverage, normalize_answer};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let s = String::from_utf8_lossy(data);
    let once = normalize_answer(&s);
    assert_eq!(normalize_answer(&once), once);
    if !once.is_empty() {
        assert_eq!(exact_match(&s, &[s.to_string()]), 1.0);
        assert_eq!(information_coverage(&s, &s), 1.0);
    }
});
