#![no_main]
use crossprune::llm::extract_text;
use libfuzzer_sys::fuzz_target;

// First line is the dot path, the rest the response body.
fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let (path, body) = s.split_once('\n').unwrap_or(("text", s));
    if let Ok(v) = serde_json::from_str::<serde_json::Value>(body) {
        let _ = extract_text(&v, path);
    }
});
