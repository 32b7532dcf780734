#![no_main]

use libfuzzer_sys::fuzz_target;

use crossprune::dataset::{FieldMap, RecordStream};

fuzz_target!(|data: &[u8]| {
    let mut stream = RecordStream::from_reader(data, "fuzz.jsonl", FieldMap::default(), false);
    for record in stream.by_ref() {
        let record = record.expect("lenient mode only fails on io");
        assert!(!record.context.trim().is_empty());
        assert!(!record.query.trim().is_empty());
    }
    for r in stream.rejected() {
        assert!(r.line >= 1);
    }
});
