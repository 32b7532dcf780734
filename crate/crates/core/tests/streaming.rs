//! Memory use of the JSONL reader must not grow with file length. This binary
//! holds a single test so the allocation counter sees only its own work.

use std::alloc::{GlobalAlloc, Layout, System};
use std::io::{BufWriter, Write};
use std::sync::atomic::{AtomicUsize, Ordering};

use crossprune::dataset::{load_jsonl, FieldMap};

struct Counting;

static LIVE: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = unsafe { System.alloc(layout) };
        if !p.is_null() {
            let now = LIVE.fetch_add(layout.size(), Ordering::Relaxed) + layout.size();
            PEAK.fetch_max(now, Ordering::Relaxed);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) };
        LIVE.fetch_sub(layout.size(), Ordering::Relaxed);
    }
}

#[global_allocator]
static ALLOC: Counting = Counting;

const LINES: usize = 100_000;

#[test]
fn hundred_thousand_lines_stream_in_bounded_memory() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.jsonl");
    {
        let mut w = BufWriter::new(std::fs::File::create(&path).unwrap());
        for i in 0..LINES {
            if i % 25_000 == 7 {
                writeln!(w, "{{\"id\": \"{i}\", \"question\": \"no context\"}}").unwrap();
            } else {
                writeln!(
                    w,
                    "{{\"id\":\"{i}\",\"context\":\"record {i} tells of a lantern hidden in a barn near the mill\",\"question\":\"Where is the lantern?\",\"answers\":[\"in a barn\"]}}"
                )
                .unwrap();
            }
        }
    }
    let file_len = std::fs::metadata(&path).unwrap().len() as usize;

    let mut stream = load_jsonl(&path, FieldMap::default(), false).unwrap();
    let baseline = LIVE.load(Ordering::Relaxed);
    PEAK.store(baseline, Ordering::Relaxed);
    let mut count = 0usize;
    let mut context_bytes = 0usize;
    for r in stream.by_ref() {
        let r = r.unwrap();
        context_bytes += r.context.len();
        count += 1;
    }
    let growth = PEAK.load(Ordering::Relaxed) - baseline;

    assert_eq!(count, LINES - 4);
    assert_eq!(stream.rejected().len(), 4);
    assert_eq!(stream.rejected()[0].line, 8);
    assert!(context_bytes > 5_000_000);
    assert!(
        growth < 64 * 1024,
        "peak live heap grew by {growth} bytes while streaming a {file_len}-byte file"
    );
}
