#![no_main]

use libfuzzer_sys::fuzz_target;
use mlosim_core::trace::{parse_line, parse_trace};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(r) = parse_line(text) {
        let line = r.to_string();
        assert_eq!(parse_line(&line).expect("written line parses"), r);
    }
    let _ = parse_trace(text);
});
