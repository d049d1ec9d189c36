#![no_main]

use libfuzzer_sys::fuzz_target;
use mlosim_core::metrics::{
    flows_csv, links_csv, meta_csv, parse_flows_csv, parse_links_csv, parse_meta_csv,
};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(f) = parse_flows_csv(text) {
        assert_eq!(parse_flows_csv(&flows_csv(&f)).unwrap(), f);
    }
    if let Ok(l) = parse_links_csv(text) {
        assert_eq!(parse_links_csv(&links_csv(&l)).unwrap(), l);
    }
    if let Ok(m) = parse_meta_csv(text) {
        assert_eq!(parse_meta_csv(&meta_csv(&m)).unwrap(), m);
    }
});
