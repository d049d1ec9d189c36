//! Replays the checked-in fuzz seeds through the same roundtrip checks the
//! fuzz targets make.

use std::fs;
use std::path::{Path, PathBuf};

use mlosim_core::descriptor::{decode_bitmaps, validate_descriptor, TxDescriptor, TxSeries};
use mlosim_core::metrics::{flows_csv, links_csv, meta_csv, parse_flows_csv, parse_links_csv, parse_meta_csv};
use mlosim_core::scenario::parse_scenario;
use mlosim_core::trace::parse_line;

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            let data = fs::read(&p).unwrap();
            (p, data)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn scenario_seeds_parse_and_roundtrip() {
    for (p, data) in seeds("parse_scenario") {
        let s = parse_scenario(std::str::from_utf8(&data).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(parse_scenario(&s.to_toml()).unwrap(), s, "{}", p.display());
    }
}

#[test]
fn descriptor_seeds_classify() {
    for (p, data) in seeds("decode_descriptor") {
        assert_eq!(data.len(), 3, "{}", p.display());
        let word = u16::from_le_bytes([data[0], data[1]]);
        let usage = data[2] & 0xF;
        let maps = decode_bitmaps(word);
        let d = TxDescriptor::new(
            std::array::from_fn(|i| TxSeries::new(maps[i], u8::from(usage & (1 << i) != 0), 0)),
            0,
        );
        let valid = usage != 0 && (0..4).all(|i| usage & (1 << i) == 0 || !maps[i].is_empty());
        assert_eq!(validate_descriptor(&d).is_empty(), valid, "{}", p.display());
        if valid {
            assert_eq!(d.encode(), Ok(word));
        }
    }
}

#[test]
fn trace_seeds_roundtrip() {
    for (p, data) in seeds("parse_trace_line") {
        let text = String::from_utf8(data).unwrap();
        let r = parse_line(text.trim_end()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(r.to_string(), text.trim_end());
    }
}

#[test]
fn report_seeds_roundtrip() {
    for (p, data) in seeds("parse_report_csv") {
        let text = String::from_utf8(data).unwrap();
        let back = match p.file_name().unwrap().to_str().unwrap() {
            "flows.csv" => flows_csv(&parse_flows_csv(&text).unwrap()),
            "links.csv" => links_csv(&parse_links_csv(&text).unwrap()),
            "meta.csv" => meta_csv(&parse_meta_csv(&text).unwrap()),
            other => panic!("unexpected seed {other}"),
        };
        assert_eq!(back, text, "{}", p.display());
    }
}
