#![no_main]

use libfuzzer_sys::fuzz_target;
use mlosim_core::descriptor::{decode_bitmaps, validate_descriptor, TxDescriptor, TxSeries};

fuzz_target!(|data: [u8; 3]| {
    let word = u16::from_le_bytes([data[0], data[1]]);
    let usage = data[2] & 0xF;
    let maps = decode_bitmaps(word);
    let series = std::array::from_fn(|i| TxSeries::new(maps[i], u8::from(usage & (1 << i) != 0), 0));
    let d = TxDescriptor::new(series, 0);
    let valid = usage != 0 && (0..4).all(|i| usage & (1 << i) == 0 || !maps[i].is_empty());
    assert_eq!(validate_descriptor(&d).is_empty(), valid);
    if valid {
        assert_eq!(d.encode(), Ok(word));
    } else {
        assert!(usage == 0 || d.encode().is_err());
    }
});
