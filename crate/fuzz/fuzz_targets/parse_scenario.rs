#![no_main]

use libfuzzer_sys::fuzz_target;
use mlosim_core::scenario::parse_scenario;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = parse_scenario(text) {
        let again = parse_scenario(&s.to_toml()).expect("serialized scenario parses");
        assert_eq!(again, s);
        assert_eq!(again.fingerprint(), s.fingerprint());
    }
});
