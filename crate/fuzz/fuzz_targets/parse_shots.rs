#![no_main]
use libfuzzer_sys::fuzz_target;
use ritescene::shotseg::{export_shots, parse_shots};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(shots) = parse_shots(text) {
        assert_eq!(parse_shots(&export_shots(&shots)).expect("exported shots parse"), shots);
    }
});
