#![no_main]
use libfuzzer_sys::fuzz_target;
use ritescene::codec::{decode_f64s, encode_f64s};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(values) = decode_f64s(text) {
        let back = decode_f64s(&encode_f64s(&values)).expect("encoded values decode");
        assert_eq!(back.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
});
