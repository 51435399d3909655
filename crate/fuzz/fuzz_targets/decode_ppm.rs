#![no_main]
use libfuzzer_sys::fuzz_target;
use ritescene::imaging::{decode_ppm, encode_ppm};

fuzz_target!(|data: &[u8]| {
    if let Ok(frame) = decode_ppm(data) {
        let bytes = encode_ppm(&frame).expect("decoded frame re-encodes");
        assert_eq!(decode_ppm(&bytes).expect("re-encoded frame decodes"), frame);
    }
});
