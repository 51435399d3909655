#![no_main]
use libfuzzer_sys::fuzz_target;
use ritescene::imaging::{decode_pgm, encode_pgm};

fuzz_target!(|data: &[u8]| {
    if let Ok(frame) = decode_pgm(data) {
        let bytes = encode_pgm(&frame).expect("decoded frame re-encodes");
        assert_eq!(decode_pgm(&bytes).expect("re-encoded frame decodes"), frame);
    }
});
