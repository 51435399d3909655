#![no_main]
use libfuzzer_sys::fuzz_target;
use ritescene::sift::{parse_descriptors, write_descriptors};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(records) = parse_descriptors(text) {
        let again = parse_descriptors(&write_descriptors(&records)).expect("written descriptors parse");
        assert_eq!(again.len(), records.len());
    }
});
