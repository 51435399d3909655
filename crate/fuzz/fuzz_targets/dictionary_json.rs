#![no_main]
use libfuzzer_sys::fuzz_target;
use ritescene::encoding::Dictionary;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(d) = Dictionary::from_json(text) {
        let x = vec![0.5; d.dim()];
        let _ = d.encode(&x);
        Dictionary::from_json(&d.to_json()).expect("serialized dictionary parses");
    }
});
