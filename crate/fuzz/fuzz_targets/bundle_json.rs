#![no_main]
use libfuzzer_sys::fuzz_target;
use ritescene::pipeline::TrainedBundle;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(b) = TrainedBundle::from_json(text) {
        let _ = b.feature(&[vec![0.1; ritescene::sift::DESCRIPTOR_LEN]]);
        TrainedBundle::from_json(&b.to_json()).expect("serialized bundle parses");
    }
});
