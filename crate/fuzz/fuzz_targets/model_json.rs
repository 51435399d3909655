#![no_main]
use libfuzzer_sys::fuzz_target;
use ritescene::classify::TrainedModel;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = TrainedModel::from_json(text) {
        let _ = m.predict(&vec![0.25; m.dim]);
        TrainedModel::from_json(&m.to_json()).expect("serialized model parses");
    }
});
