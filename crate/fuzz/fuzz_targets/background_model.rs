#![no_main]
use libfuzzer_sys::fuzz_target;
use ritescene::bgfg::BackgroundModel;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = BackgroundModel::from_json(text) {
        let _ = model.background_image();
        BackgroundModel::from_json(&model.to_json()).expect("serialized model parses");
    }
});
