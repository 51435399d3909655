#![no_main]
use libfuzzer_sys::fuzz_target;
use ritescene::pipeline::{parse_assignment, PipelineConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = PipelineConfig::from_json(text) {
        assert_eq!(PipelineConfig::from_json(&cfg.to_json()).expect("serialized config parses"), cfg);
    }
    if let Ok((key, value)) = parse_assignment(text) {
        let _ = PipelineConfig::default().set(&key, &value);
    }
});
