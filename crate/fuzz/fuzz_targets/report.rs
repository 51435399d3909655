#![no_main]
use libfuzzer_sys::fuzz_target;
use ritescene::evalreport::{ComparisonReport, MetricsReport};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(r) = MetricsReport::parse_csv(text) {
        assert_eq!(MetricsReport::parse_csv(&r.to_csv()).expect("written report parses").to_csv(), r.to_csv());
    }
    if let Ok(r) = MetricsReport::from_json(text) {
        MetricsReport::from_json(&r.to_json()).expect("written report parses");
    }
    if let Ok(r) = ComparisonReport::parse_csv(text) {
        assert_eq!(ComparisonReport::parse_csv(&r.to_csv()).expect("written comparison parses"), r);
    }
    if let Ok(r) = ComparisonReport::from_json(text) {
        ComparisonReport::from_json(&r.to_json()).expect("written comparison parses");
    }
});
