#![no_main]

use libfuzzer_sys::fuzz_target;
use shle::io::metrics::{parse_metrics, render_metrics};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(report) = parse_metrics(text) else {
        return;
    };
    if let Ok(again) = parse_metrics(&render_metrics(&report)) {
        assert_eq!(again, report);
    }
});
