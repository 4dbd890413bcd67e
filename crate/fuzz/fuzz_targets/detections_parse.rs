#![no_main]

use libfuzzer_sys::fuzz_target;
use shle::io::{parse_detections, render_detections};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(frames) = parse_detections(text) else {
        return;
    };
    let rendered = render_detections(&frames);
    assert_eq!(
        parse_detections(&rendered).expect("rendered detections parse"),
        frames
    );
});
