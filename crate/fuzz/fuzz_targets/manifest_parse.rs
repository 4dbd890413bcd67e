#![no_main]

use libfuzzer_sys::fuzz_target;
use shle::io::{parse_manifest, render_manifest};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(manifest) = parse_manifest(text) else {
        return;
    };
    let rendered = render_manifest(&manifest);
    assert_eq!(
        parse_manifest(&rendered).expect("rendered manifest parses"),
        manifest
    );
});
