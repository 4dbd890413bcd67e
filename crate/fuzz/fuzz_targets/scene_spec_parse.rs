#![no_main]

use libfuzzer_sys::fuzz_target;
use shle::synthetic::{parse_scene_spec, render_scene_spec};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(spec) = parse_scene_spec(text) else {
        return;
    };
    assert_eq!(
        parse_scene_spec(&render_scene_spec(&spec)).expect("rendered spec parses"),
        spec
    );
});
