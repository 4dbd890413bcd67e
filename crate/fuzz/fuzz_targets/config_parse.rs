#![no_main]

use libfuzzer_sys::fuzz_target;
use shle::config::{parse_config, render_config};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(config) = parse_config(text) else {
        return;
    };
    assert_eq!(
        parse_config(&render_config(&config)).expect("rendered config parses"),
        config
    );
});
