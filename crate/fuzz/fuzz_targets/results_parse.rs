#![no_main]

use libfuzzer_sys::fuzz_target;
use shle::io::results::{parse_results, render_results};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(table) = parse_results(text) else {
        return;
    };
    let rendered = render_results(&table).expect("parsed table renders");
    assert_eq!(
        parse_results(&rendered).expect("rendered table parses"),
        table
    );
});
