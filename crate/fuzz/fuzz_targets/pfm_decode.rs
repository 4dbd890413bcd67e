#![no_main]

use libfuzzer_sys::fuzz_target;
use shle::io::pfm::{decode, decode_header, encode_with};

fuzz_target!(|data: &[u8]| {
    let Ok(image) = decode(data) else { return };
    let (_, _, endian, _) = decode_header(data).expect("header decoded once already");
    let again = decode(&encode_with(&image, endian)).expect("re-encoded image decodes");
    assert_eq!(again.width, image.width);
    assert_eq!(again.height, image.height);
    assert!(again
        .data
        .iter()
        .zip(&image.data)
        .all(|(a, b)| a.to_bits() == b.to_bits()));
});
