#![no_main]

use latentqgan::dataio::idx::{encode_idx_images, parse_idx_images};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(images) = parse_idx_images(data) {
        assert_eq!(parse_idx_images(&encode_idx_images(&images)).unwrap(), images);
    }
});
