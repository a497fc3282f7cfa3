#![no_main]

use latentqgan::dataio::pgm::{encode_image_grid, parse_image_grid, parse_pgm};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(g) = parse_pgm(data) {
        assert_eq!(g.pixels.len(), g.width * g.height);
    }
    if let Ok(images) = parse_image_grid(data) {
        let cols = (images.len()).min(1 + data.len() % 10);
        let bytes = encode_image_grid(&images, cols).unwrap();
        assert_eq!(parse_image_grid(&bytes).unwrap(), images);
    }
});
