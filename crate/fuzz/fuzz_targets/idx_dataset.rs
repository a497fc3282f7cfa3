#![no_main]

use latentqgan::dataio::idx::dataset_from_idx;
use libfuzzer_sys::fuzz_target;

// First byte picks where the input splits into an image file and a label file.
fuzz_target!(|data: &[u8]| {
    let Some((&cut, rest)) = data.split_first() else {
        return;
    };
    let cut = (cut as usize * rest.len() / 255).min(rest.len());
    let (images, labels) = rest.split_at(cut);
    if let Ok(ds) = dataset_from_idx(images, labels) {
        assert!(ds.labels().iter().all(|&l| l <= 9));
        assert!(ds.images().flatten().all(|p| (0.0..=1.0).contains(p)));
    }
});
