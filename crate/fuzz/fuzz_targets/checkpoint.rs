#![no_main]

use latentqgan::dataio::Checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(ckpt) = Checkpoint::from_bytes(data) else {
        return;
    };
    let text = ckpt.to_text().unwrap();
    let again = Checkpoint::parse(&text).unwrap();
    assert_eq!(again.to_text().unwrap(), text);
    let _ = ckpt.to_generator();
    let _ = ckpt.to_autoencoder();
    let _ = ckpt.to_discriminator();
});
