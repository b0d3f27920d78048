#![no_main]

use ledgerseal_core::crypto::{compress, decompress};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(plain) = decompress(data) {
        assert_eq!(decompress(&compress(&plain)).unwrap(), plain);
    }
});
