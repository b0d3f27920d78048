#![no_main]

use ledgerseal_core::Transaction;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(tx) = Transaction::decode(data) {
        // the encoding is canonical
        assert_eq!(tx.encode(), data);
    }
});
