#![no_main]

use ledgerseal_core::{Address, SymmetricKey, TxHash, WalletKey};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(a) = text.parse::<Address>() {
        assert_eq!(a.to_string().parse::<Address>().unwrap(), a);
    }
    if let Ok(h) = text.parse::<TxHash>() {
        assert_eq!(h.to_string().parse::<TxHash>().unwrap(), h);
    }
    if let Ok(k) = text.parse::<SymmetricKey>() {
        assert_eq!(k.to_string().parse::<SymmetricKey>().unwrap().as_bytes(), k.as_bytes());
    }
    if let Ok(w) = text.parse::<WalletKey>() {
        assert_eq!(w.private_hex().parse::<WalletKey>().unwrap().address(), w.address());
    }
});
