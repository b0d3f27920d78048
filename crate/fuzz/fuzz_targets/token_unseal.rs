#![no_main]

use ledgerseal_core::crypto::{decrypt_token, unseal, TokenFrame};
use ledgerseal_core::{SealedToken, SymmetricKey};
use libfuzzer_sys::fuzz_target;

// key of the Python-generated seed tokens
const KEY: &str = "E4Mi9uNA-LNtcp9Uxk2AFmG0I27tyAIsYXCThn5ZAcs=";

fuzz_target!(|data: &[u8]| {
    let _ = TokenFrame::parse(data.to_vec());
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let key: SymmetricKey = KEY.parse().unwrap();
    let token = SealedToken::new(text);
    if let Ok(frame) = token.decode_frame() {
        assert!(frame.as_bytes().len() >= ledgerseal_core::crypto::MIN_TOKEN_BYTES);
    }
    let _ = decrypt_token(&token, &key);
    let _ = unseal(&token, &key);
});
