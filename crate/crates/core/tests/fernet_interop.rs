//! Token compatibility with independent Fernet implementations: the
//! vector published with the Fernet format, vectors frozen from Python's `cryptography`
//! package (see fixtures/gen_fernet_vectors.py), and the `fernet` crate.

use base64::engine::general_purpose::URL_SAFE;
use base64::Engine;
use ledgerseal_core::crypto::{decompress, decrypt_token, encrypt_token, seal, seal_with, unseal, CryptoError};
use ledgerseal_core::{SealedToken, SymmetricKey};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use serde::Deserialize;

const FERNET_DOC_SECRET: &str = "cw_0x689RpI-jtRR7oE8h_eQsKImvJapLeSbXpwF4e4=";
const FERNET_DOC_TOKEN: &str =
    "gAAAAAAdwJ6wAAECAwQFBgcICQoLDA0ODy021cpGVWKZ_eEwCGM4BLLF_5CV9dOPmrhuVUPgJobwOz7JcbmrR64jVmpU4IwqDA==";
// 1985-10-26T01:20:00-07:00
const FERNET_DOC_TIME: u64 = 499_162_800;

#[derive(Deserialize)]
struct VectorFile {
    key: String,
    vectors: Vec<Vector>,
}

#[derive(Deserialize)]
struct Vector {
    plaintext_hex: String,
    timestamp: u64,
    iv_hex: String,
    compressed_hex: String,
    token: String,
}

fn python_vectors() -> VectorFile {
    serde_json::from_str(include_str!("fixtures/fernet_vectors.json")).unwrap()
}

#[test]
fn published_vector_encrypts_bit_exact() {
    let key: SymmetricKey = FERNET_DOC_SECRET.parse().unwrap();
    let iv: [u8; 16] = core::array::from_fn(|i| i as u8);
    let token = encrypt_token(b"hello", &key, FERNET_DOC_TIME, iv);
    assert_eq!(token.as_str(), FERNET_DOC_TOKEN);
    assert_eq!(decrypt_token(&SealedToken::new(FERNET_DOC_TOKEN), &key).unwrap(), b"hello");
}

#[test]
fn python_tokens_are_reproduced_and_unsealed() {
    let file = python_vectors();
    let key: SymmetricKey = file.key.parse().unwrap();
    assert!(file.vectors.len() >= 21);
    for v in &file.vectors {
        let plaintext = hex::decode(&v.plaintext_hex).unwrap();
        let compressed = hex::decode(&v.compressed_hex).unwrap();
        let iv: [u8; 16] = hex::decode(&v.iv_hex).unwrap().try_into().unwrap();
        // same (key, time, iv, payload) gives the identical token
        assert_eq!(encrypt_token(&compressed, &key, v.timestamp, iv).as_str(), v.token);
        // their gzip stream decompresses with ours
        assert_eq!(decompress(&compressed).unwrap(), plaintext);
        assert_eq!(unseal(&SealedToken::new(v.token.clone()), &key).unwrap(), plaintext);
        let frame = SealedToken::new(v.token.clone()).decode_frame().unwrap();
        assert_eq!(frame.timestamp(), v.timestamp);
    }
}

#[test]
fn fernet_crate_reads_our_tokens_and_we_read_theirs() {
    let key = SymmetricKey::generate().unwrap();
    let other = fernet::Fernet::new(&key.to_string()).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut messages: Vec<Vec<u8>> = vec![Vec::new()];
    for i in 0..24 {
        let len = (i * 37) % 700;
        messages.push((0..len).map(|_| rng.gen()).collect());
    }
    for m in &messages {
        let ours = seal(m, &key).unwrap();
        let compressed = other.decrypt(ours.as_str()).unwrap();
        assert_eq!(decompress(&compressed).unwrap(), *m);

        let gz = ledgerseal_core::crypto::compress(m);
        let theirs = other.encrypt(&gz);
        assert_eq!(unseal(&SealedToken::new(theirs), &key).unwrap(), *m);
    }
}

#[test]
fn fernet_crate_rejects_tampered_tokens_like_we_do() {
    let key = SymmetricKey::from_bytes([42; 32]);
    let other = fernet::Fernet::new(&key.to_string()).unwrap();
    let token = seal_with(b"content", &key, 1_724_025_600, [9; 16]).unwrap();
    let mut raw = token.decode_frame().unwrap().as_bytes().to_vec();
    let mid = raw.len() / 2;
    raw[mid] ^= 0x10;
    let bad = URL_SAFE.encode(&raw);
    assert!(other.decrypt(&bad).is_err());
    assert_eq!(unseal(&SealedToken::new(bad), &key), Err(CryptoError::AuthenticationFailed));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interop_both_directions(m in proptest::collection::vec(any::<u8>(), 0..2048), raw_key in any::<[u8; 32]>()) {
        let key = SymmetricKey::from_bytes(raw_key);
        let other = fernet::Fernet::new(&key.to_string()).unwrap();
        let ours = seal(&m, &key).unwrap();
        prop_assert_eq!(decompress(&other.decrypt(ours.as_str()).unwrap()).unwrap(), m.clone());
        let theirs = other.encrypt(&ledgerseal_core::crypto::compress(&m));
        prop_assert_eq!(unseal(&SealedToken::new(theirs), &key).unwrap(), m);
    }
}
