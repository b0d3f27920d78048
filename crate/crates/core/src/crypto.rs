//! Seal and unseal: gzip compression followed by a Fernet token.
//!
//! Token layout (before base64url):
//!
//! ```text
//! 0x80 | timestamp (u64 BE) | IV (16) | AES-128-CBC/PKCS#7 ciphertext | HMAC-SHA256 (32)
//! ```
//!
//! The HMAC covers every byte before it and is keyed with the first half
//! of the 32-byte key; the second half is the AES key. Tokens are
//! interchangeable with any other Fernet implementation. Timestamps are
//! carried but never checked against a TTL.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use aes::cipher::{block_padding::Pkcs7, BlockDecryptMut, BlockEncryptMut, KeyIvInit};
use base64::engine::general_purpose::URL_SAFE;
use base64::Engine;
use flate2::{Compression, GzBuilder};
use hmac::{Hmac, Mac};
use rand::rngs::OsRng;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use thiserror::Error;

use crate::ledger::MAX_TEXT_BYTES;

type Aes128CbcEnc = cbc::Encryptor<aes::Aes128>;
type Aes128CbcDec = cbc::Decryptor<aes::Aes128>;
type HmacSha256 = Hmac<Sha256>;

pub const VERSION: u8 = 0x80;
/// Largest plaintext accepted by `seal` or produced by `decompress`.
pub const MAX_MESSAGE_BYTES: usize = MAX_TEXT_BYTES;
pub const GZIP_LEVEL: u32 = 6;
const GZIP_OS_UNKNOWN: u8 = 255;

const HEADER_LEN: usize = 1 + 8 + 16;
const MAC_LEN: usize = 32;
const BLOCK_LEN: usize = 16;
/// Smallest well-formed token: header, one cipher block, MAC.
pub const MIN_TOKEN_BYTES: usize = HEADER_LEN + BLOCK_LEN + MAC_LEN;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("corrupt gzip stream: {0}")]
    CorruptStream(String),
    #[error("token authentication failed")]
    AuthenticationFailed,
    #[error("malformed token: {0}")]
    MalformedToken(&'static str),
    #[error("invalid key: {0}")]
    InvalidKey(&'static str),
    #[error("message is {0} bytes, limit is {MAX_MESSAGE_BYTES}")]
    MessageTooLarge(usize),
    #[error("entropy source unavailable: {0}")]
    EntropyUnavailable(String),
}

/// Gzip member of `message`: level 6, mtime 0, OS byte 255.
pub fn compress(message: &[u8]) -> Vec<u8> {
    let mut encoder = GzBuilder::new()
        .mtime(0)
        .operating_system(GZIP_OS_UNKNOWN)
        .write(Vec::with_capacity(message.len() / 2 + 32), Compression::new(GZIP_LEVEL));
    // Writing into a Vec cannot fail.
    encoder.write_all(message).expect("in-memory gzip write");
    encoder.finish().expect("in-memory gzip finish")
}

/// Inverse of [`compress`]. Accepts exactly one gzip member with no
/// trailing bytes, and refuses output beyond [`MAX_MESSAGE_BYTES`].
pub fn decompress(stream: &[u8]) -> Result<Vec<u8>, CryptoError> {
    let mut decoder = flate2::bufread::GzDecoder::new(stream);
    let mut out = Vec::new();
    (&mut decoder)
        .take(MAX_MESSAGE_BYTES as u64 + 1)
        .read_to_end(&mut out)
        .map_err(|e| CryptoError::CorruptStream(e.to_string()))?;
    if out.len() > MAX_MESSAGE_BYTES {
        return Err(CryptoError::CorruptStream("decompressed size exceeds limit".into()));
    }
    if decoder.header().is_none() {
        return Err(CryptoError::CorruptStream("missing gzip header".into()));
    }
    if !decoder.into_inner().is_empty() {
        return Err(CryptoError::CorruptStream("trailing bytes after gzip member".into()));
    }
    Ok(out)
}

/// 32-byte Fernet key: signing half then encryption half.
#[derive(Clone, PartialEq, Eq)]
pub struct SymmetricKey([u8; 32]);

impl SymmetricKey {
    pub fn from_bytes(raw: [u8; 32]) -> Self {
        SymmetricKey(raw)
    }

    pub fn generate() -> Result<Self, CryptoError> {
        Self::generate_from(&mut OsRng)
    }

    pub fn generate_from<R: RngCore + ?Sized>(rng: &mut R) -> Result<Self, CryptoError> {
        let mut raw = [0u8; 32];
        rng.try_fill_bytes(&mut raw)
            .map_err(|e| CryptoError::EntropyUnavailable(e.to_string()))?;
        Ok(SymmetricKey(raw))
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    fn signing_key(&self) -> &[u8] {
        &self.0[..16]
    }

    fn encryption_key(&self) -> &[u8] {
        &self.0[16..]
    }

    fn mac(&self) -> HmacSha256 {
        HmacSha256::new_from_slice(self.signing_key()).expect("HMAC accepts any key length")
    }
}

impl fmt::Display for SymmetricKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&URL_SAFE.encode(self.0))
    }
}

impl fmt::Debug for SymmetricKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SymmetricKey(..)")
    }
}

impl FromStr for SymmetricKey {
    type Err = CryptoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let raw = URL_SAFE
            .decode(s.trim())
            .map_err(|_| CryptoError::InvalidKey("not base64url"))?;
        let raw: [u8; 32] = raw
            .try_into()
            .map_err(|_| CryptoError::InvalidKey("key must decode to 32 bytes"))?;
        Ok(SymmetricKey(raw))
    }
}

/// A base64url Fernet token.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SealedToken(String);

impl SealedToken {
    /// Wraps a token string without validating it; validation happens on
    /// decryption.
    pub fn new(token: impl Into<String>) -> Self {
        SealedToken(token.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }

    /// Decodes the base64url text and checks the framing (version byte,
    /// minimum length, block alignment). Does not authenticate.
    pub fn decode_frame(&self) -> Result<TokenFrame, CryptoError> {
        let bytes = URL_SAFE
            .decode(self.0.as_bytes())
            .map_err(|_| CryptoError::MalformedToken("invalid base64url"))?;
        TokenFrame::parse(bytes)
    }
}

impl fmt::Display for SealedToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Decoded token bytes with validated framing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenFrame {
    bytes: Vec<u8>,
}

impl TokenFrame {
    pub fn parse(bytes: Vec<u8>) -> Result<Self, CryptoError> {
        if bytes.len() < MIN_TOKEN_BYTES {
            return Err(CryptoError::MalformedToken("token too short"));
        }
        if bytes[0] != VERSION {
            return Err(CryptoError::MalformedToken("unknown version byte"));
        }
        if !(bytes.len() - HEADER_LEN - MAC_LEN).is_multiple_of(BLOCK_LEN) {
            return Err(CryptoError::MalformedToken("ciphertext not block aligned"));
        }
        Ok(TokenFrame { bytes })
    }

    pub fn timestamp(&self) -> u64 {
        u64::from_be_bytes(self.bytes[1..9].try_into().expect("8 bytes"))
    }

    pub fn iv(&self) -> [u8; 16] {
        self.bytes[9..HEADER_LEN].try_into().expect("16 bytes")
    }

    pub fn ciphertext(&self) -> &[u8] {
        &self.bytes[HEADER_LEN..self.bytes.len() - MAC_LEN]
    }

    fn signed_part(&self) -> &[u8] {
        &self.bytes[..self.bytes.len() - MAC_LEN]
    }

    fn mac(&self) -> &[u8] {
        &self.bytes[self.bytes.len() - MAC_LEN..]
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }
}

/// Fernet-encrypts `compressed` with an explicit timestamp and IV.
pub fn encrypt_token(compressed: &[u8], key: &SymmetricKey, timestamp: u64, iv: [u8; 16]) -> SealedToken {
    let ciphertext = Aes128CbcEnc::new(key.encryption_key().into(), &iv.into())
        .encrypt_padded_vec_mut::<Pkcs7>(compressed);

    let mut bytes = Vec::with_capacity(HEADER_LEN + ciphertext.len() + MAC_LEN);
    bytes.push(VERSION);
    bytes.extend_from_slice(&timestamp.to_be_bytes());
    bytes.extend_from_slice(&iv);
    bytes.extend_from_slice(&ciphertext);

    let mut mac = key.mac();
    mac.update(&bytes);
    bytes.extend_from_slice(&mac.finalize().into_bytes());

    SealedToken(URL_SAFE.encode(bytes))
}

/// Authenticates and decrypts a token, returning the embedded bytes.
pub fn decrypt_token(token: &SealedToken, key: &SymmetricKey) -> Result<Vec<u8>, CryptoError> {
    let frame = token.decode_frame()?;
    let mut mac = key.mac();
    mac.update(frame.signed_part());
    mac.verify_slice(frame.mac())
        .map_err(|_| CryptoError::AuthenticationFailed)?;
    Aes128CbcDec::new(key.encryption_key().into(), &frame.iv().into())
        .decrypt_padded_vec_mut::<Pkcs7>(frame.ciphertext())
        .map_err(|_| CryptoError::AuthenticationFailed)
}

/// `seal` with injected timestamp and IV; deterministic.
pub fn seal_with(message: &[u8], key: &SymmetricKey, timestamp: u64, iv: [u8; 16]) -> Result<SealedToken, CryptoError> {
    if message.len() > MAX_MESSAGE_BYTES {
        return Err(CryptoError::MessageTooLarge(message.len()));
    }
    Ok(encrypt_token(&compress(message), key, timestamp, iv))
}

/// Compresses then encrypts under the current time and a fresh random IV.
pub fn seal(message: &[u8], key: &SymmetricKey) -> Result<SealedToken, CryptoError> {
    let mut iv = [0u8; 16];
    OsRng
        .try_fill_bytes(&mut iv)
        .map_err(|e| CryptoError::EntropyUnavailable(e.to_string()))?;
    let now = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    seal_with(message, key, now, iv)
}

pub fn unseal(token: &SealedToken, key: &SymmetricKey) -> Result<Vec<u8>, CryptoError> {
    decompress(&decrypt_token(token, key)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key() -> SymmetricKey {
        SymmetricKey::from_bytes(core::array::from_fn(|i| i as u8))
    }

    #[test]
    fn gzip_header_is_fixed() {
        let c = compress(b"hello");
        assert_eq!(&c[..4], &[0x1f, 0x8b, 0x08, 0x00]);
        assert_eq!(&c[4..8], &[0, 0, 0, 0], "mtime");
        assert_eq!(c[9], 255, "OS byte");
        assert_eq!(c, compress(b"hello"));
    }

    #[test]
    fn empty_and_repetitive() {
        assert_eq!(decompress(&compress(b"")).unwrap(), b"");
        let run = vec![b'a'; 1000];
        let c = compress(&run);
        assert!(c.len() < run.len());
        assert_eq!(decompress(&c).unwrap(), run);
    }

    #[test]
    fn bad_streams() {
        assert!(matches!(decompress(&[0, 0]), Err(CryptoError::CorruptStream(_))));
        assert!(matches!(decompress(&[]), Err(CryptoError::CorruptStream(_))));
        let c = compress(b"some text to compress");
        assert!(decompress(&c[..c.len() - 1]).is_err(), "truncated trailer");
        let mut extra = c.clone();
        extra.push(0);
        assert!(decompress(&extra).is_err(), "trailing garbage");
        let mut bad_crc = c.clone();
        let n = bad_crc.len();
        bad_crc[n - 8] ^= 1;
        assert!(decompress(&bad_crc).is_err());
    }

    #[test]
    fn every_byte_mutation_is_caught() {
        let msg = b"A short review: clear structure, good exercises.";
        let c = compress(msg);
        for pos in 0..c.len() {
            for flip in [0x01u8, 0x80, 0xff] {
                let mut m = c.clone();
                m[pos] ^= flip;
                match decompress(&m) {
                    // Header metadata (mtime, XFL, OS) and some unused
                    // deflate bits may change without affecting content.
                    Ok(out) => assert_eq!(out, msg, "mutation at {pos} (^{flip:#x}) altered payload silently"),
                    Err(CryptoError::CorruptStream(_)) => {}
                    Err(e) => panic!("unexpected error {e}"),
                }
            }
        }
    }

    #[test]
    fn token_layout() {
        let t = encrypt_token(b"abc", &key(), 499_162_800, [7; 16]);
        let frame = t.decode_frame().unwrap();
        assert_eq!(frame.as_bytes()[0], 0x80);
        assert_eq!(frame.timestamp(), 499_162_800);
        assert_eq!(frame.iv(), [7; 16]);
        assert_eq!(frame.ciphertext().len(), 16);
        assert_eq!(frame.as_bytes().len(), MIN_TOKEN_BYTES);
        assert_eq!(t, encrypt_token(b"abc", &key(), 499_162_800, [7; 16]));
    }

    #[test]
    fn wrong_key_and_tamper() {
        let t = seal(b"hello", &key()).unwrap();
        assert_eq!(unseal(&t, &key()).unwrap(), b"hello");
        let other = SymmetricKey::from_bytes([9; 32]);
        assert_eq!(unseal(&t, &other), Err(CryptoError::AuthenticationFailed));

        let mut raw = t.decode_frame().unwrap().as_bytes().to_vec();
        *raw.last_mut().unwrap() ^= 1;
        let flipped = SealedToken::new(URL_SAFE.encode(&raw));
        assert_eq!(unseal(&flipped, &key()), Err(CryptoError::AuthenticationFailed));
    }

    #[test]
    fn malformed_tokens() {
        let t = seal(b"hello", &key()).unwrap();
        let truncated = SealedToken::new(&t.as_str()[..40]);
        assert!(matches!(unseal(&truncated, &key()), Err(CryptoError::MalformedToken(_))));
        assert!(matches!(
            unseal(&SealedToken::new("not base64!"), &key()),
            Err(CryptoError::MalformedToken(_))
        ));
        let mut raw = t.decode_frame().unwrap().as_bytes().to_vec();
        raw[0] = 0x81;
        assert!(matches!(
            unseal(&SealedToken::new(URL_SAFE.encode(&raw)), &key()),
            Err(CryptoError::MalformedToken(_))
        ));
    }

    #[test]
    fn different_ivs() {
        let a = seal_with(b"same", &key(), 1, [1; 16]).unwrap();
        let b = seal_with(b"same", &key(), 1, [2; 16]).unwrap();
        assert_ne!(a, b);
        assert_eq!(unseal(&a, &key()).unwrap(), unseal(&b, &key()).unwrap());
    }

    #[test]
    fn key_encoding() {
        let k = SymmetricKey::generate().unwrap();
        let s = k.to_string();
        assert_eq!(s.len(), 44);
        assert!(s.ends_with('='));
        assert_eq!(s.parse::<SymmetricKey>().unwrap(), k);
        assert_ne!(SymmetricKey::generate().unwrap(), k);
        assert!("c2hvcnQ=".parse::<SymmetricKey>().is_err());
    }

    #[test]
    fn oversize_message_rejected() {
        let big = vec![0u8; MAX_MESSAGE_BYTES + 1];
        assert_eq!(seal(&big, &key()), Err(CryptoError::MessageTooLarge(MAX_MESSAGE_BYTES + 1)));
    }
}
