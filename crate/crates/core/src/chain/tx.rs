//! Transactions, their canonical byte encoding, and the simulator's
//! HMAC signing scheme.
//!
//! Canonical encoding:
//!
//! ```text
//! 0x01 | sender (20) | nonce (u64 BE) | call tag (1) | fields...
//! ```
//!
//! Each field is a 4-byte big-endian length followed by its bytes.
//! `SaveText` (tag 0x01) carries `token, uid`; `TransferOwnership`
//! (tag 0x02) carries the 20-byte new owner. The call part (tag plus
//! fields) is what gas is charged on.

use std::fmt;
use std::str::FromStr;

use hmac::{Hmac, Mac};
use rand::rngs::OsRng;
use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::ChainError;
use crate::ledger::{Address, ContractState};

pub const TX_ENCODING_VERSION: u8 = 0x01;
pub const TAG_SAVE_TEXT: u8 = 0x01;
pub const TAG_TRANSFER_OWNERSHIP: u8 = 0x02;
const TX_PREFIX_LEN: usize = 1 + Address::LEN + 8;
const FIELD_PREFIX_LEN: usize = 4;
/// Bytes a `SaveText` call adds on top of its token and uid.
pub const SAVE_TEXT_FRAMING: usize = 1 + 2 * FIELD_PREFIX_LEN;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("unexpected end of input")]
    Truncated,
    #[error("unsupported encoding version {0:#04x}")]
    Version(u8),
    #[error("unknown call tag {0:#04x}")]
    UnknownTag(u8),
    #[error("field is not valid UTF-8")]
    Utf8,
    #[error("field has wrong length {0}")]
    FieldLength(usize),
    #[error("{0} trailing bytes")]
    Trailing(usize),
}

/// 32-byte transaction hash, rendered `0x` + 64 lowercase hex digits.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TxHash(pub [u8; 32]);

impl fmt::Display for TxHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl fmt::Debug for TxHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("transaction hash must be 0x followed by 64 hex digits")]
pub struct TxHashParseError;

impl FromStr for TxHash {
    type Err = TxHashParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s.strip_prefix("0x").ok_or(TxHashParseError)?;
        let mut out = [0u8; 32];
        if digits.len() != 64 {
            return Err(TxHashParseError);
        }
        hex::decode_to_slice(digits, &mut out).map_err(|_| TxHashParseError)?;
        Ok(TxHash(out))
    }
}

impl Serialize for TxHash {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TxHash {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Signing key of the interacting wallet. The address is the last 20
/// bytes of SHA-256 of the private key.
#[derive(Clone, PartialEq, Eq)]
pub struct WalletKey {
    private: [u8; 32],
    address: Address,
}

impl WalletKey {
    pub fn from_bytes(private: [u8; 32]) -> Self {
        let digest = Sha256::digest(private);
        let mut address = [0u8; 20];
        address.copy_from_slice(&digest[12..]);
        WalletKey {
            private,
            address: Address(address),
        }
    }

    pub fn generate() -> Result<Self, ChainError> {
        let mut private = [0u8; 32];
        OsRng
            .try_fill_bytes(&mut private)
            .map_err(|e| ChainError::InvalidInput(format!("entropy unavailable: {e}")))?;
        Ok(Self::from_bytes(private))
    }

    pub fn address(&self) -> Address {
        self.address
    }

    /// Hex rendering of the private key (64 digits, no prefix).
    pub fn private_hex(&self) -> String {
        hex::encode(self.private)
    }

    fn mac(&self) -> Hmac<Sha256> {
        Hmac::<Sha256>::new_from_slice(&self.private).expect("HMAC accepts any key length")
    }
}

impl fmt::Debug for WalletKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WalletKey").field("address", &self.address).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("private key must be 64 hex digits")]
pub struct WalletKeyParseError;

impl FromStr for WalletKey {
    type Err = WalletKeyParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let digits = s.strip_prefix("0x").unwrap_or(s);
        let mut private = [0u8; 32];
        if digits.len() != 64 {
            return Err(WalletKeyParseError);
        }
        hex::decode_to_slice(digits, &mut private).map_err(|_| WalletKeyParseError)?;
        Ok(WalletKey::from_bytes(private))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "call")]
pub enum TxCall {
    SaveText { token: String, uid: String },
    TransferOwnership { new_owner: Address },
}

impl TxCall {
    fn tag(&self) -> u8 {
        match self {
            TxCall::SaveText { .. } => TAG_SAVE_TEXT,
            TxCall::TransferOwnership { .. } => TAG_TRANSFER_OWNERSHIP,
        }
    }

    fn encode_into(&self, out: &mut Vec<u8>) {
        fn field(out: &mut Vec<u8>, bytes: &[u8]) {
            out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
            out.extend_from_slice(bytes);
        }
        out.push(self.tag());
        match self {
            TxCall::SaveText { token, uid } => {
                field(out, token.as_bytes());
                field(out, uid.as_bytes());
            }
            TxCall::TransferOwnership { new_owner } => field(out, new_owner.as_bytes()),
        }
    }

    /// Tag and length-prefixed fields; the calldata gas is charged on.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_into(&mut out);
        out
    }

    pub fn encoded_len(&self) -> usize {
        1 + match self {
            TxCall::SaveText { token, uid } => 2 * FIELD_PREFIX_LEN + token.len() + uid.len(),
            TxCall::TransferOwnership { .. } => FIELD_PREFIX_LEN + Address::LEN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub sender: Address,
    pub nonce: u64,
    #[serde(flatten)]
    pub call: TxCall,
}

impl Transaction {
    /// Builds a transaction, applying the contract's argument rules to the call.
    pub fn build(sender: Address, nonce: u64, call: TxCall) -> Result<Self, ChainError> {
        if let TxCall::SaveText { token, uid } = &call {
            ContractState::validate_entry(token, uid).map_err(|e| ChainError::InvalidInput(e.to_string()))?;
        }
        Ok(Transaction { sender, nonce, call })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(TX_PREFIX_LEN + self.call.encoded_len());
        out.push(TX_ENCODING_VERSION);
        out.extend_from_slice(self.sender.as_bytes());
        out.extend_from_slice(&self.nonce.to_be_bytes());
        self.call.encode_into(&mut out);
        out
    }

    /// Strict inverse of [`Transaction::encode`]: no trailing bytes,
    /// UTF-8 string fields, exact address length.
    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader(bytes);
        let version = r.byte()?;
        if version != TX_ENCODING_VERSION {
            return Err(DecodeError::Version(version));
        }
        let sender = Address(r.array()?);
        let nonce = u64::from_be_bytes(r.array()?);
        let call = match r.byte()? {
            TAG_SAVE_TEXT => {
                let token = r.string()?;
                let uid = r.string()?;
                TxCall::SaveText { token, uid }
            }
            TAG_TRANSFER_OWNERSHIP => {
                let raw = r.field()?;
                let new_owner = Address(raw.try_into().map_err(|_| DecodeError::FieldLength(raw.len()))?);
                TxCall::TransferOwnership { new_owner }
            }
            other => return Err(DecodeError::UnknownTag(other)),
        };
        if !r.0.is_empty() {
            return Err(DecodeError::Trailing(r.0.len()));
        }
        Ok(Transaction { sender, nonce, call })
    }

    /// Length of the call encoding, the byte count gas is charged on.
    pub fn payload_bytes(&self) -> u64 {
        self.call.encoded_len() as u64
    }
}

struct Reader<'a>(&'a [u8]);

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.0.len() < n {
            return Err(DecodeError::Truncated);
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }

    fn byte(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        Ok(self.take(N)?.try_into().expect("exact length"))
    }

    fn field(&mut self) -> Result<&'a [u8], DecodeError> {
        let len = u32::from_be_bytes(self.array()?) as usize;
        self.take(len)
    }

    fn string(&mut self) -> Result<String, DecodeError> {
        std::str::from_utf8(self.field()?)
            .map(str::to_owned)
            .map_err(|_| DecodeError::Utf8)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedTransaction {
    pub tx: Transaction,
    #[serde(with = "hex32")]
    pub signature: [u8; 32],
    pub hash: TxHash,
}

fn tx_hash(encoded: &[u8], signature: &[u8; 32]) -> TxHash {
    let mut h = Sha256::new();
    h.update(encoded);
    h.update(signature);
    TxHash(h.finalize().into())
}

/// Signs `tx` with `key`. The key must belong to the sender.
pub fn sign_tx(tx: Transaction, key: &WalletKey) -> Result<SignedTransaction, ChainError> {
    if key.address() != tx.sender {
        return Err(ChainError::SenderKeyMismatch);
    }
    let encoded = tx.encode();
    let mut mac = key.mac();
    mac.update(&encoded);
    let signature: [u8; 32] = mac.finalize().into_bytes().into();
    let hash = tx_hash(&encoded, &signature);
    Ok(SignedTransaction { tx, signature, hash })
}

impl SignedTransaction {
    /// True when `hash` is consistent with the transaction and signature.
    pub fn hash_is_consistent(&self) -> bool {
        tx_hash(&self.tx.encode(), &self.signature) == self.hash
    }

    /// Recomputes both signature and hash under `key`.
    pub fn verify(&self, key: &WalletKey) -> bool {
        if key.address() != self.tx.sender {
            return false;
        }
        let encoded = self.tx.encode();
        let mut mac = key.mac();
        mac.update(&encoded);
        mac.verify_slice(&self.signature).is_ok() && tx_hash(&encoded, &self.signature) == self.hash
    }
}

mod hex32 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let s = String::deserialize(d)?;
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out).map_err(serde::de::Error::custom)?;
        Ok(out)
    }
}
