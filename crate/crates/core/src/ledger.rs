//! In-process model of the `TextStorage` contract.
//!
//! The contract is an append-only list of [`TextEntry`] values. Writes
//! (`save_text`, `transfer_ownership`) are restricted to the owner, reads
//! are open to everyone, and every mutation is recorded in an event log
//! that is sufficient to rebuild the owner and the per-index UID list.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Largest accepted entry text, in bytes.
pub const MAX_TEXT_BYTES: usize = 1024 * 1024;
/// Largest accepted UID, in bytes of UTF-8.
pub const MAX_UID_BYTES: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("caller {caller} is not the contract owner {owner}")]
    Unauthorized { caller: Address, owner: Address },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("index {index} out of range (total {total})")]
    IndexOutOfRange { index: u64, total: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AddressParseError {
    #[error("address must start with 0x")]
    MissingPrefix,
    #[error("address must be 40 hex digits, got {0}")]
    BadLength(usize),
    #[error("address contains non-hex characters")]
    BadHex,
}

/// A 20-byte account identifier, rendered as `0x` + 40 lowercase hex digits.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Address(pub [u8; 20]);

impl Address {
    pub const LEN: usize = 20;

    pub fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Address {
    type Err = AddressParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s
            .strip_prefix("0x")
            .or_else(|| s.strip_prefix("0X"))
            .ok_or(AddressParseError::MissingPrefix)?;
        if digits.len() != 40 {
            return Err(AddressParseError::BadLength(digits.len()));
        }
        let mut out = [0u8; 20];
        hex::decode_to_slice(digits, &mut out).map_err(|_| AddressParseError::BadHex)?;
        Ok(Address(out))
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One stored record: the sealed token and the UID it was saved under.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextEntry {
    pub text: String,
    pub uid: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EventKind {
    TextAdded { index: u64, uid: String },
    OwnershipTransferred { previous_owner: Address, new_owner: Address },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractEvent {
    pub seq: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// The contract's full state. Mutations go through `&mut self`, so the
/// single-writer discipline is the caller's lock.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractState {
    owner: Address,
    entries: Vec<TextEntry>,
    events: Vec<ContractEvent>,
}

impl ContractState {
    pub fn deploy(deployer: Address) -> Self {
        ContractState {
            owner: deployer,
            entries: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn owner(&self) -> Address {
        self.owner
    }

    pub fn entries(&self) -> &[TextEntry] {
        &self.entries
    }

    pub fn events(&self) -> &[ContractEvent] {
        &self.events
    }

    fn only_owner(&self, caller: Address) -> Result<(), LedgerError> {
        if caller != self.owner {
            return Err(LedgerError::Unauthorized {
                caller,
                owner: self.owner,
            });
        }
        Ok(())
    }

    fn emit(&mut self, kind: EventKind) {
        let seq = self.events.len() as u64;
        self.events.push(ContractEvent { seq, kind });
    }

    /// Checks the argument rules of `save_text` without touching state.
    pub fn validate_entry(text: &str, uid: &str) -> Result<(), LedgerError> {
        if text.is_empty() {
            return Err(LedgerError::InvalidInput("text must not be empty".into()));
        }
        if text.len() > MAX_TEXT_BYTES {
            return Err(LedgerError::InvalidInput(format!(
                "text is {} bytes, limit is {MAX_TEXT_BYTES}",
                text.len()
            )));
        }
        if uid.is_empty() {
            return Err(LedgerError::InvalidInput("uid must not be empty".into()));
        }
        if uid.len() > MAX_UID_BYTES {
            return Err(LedgerError::InvalidInput(format!(
                "uid is {} bytes, limit is {MAX_UID_BYTES}",
                uid.len()
            )));
        }
        Ok(())
    }

    /// Appends an entry and returns its 0-based index.
    pub fn save_text(&mut self, caller: Address, text: &str, uid: &str) -> Result<u64, LedgerError> {
        self.only_owner(caller)?;
        Self::validate_entry(text, uid)?;
        let index = self.entries.len() as u64;
        self.entries.push(TextEntry {
            text: text.to_owned(),
            uid: uid.to_owned(),
        });
        self.emit(EventKind::TextAdded {
            index,
            uid: uid.to_owned(),
        });
        Ok(index)
    }

    pub fn get_text(&self, index: u64) -> Result<&TextEntry, LedgerError> {
        usize::try_from(index)
            .ok()
            .and_then(|i| self.entries.get(i))
            .ok_or(LedgerError::IndexOutOfRange {
                index,
                total: self.total_texts(),
            })
    }

    pub fn total_texts(&self) -> u64 {
        self.entries.len() as u64
    }

    pub fn transfer_ownership(&mut self, caller: Address, new_owner: Address) -> Result<(), LedgerError> {
        self.only_owner(caller)?;
        let previous_owner = self.owner;
        self.owner = new_owner;
        self.emit(EventKind::OwnershipTransferred {
            previous_owner,
            new_owner,
        });
        Ok(())
    }
}

/// Owner and per-index UIDs as reconstructed from an event log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayedView {
    pub owner: Address,
    pub uids: Vec<String>,
}

/// Rebuilds the owner and UID list from `deployer` and an event log.
///
/// Fails with `InvalidInput` if the log has sequence gaps, out-of-order
/// indexes, or a transfer whose previous owner does not match.
pub fn replay_events(deployer: Address, events: &[ContractEvent]) -> Result<ReplayedView, LedgerError> {
    let mut view = ReplayedView {
        owner: deployer,
        uids: Vec::new(),
    };
    for (expected_seq, event) in events.iter().enumerate() {
        if event.seq != expected_seq as u64 {
            return Err(LedgerError::InvalidInput(format!(
                "event seq {} where {expected_seq} was expected",
                event.seq
            )));
        }
        match &event.kind {
            EventKind::TextAdded { index, uid } => {
                if *index != view.uids.len() as u64 {
                    return Err(LedgerError::InvalidInput(format!("TextAdded index {index} out of order")));
                }
                view.uids.push(uid.clone());
            }
            EventKind::OwnershipTransferred {
                previous_owner,
                new_owner,
            } => {
                if *previous_owner != view.owner {
                    return Err(LedgerError::InvalidInput("ownership chain broken".into()));
                }
                view.owner = *new_owner;
            }
        }
    }
    Ok(view)
}
