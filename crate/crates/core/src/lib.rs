//! Core of the ledgerseal tamper-evidence service.
//!
//! Reviews are sealed (gzip, then a Fernet token), appended to a
//! `TextStorage`-style contract through a transaction backend, and
//! indexed locally so that the local copy can later be checked against
//! the immutable on-chain record.
//!
//! * [`ledger`]: the contract state machine.
//! * [`crypto`]: gzip + Fernet seal/unseal.
//! * [`chain`]: transaction lifecycle over a simulated or remote backend.
//! * [`gas`]: gas estimation and fiat cost comparison.
//! * [`registry`]: the local UID registry and integrity verdicts.

pub mod chain;
pub mod crypto;
pub mod gas;
pub mod ledger;
pub mod registry;

pub use chain::{
    Backend, BackendConfig, BackendMode, ChainError, RemoteReceiptClient, SignedTransaction,
    SimulatedChain, Transaction, TxCall, TxHash, TxReceipt, TxStatus, WalletKey,
};
pub use crypto::{CryptoError, SealedToken, SymmetricKey};
pub use gas::{GasQuote, GasSchedule, NetworkPricing, PricingConfig};
pub use ledger::{Address, ContractEvent, ContractState, LedgerError, TextEntry};
pub use registry::{IntegrityVerdict, Registry, RegistryError, RegistryRecord, VerdictStatus};

use sha2::{Digest, Sha256};

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
