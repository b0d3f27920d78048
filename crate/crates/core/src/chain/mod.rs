//! Transaction lifecycle: build, sign, submit, receipt.
//!
//! [`SimulatedChain`] runs the contract in-process with explicit block
//! sealing; [`RemoteReceiptClient`] only reads receipts from an external
//! EVM node over JSON-RPC. Both sit behind [`Backend`].

mod remote;
mod sim;
mod tx;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{Address, ContractEvent, LedgerError, TextEntry};

pub use remote::{parse_receipt_response, RemoteReceiptClient};
pub use sim::SimulatedChain;
pub use tx::{
    sign_tx, DecodeError, SignedTransaction, Transaction, TxCall, TxHash, TxHashParseError, WalletKey,
    WalletKeyParseError, SAVE_TEXT_FRAMING, TAG_SAVE_TEXT, TAG_TRANSFER_OWNERSHIP, TX_ENCODING_VERSION,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("nonce mismatch: expected {expected}, got {got}")]
    NonceMismatch { expected: u64, got: u64 },
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("transaction {0} already submitted")]
    DuplicateTransaction(TxHash),
    #[error("signing key does not belong to the sender")]
    SenderKeyMismatch,
    #[error("invalid transaction signature")]
    InvalidSignature,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Contract(#[from] LedgerError),
    #[error("operation not supported by the {0} backend")]
    Unsupported(&'static str),
    #[error("malformed node response: {0}")]
    MalformedResponse(String),
    #[error("chain storage error: {0}")]
    Storage(String),
}

impl ChainError {
    /// Whether the error means the chain could not be reached or read,
    /// as opposed to a rejected request.
    pub fn is_unavailable(&self) -> bool {
        matches!(
            self,
            ChainError::BackendUnavailable(_)
                | ChainError::Unsupported(_)
                | ChainError::MalformedResponse(_)
                | ChainError::Storage(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum FailureReason {
    /// Failure injected by the simulator's `failure_rate`.
    Injected,
    Unauthorized,
    InvalidInput(String),
    /// Status 0 reported by a remote node.
    Reverted,
}

impl From<&LedgerError> for FailureReason {
    fn from(e: &LedgerError) -> Self {
        match e {
            LedgerError::Unauthorized { .. } => FailureReason::Unauthorized,
            other => FailureReason::InvalidInput(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TxStatus {
    Pending,
    Success,
    Failed { reason: FailureReason },
}

impl TxStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            TxStatus::Pending => "pending",
            TxStatus::Success => "success",
            TxStatus::Failed { .. } => "failed",
        }
    }

    pub fn is_final(&self) -> bool {
        !matches!(self, TxStatus::Pending)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxReceipt {
    pub tx_hash: TxHash,
    #[serde(flatten)]
    pub status: TxStatus,
    /// Absent while pending.
    pub block_number: Option<u64>,
    /// Absent while pending.
    pub gas_used: Option<u64>,
    /// Contract events emitted by the transaction; empty unless successful.
    #[serde(default)]
    pub logs: Vec<ContractEvent>,
}

impl TxReceipt {
    /// Ledger index assigned by a successful `SaveText`.
    pub fn entry_index(&self) -> Option<u64> {
        self.logs.iter().find_map(|e| match &e.kind {
            crate::ledger::EventKind::TextAdded { index, .. } => Some(*index),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendMode {
    Simulated,
    RemoteReceiptOnly,
}

impl BackendMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            BackendMode::Simulated => "simulated",
            BackendMode::RemoteReceiptOnly => "remote",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub mode: BackendMode,
    /// Transactions per simulated block.
    pub block_size: u64,
    /// Probability in `[0, 1]` that an accepted transaction fails.
    pub failure_rate: f64,
    /// Seed for failure injection.
    pub failure_seed: u64,
    pub rpc_url: Option<String>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            mode: BackendMode::Simulated,
            block_size: 4,
            failure_rate: 0.0,
            failure_seed: 0,
            rpc_url: None,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), ChainError> {
        if !(0.0..=1.0).contains(&self.failure_rate) {
            return Err(ChainError::InvalidInput(format!(
                "failure_rate must be within [0, 1], got {}",
                self.failure_rate
            )));
        }
        if self.block_size == 0 {
            return Err(ChainError::InvalidInput("block_size must be at least 1".into()));
        }
        if self.mode == BackendMode::RemoteReceiptOnly && self.rpc_url.is_none() {
            return Err(ChainError::InvalidInput("remote mode requires an RPC URL".into()));
        }
        Ok(())
    }
}

/// A chain the service can write to and read from.
///
/// Implementations serialize writers internally; every method takes
/// `&self` so a backend can be shared across request handlers.
pub trait Backend: Send + Sync {
    fn mode(&self) -> BackendMode;

    fn contract_address(&self) -> Address;

    fn owner(&self) -> Result<Address, ChainError>;

    /// Next nonce the backend will accept from `sender`.
    fn next_nonce(&self, sender: Address) -> Result<u64, ChainError>;

    fn submit(&self, signed: &SignedTransaction) -> Result<TxHash, ChainError>;

    /// `Ok(None)` when the hash is unknown.
    fn receipt(&self, hash: &TxHash) -> Result<Option<TxReceipt>, ChainError>;

    /// Seals any pending transactions; returns the chain height (number
    /// of sealed blocks).
    fn seal_block(&self) -> Result<u64, ChainError>;

    fn get_text(&self, index: u64) -> Result<TextEntry, ChainError>;

    fn total_texts(&self) -> Result<u64, ChainError>;
}
