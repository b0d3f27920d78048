use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::tx::{SignedTransaction, TxCall, TxHash, WalletKey};
use super::{Backend, BackendConfig, BackendMode, ChainError, FailureReason, TxReceipt, TxStatus};
use crate::gas::GasSchedule;
use crate::ledger::{Address, ContractEvent, ContractState, TextEntry};

/// Deterministic in-process chain hosting one `TextStorage` contract.
///
/// Every accepted transaction takes the next slot; slot `s` belongs to
/// block `s / block_size`. A block seals when its last slot is filled or
/// on [`Backend::seal_block`], which also moves the next slot to the
/// start of the following block. Receipts stay `Pending` until their
/// block is sealed.
///
/// The contract call is applied at submission; a failed call (or an
/// injected failure) leaves the contract untouched and yields a `Failed`
/// receipt. Either way the sender's nonce advances.
pub struct SimulatedChain {
    block_size: u64,
    failure_rate: f64,
    failure_seed: u64,
    schedule: GasSchedule,
    keys: RwLock<HashMap<Address, WalletKey>>,
    state: RwLock<SimState>,
    path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SimState {
    contract_address: Address,
    deployer: Address,
    contract: ContractState,
    nonces: BTreeMap<Address, u64>,
    txs: Vec<TxRecord>,
    next_slot: u64,
    /// Number of sealed blocks.
    height: u64,
    #[serde(skip)]
    by_hash: HashMap<TxHash, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TxRecord {
    hash: TxHash,
    slot: u64,
    outcome: TxStatus,
    gas_used: u64,
    logs: Vec<ContractEvent>,
}

fn contract_address_for(deployer: Address) -> Address {
    let mut h = Sha256::new();
    h.update(b"ledgerseal/TextStorage");
    h.update(deployer.as_bytes());
    let digest = h.finalize();
    let mut out = [0u8; 20];
    out.copy_from_slice(&digest[12..]);
    Address(out)
}

impl SimState {
    fn deploy(deployer: Address) -> Self {
        SimState {
            contract_address: contract_address_for(deployer),
            deployer,
            contract: ContractState::deploy(deployer),
            nonces: BTreeMap::new(),
            txs: Vec::new(),
            next_slot: 0,
            height: 0,
            by_hash: HashMap::new(),
        }
    }

    fn reindex(&mut self) {
        self.by_hash = self.txs.iter().enumerate().map(|(i, t)| (t.hash, i)).collect();
    }
}

impl SimulatedChain {
    /// Deploys a fresh in-memory contract owned by `deployer`.
    pub fn deploy(config: &BackendConfig, deployer: &WalletKey) -> Result<Self, ChainError> {
        config.validate()?;
        let chain = SimulatedChain {
            block_size: config.block_size,
            failure_rate: config.failure_rate,
            failure_seed: config.failure_seed,
            schedule: GasSchedule::default(),
            keys: RwLock::new(HashMap::new()),
            state: RwLock::new(SimState::deploy(deployer.address())),
            path: None,
        };
        chain.register_key(deployer);
        Ok(chain)
    }

    /// Like [`SimulatedChain::deploy`], but backed by a JSON snapshot at
    /// `path`: loaded if present, rewritten atomically after every change.
    pub fn open(path: &Path, config: &BackendConfig, deployer: &WalletKey) -> Result<Self, ChainError> {
        let mut chain = Self::deploy(config, deployer)?;
        chain.path = Some(path.to_path_buf());
        match std::fs::read(path) {
            Ok(bytes) => {
                let mut state: SimState =
                    serde_json::from_slice(&bytes).map_err(|e| ChainError::Storage(format!("{}: {e}", path.display())))?;
                if state.deployer != deployer.address() {
                    return Err(ChainError::Storage(format!(
                        "{} was deployed by {}, not {}",
                        path.display(),
                        state.deployer,
                        deployer.address()
                    )));
                }
                state.reindex();
                *chain.state.write() = state;
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                let state = chain.state.read();
                chain.persist(&state)?;
            }
            Err(e) => return Err(ChainError::Storage(e.to_string())),
        }
        Ok(chain)
    }

    pub fn with_schedule(mut self, schedule: GasSchedule) -> Self {
        self.schedule = schedule;
        self
    }

    /// Makes `key` known to the chain so its signatures can be checked.
    pub fn register_key(&self, key: &WalletKey) {
        self.keys.write().insert(key.address(), key.clone());
    }

    pub fn block_size(&self) -> u64 {
        self.block_size
    }

    /// Copy of the contract state.
    pub fn contract(&self) -> ContractState {
        self.state.read().contract.clone()
    }

    /// Serialized chain state; identical across runs of the same schedule.
    pub fn snapshot(&self) -> Vec<u8> {
        serde_json::to_vec(&*self.state.read()).expect("state serializes")
    }

    fn persist(&self, state: &SimState) -> Result<(), ChainError> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let store = |state: &SimState| -> std::io::Result<()> {
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            serde_json::to_writer(&mut tmp, state)?;
            tmp.flush()?;
            tmp.as_file().sync_all()?;
            tmp.persist(path).map_err(|e| e.error)?;
            Ok(())
        };
        store(state).map_err(|e| ChainError::Storage(format!("{}: {e}", path.display())))
    }

    fn injected_failure(&self, hash: &TxHash) -> bool {
        if self.failure_rate <= 0.0 {
            return false;
        }
        let mut h = Sha256::new();
        h.update(self.failure_seed.to_be_bytes());
        h.update(hash.0);
        let draw = u64::from_be_bytes(h.finalize()[..8].try_into().expect("8 bytes"));
        (draw as f64 / 2f64.powi(64)) < self.failure_rate
    }

    fn receipt_of(&self, record: &TxRecord, height: u64) -> TxReceipt {
        let block = record.slot / self.block_size;
        if block < height {
            TxReceipt {
                tx_hash: record.hash,
                status: record.outcome.clone(),
                block_number: Some(block),
                gas_used: Some(record.gas_used),
                logs: record.logs.clone(),
            }
        } else {
            TxReceipt {
                tx_hash: record.hash,
                status: TxStatus::Pending,
                block_number: None,
                gas_used: None,
                logs: Vec::new(),
            }
        }
    }
}

impl Backend for SimulatedChain {
    fn mode(&self) -> BackendMode {
        BackendMode::Simulated
    }

    fn contract_address(&self) -> Address {
        self.state.read().contract_address
    }

    fn owner(&self) -> Result<Address, ChainError> {
        Ok(self.state.read().contract.owner())
    }

    fn next_nonce(&self, sender: Address) -> Result<u64, ChainError> {
        Ok(self.state.read().nonces.get(&sender).copied().unwrap_or(0))
    }

    fn submit(&self, signed: &SignedTransaction) -> Result<TxHash, ChainError> {
        if !signed.hash_is_consistent() {
            return Err(ChainError::InvalidSignature);
        }
        let mut state = self.state.write();
        if state.by_hash.contains_key(&signed.hash) {
            return Err(ChainError::DuplicateTransaction(signed.hash));
        }
        let verified = self
            .keys
            .read()
            .get(&signed.tx.sender)
            .is_some_and(|key| signed.verify(key));
        if !verified {
            return Err(ChainError::InvalidSignature);
        }
        let expected = state.nonces.get(&signed.tx.sender).copied().unwrap_or(0);
        if signed.tx.nonce != expected {
            return Err(ChainError::NonceMismatch {
                expected,
                got: signed.tx.nonce,
            });
        }

        let mut next = state.clone();
        next.nonces.insert(signed.tx.sender, expected + 1);
        let events_before = next.contract.events().len();
        let outcome = if self.injected_failure(&signed.hash) {
            TxStatus::Failed {
                reason: FailureReason::Injected,
            }
        } else {
            let applied = match &signed.tx.call {
                TxCall::SaveText { token, uid } => next.contract.save_text(signed.tx.sender, token, uid).map(|_| ()),
                TxCall::TransferOwnership { new_owner } => next.contract.transfer_ownership(signed.tx.sender, *new_owner),
            };
            match applied {
                Ok(()) => TxStatus::Success,
                Err(e) => TxStatus::Failed { reason: (&e).into() },
            }
        };
        let logs = next.contract.events()[events_before..].to_vec();
        let slot = next.next_slot;
        next.next_slot += 1;
        next.by_hash.insert(signed.hash, next.txs.len());
        next.txs.push(TxRecord {
            hash: signed.hash,
            slot,
            outcome,
            gas_used: self.schedule.estimate_gas(signed.tx.payload_bytes()),
            logs,
        });
        if next.next_slot.is_multiple_of(self.block_size) {
            next.height = next.next_slot / self.block_size;
        }
        self.persist(&next)?;
        *state = next;
        Ok(signed.hash)
    }

    fn receipt(&self, hash: &TxHash) -> Result<Option<TxReceipt>, ChainError> {
        let state = self.state.read();
        Ok(state
            .by_hash
            .get(hash)
            .map(|&i| self.receipt_of(&state.txs[i], state.height)))
    }

    fn seal_block(&self) -> Result<u64, ChainError> {
        let mut state = self.state.write();
        if state.next_slot <= state.height * self.block_size {
            return Ok(state.height);
        }
        let mut next = state.clone();
        next.height = next.next_slot.div_ceil(self.block_size);
        next.next_slot = next.height * self.block_size;
        self.persist(&next)?;
        *state = next;
        Ok(state.height)
    }

    fn get_text(&self, index: u64) -> Result<TextEntry, ChainError> {
        Ok(self.state.read().contract.get_text(index)?.clone())
    }

    fn total_texts(&self) -> Result<u64, ChainError> {
        Ok(self.state.read().contract.total_texts())
    }
}
