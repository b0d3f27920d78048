//! Request logic shared by the HTTP API and the CLI.

use std::collections::HashSet;
use std::sync::Arc;

use ledgerseal_core::chain::{sign_tx, FailureReason};
use ledgerseal_core::crypto::{seal, unseal, CryptoError};
use ledgerseal_core::gas::{ComparisonReport, GasError};
use ledgerseal_core::ledger::{MAX_TEXT_BYTES, MAX_UID_BYTES};
use ledgerseal_core::registry::{check_digest, check_integrity, verify_all, VerifySummary};
use ledgerseal_core::{
    Backend, BackendMode, ChainError, IntegrityVerdict, LedgerError, PricingConfig, Registry, RegistryError,
    RemoteReceiptClient, SealedToken, SimulatedChain, SymmetricKey, Transaction, TxCall, TxHash, TxReceipt,
    TxStatus, WalletKey,
};
use parking_lot::Mutex;
use serde::Serialize;
use tracing::{info, warn};

use crate::config::{fingerprint, ChainStore, ServiceConfig};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("the chain component is detached (LEDGERSEAL_ENABLED=false)")]
    Disabled,
    #[error("{0}")]
    InvalidInput(String),
    #[error("uid {0:?} is already registered")]
    DuplicateUid(String),
    #[error("{0} not found")]
    NotFound(String),
    #[error("transaction {hash} failed: {reason:?}")]
    TxFailed { hash: TxHash, reason: FailureReason },
    #[error("chain unavailable: {0}")]
    ChainUnavailable(String),
    #[error("on-chain token for {0:?} does not decrypt under the configured key")]
    DecryptionFailed(String),
    #[error("contract fingerprint {actual} does not match pinned {pinned}")]
    FingerprintMismatch { actual: String, pinned: String },
    #[error("storage: {0}")]
    Storage(String),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    /// Machine-readable code used in error envelopes.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Disabled => "service_disabled",
            ServiceError::InvalidInput(_) => "invalid_input",
            ServiceError::DuplicateUid(_) => "duplicate_uid",
            ServiceError::NotFound(_) => "not_found",
            ServiceError::TxFailed { .. } => "tx_failed",
            ServiceError::ChainUnavailable(_) => "chain_unavailable",
            ServiceError::DecryptionFailed(_) => "decryption_failed",
            ServiceError::FingerprintMismatch { .. } => "fingerprint_mismatch",
            ServiceError::Storage(_) => "storage_failure",
            ServiceError::Internal(_) => "internal",
        }
    }
}

impl From<ChainError> for ServiceError {
    fn from(e: ChainError) -> Self {
        match e {
            e if e.is_unavailable() => ServiceError::ChainUnavailable(e.to_string()),
            ChainError::InvalidInput(m) => ServiceError::InvalidInput(m),
            ChainError::Contract(LedgerError::InvalidInput(m)) => ServiceError::InvalidInput(m),
            ChainError::Storage(m) => ServiceError::Storage(m),
            other => ServiceError::Internal(other.to_string()),
        }
    }
}

impl From<RegistryError> for ServiceError {
    fn from(e: RegistryError) -> Self {
        match e {
            RegistryError::DuplicateUid(uid) => ServiceError::DuplicateUid(uid),
            RegistryError::NotFound(uid) => ServiceError::NotFound(format!("uid {uid:?}")),
            RegistryError::InvalidInput(m) => ServiceError::InvalidInput(m),
            RegistryError::Storage(m) => ServiceError::Storage(m),
        }
    }
}

impl From<GasError> for ServiceError {
    fn from(e: GasError) -> Self {
        match e {
            GasError::InvalidInput(m) => ServiceError::InvalidInput(m),
            other => ServiceError::Internal(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SaveOutcome {
    pub uid: String,
    pub tx_hash: TxHash,
    pub entry_index: u64,
    pub gas_used: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Review {
    pub uid: String,
    pub text: String,
    pub tx_hash: TxHash,
    pub entry_index: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TxView {
    pub tx_hash: TxHash,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_number: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gas_used: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<FailureReason>,
}

impl From<TxReceipt> for TxView {
    fn from(r: TxReceipt) -> Self {
        let pending = r.status == TxStatus::Pending;
        TxView {
            tx_hash: r.tx_hash,
            status: r.status.as_str(),
            block_number: if pending { None } else { r.block_number },
            gas_used: if pending { None } else { r.gas_used },
            reason: match r.status {
                TxStatus::Failed { reason } => Some(reason),
                _ => None,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Health {
    pub status: &'static str,
    pub enabled: bool,
    pub backend: &'static str,
}

/// Turns plaintext into a token. Swappable so runs can be replayed with
/// fixed timestamps and IVs.
pub type Sealer = Arc<dyn Fn(&[u8], &SymmetricKey) -> Result<SealedToken, CryptoError> + Send + Sync>;

struct Attached {
    key: SymmetricKey,
    sealer: Sealer,
    wallet: WalletKey,
    backend: Arc<dyn Backend>,
    registry: Registry,
    /// Held from nonce lookup until the receipt is final so nonces stay
    /// contiguous under concurrent saves.
    tx_lock: Mutex<()>,
    /// UIDs with a save in flight.
    reserved: Mutex<HashSet<String>>,
}

/// The review service. Cheap to share behind an `Arc`.
pub struct Service {
    mode: BackendMode,
    pricing: PricingConfig,
    attached: Option<Attached>,
}

struct Reservation<'a> {
    set: &'a Mutex<HashSet<String>>,
    uid: String,
}

impl Drop for Reservation<'_> {
    fn drop(&mut self) {
        self.set.lock().remove(&self.uid);
    }
}

fn validate_uid(uid: &str) -> Result<(), ServiceError> {
    if uid.is_empty() || uid.len() > MAX_UID_BYTES {
        return Err(ServiceError::InvalidInput(format!("uid must be 1..={MAX_UID_BYTES} bytes")));
    }
    Ok(())
}

impl Service {
    /// A service with the chain component attached.
    pub fn attached(
        backend: Arc<dyn Backend>,
        registry: Registry,
        key: SymmetricKey,
        wallet: WalletKey,
        pricing: PricingConfig,
    ) -> Self {
        Service {
            mode: backend.mode(),
            pricing,
            attached: Some(Attached {
                key,
                sealer: Arc::new(seal),
                wallet,
                backend,
                registry,
                tx_lock: Mutex::new(()),
                reserved: Mutex::new(HashSet::new()),
            }),
        }
    }

    /// A service whose chain component is switched off. Only health and
    /// gas reports work.
    pub fn detached(mode: BackendMode, pricing: PricingConfig) -> Self {
        Service {
            mode,
            pricing,
            attached: None,
        }
    }

    /// Opens the registry and backend described by `config`, checking the
    /// contract fingerprint against the pin if one is set.
    pub fn from_config(config: &ServiceConfig) -> Result<Self, ServiceError> {
        let pricing = match &config.pricing_path {
            Some(path) => PricingConfig::load(path).map_err(|e| ServiceError::InvalidInput(e.to_string()))?,
            None => PricingConfig::builtin(),
        };
        let creds = match (&config.credentials, config.enabled) {
            (Some(creds), true) => creds,
            _ => return Ok(Service::detached(config.backend.mode, pricing)),
        };
        let backend: Arc<dyn Backend> = match config.backend.mode {
            BackendMode::Simulated => {
                let chain = match &config.chain_store {
                    ChainStore::Memory => SimulatedChain::deploy(&config.backend, &creds.wallet)?,
                    ChainStore::File(path) => SimulatedChain::open(path, &config.backend, &creds.wallet)?,
                };
                if let Some(pinned) = config.contract_address {
                    if pinned != chain.contract_address() {
                        warn!(configured = %pinned, actual = %chain.contract_address(), "simulated contract address differs from LEDGERSEAL_CONTRACT_ADDRESS");
                    }
                }
                Arc::new(chain)
            }
            BackendMode::RemoteReceiptOnly => {
                let url = config.backend.rpc_url.clone().unwrap_or_default();
                let address = config
                    .contract_address
                    .ok_or_else(|| ServiceError::InvalidInput("remote mode needs a contract address".into()))?;
                Arc::new(RemoteReceiptClient::new(url, address))
            }
        };
        let print = fingerprint(backend.contract_address(), creds.wallet.address());
        info!(
            fingerprint = %print,
            contract = %backend.contract_address(),
            owner = %creds.wallet.address(),
            "contract fingerprint"
        );
        if let Some(pinned) = &config.fingerprint_pin {
            if *pinned != print {
                return Err(ServiceError::FingerprintMismatch {
                    actual: print,
                    pinned: pinned.clone(),
                });
            }
        }
        let registry = Registry::open(&config.registry_path)?;
        for anomaly in registry.anomalies() {
            warn!(?anomaly, path = %config.registry_path.display(), "registry anomaly skipped");
        }
        Ok(Service::attached(
            backend,
            registry,
            creds.fernet_key.clone(),
            creds.wallet.clone(),
            pricing,
        ))
    }

    pub fn with_sealer(mut self, sealer: Sealer) -> Self {
        if let Some(a) = &mut self.attached {
            a.sealer = sealer;
        }
        self
    }

    pub fn is_enabled(&self) -> bool {
        self.attached.is_some()
    }

    pub fn mode(&self) -> BackendMode {
        self.mode
    }

    pub fn pricing(&self) -> &PricingConfig {
        &self.pricing
    }

    pub fn health(&self) -> Health {
        Health {
            status: "ok",
            enabled: self.is_enabled(),
            backend: self.mode.as_str(),
        }
    }

    fn attached_or_disabled(&self) -> Result<&Attached, ServiceError> {
        self.attached.as_ref().ok_or(ServiceError::Disabled)
    }

    pub fn backend(&self) -> Option<&Arc<dyn Backend>> {
        self.attached.as_ref().map(|a| &a.backend)
    }

    pub fn registry(&self) -> Option<&Registry> {
        self.attached.as_ref().map(|a| &a.registry)
    }

    /// Seals `text`, writes it to the ledger and records it. Returns only
    /// once the receipt is final and the registry line is on disk.
    pub fn save_review(&self, uid: &str, text: &[u8]) -> Result<SaveOutcome, ServiceError> {
        let a = self.attached_or_disabled()?;
        validate_uid(uid)?;
        if text.is_empty() {
            return Err(ServiceError::InvalidInput("text must not be empty".into()));
        }
        if text.len() > MAX_TEXT_BYTES {
            return Err(ServiceError::InvalidInput(format!("text exceeds {MAX_TEXT_BYTES} bytes")));
        }
        let _reservation = {
            let mut set = a.reserved.lock();
            if a.registry.contains(uid) || !set.insert(uid.to_owned()) {
                return Err(ServiceError::DuplicateUid(uid.to_owned()));
            }
            Reservation {
                set: &a.reserved,
                uid: uid.to_owned(),
            }
        };
        let token = (a.sealer)(text, &a.key).map_err(|e| ServiceError::InvalidInput(e.to_string()))?;
        let call = TxCall::SaveText {
            token: token.into_string(),
            uid: uid.to_owned(),
        };
        let receipt = {
            let _guard = a.tx_lock.lock();
            let sender = a.wallet.address();
            let nonce = a.backend.next_nonce(sender)?;
            let tx = Transaction::build(sender, nonce, call)?;
            let signed = sign_tx(tx, &a.wallet)?;
            let hash = a.backend.submit(&signed)?;
            let mut receipt = a
                .backend
                .receipt(&hash)?
                .ok_or_else(|| ServiceError::Internal(format!("backend lost receipt for {hash}")))?;
            if receipt.status == TxStatus::Pending {
                a.backend.seal_block()?;
                receipt = a
                    .backend
                    .receipt(&hash)?
                    .ok_or_else(|| ServiceError::Internal(format!("backend lost receipt for {hash}")))?;
            }
            receipt
        };
        match receipt.status {
            TxStatus::Success => {}
            TxStatus::Failed { reason } => {
                return Err(ServiceError::TxFailed {
                    hash: receipt.tx_hash,
                    reason,
                })
            }
            TxStatus::Pending => {
                return Err(ServiceError::Internal(format!("{} still pending after sealing", receipt.tx_hash)))
            }
        }
        let entry_index = receipt
            .entry_index()
            .ok_or_else(|| ServiceError::Internal("success receipt without a TextAdded log".into()))?;
        a.registry.record_save(uid, entry_index, receipt.tx_hash, text)?;
        Ok(SaveOutcome {
            uid: uid.to_owned(),
            tx_hash: receipt.tx_hash,
            entry_index,
            gas_used: receipt.gas_used.unwrap_or(0),
        })
    }

    /// Raw plaintext bytes of a saved review.
    pub fn get_review_bytes(&self, uid: &str) -> Result<(Vec<u8>, ledgerseal_core::RegistryRecord), ServiceError> {
        let a = self.attached_or_disabled()?;
        let record = a
            .registry
            .lookup(uid)
            .ok_or_else(|| ServiceError::NotFound(format!("uid {uid:?}")))?;
        let entry = match a.backend.get_text(record.entry_index) {
            Ok(entry) => entry,
            Err(ChainError::Contract(LedgerError::IndexOutOfRange { .. })) => {
                return Err(ServiceError::NotFound(format!("ledger entry {} for {uid:?}", record.entry_index)))
            }
            Err(e) => return Err(e.into()),
        };
        if entry.uid != uid {
            return Err(ServiceError::DecryptionFailed(uid.to_owned()));
        }
        let plain = unseal(&SealedToken::new(entry.text), &a.key).map_err(|_| ServiceError::DecryptionFailed(uid.to_owned()))?;
        Ok((plain, record))
    }

    pub fn get_review(&self, uid: &str) -> Result<Review, ServiceError> {
        let (plain, record) = self.get_review_bytes(uid)?;
        Ok(Review {
            uid: record.uid,
            text: String::from_utf8_lossy(&plain).into_owned(),
            tx_hash: record.tx_hash,
            entry_index: record.entry_index,
        })
    }

    /// Byte comparison when `text` is given, stored-digest comparison
    /// otherwise.
    pub fn verify_review(&self, uid: &str, text: Option<&[u8]>) -> Result<IntegrityVerdict, ServiceError> {
        let a = self.attached_or_disabled()?;
        Ok(match text {
            Some(text) => check_integrity(&a.registry, a.backend.as_ref(), &a.key, uid, text),
            None => check_digest(&a.registry, a.backend.as_ref(), &a.key, uid),
        })
    }

    pub fn verify_all(&self) -> Result<VerifySummary, ServiceError> {
        let a = self.attached_or_disabled()?;
        Ok(verify_all(&a.registry, a.backend.as_ref(), &a.key))
    }

    pub fn transaction(&self, hash: &TxHash) -> Result<TxView, ServiceError> {
        let a = self.attached_or_disabled()?;
        a.backend
            .receipt(hash)?
            .map(TxView::from)
            .ok_or_else(|| ServiceError::NotFound(format!("transaction {hash}")))
    }

    pub fn gas_report(&self, sizes: &[u64]) -> Result<ComparisonReport, ServiceError> {
        Ok(self.pricing.compare(sizes)?)
    }
}

/// Parses a comma-separated list of positive byte sizes.
pub fn parse_sizes(raw: &str) -> Result<Vec<u64>, ServiceError> {
    let sizes = raw
        .split(',')
        .map(|s| match s.trim().parse::<u64>() {
            Ok(0) | Err(_) => Err(ServiceError::InvalidInput(format!(
                "sizes must be positive integers, got {:?}",
                s.trim()
            ))),
            Ok(n) => Ok(n),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(sizes)
}
