use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{Registry, RegistryRecord};
use crate::chain::{Backend, ChainError};
use crate::crypto::{unseal, SealedToken, SymmetricKey};
use crate::ledger::LedgerError;
use crate::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Verified,
    Mismatch,
    NotFound,
    ChainUnavailable,
}

impl VerdictStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            VerdictStatus::Verified => "verified",
            VerdictStatus::Mismatch => "mismatch",
            VerdictStatus::NotFound => "not_found",
            VerdictStatus::ChainUnavailable => "chain_unavailable",
        }
    }
}

/// Why a `Mismatch` was reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MismatchReason {
    ContentDiffers,
    /// The on-chain token no longer authenticates under the service key.
    DecryptionFailed,
    /// The ledger entry at the recorded index carries another UID.
    UidMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegrityVerdict {
    pub status: VerdictStatus,
    pub uid: String,
    pub on_chain_digest: Option<String>,
    pub local_digest: Option<String>,
    #[serde(with = "super::rfc3339")]
    pub checked_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<MismatchReason>,
}

impl IntegrityVerdict {
    fn new(status: VerdictStatus, uid: &str, local_digest: Option<String>, checked_at: DateTime<Utc>) -> Self {
        IntegrityVerdict {
            status,
            uid: uid.to_owned(),
            on_chain_digest: None,
            local_digest,
            checked_at,
            reason: None,
        }
    }
}

enum OnChain {
    Plaintext(Vec<u8>),
    Verdict(VerdictStatus, Option<MismatchReason>),
}

fn fetch_original(backend: &dyn Backend, key: &SymmetricKey, record: &RegistryRecord) -> OnChain {
    let entry = match backend.get_text(record.entry_index) {
        Ok(entry) => entry,
        Err(ChainError::Contract(LedgerError::IndexOutOfRange { .. })) => {
            return OnChain::Verdict(VerdictStatus::NotFound, None)
        }
        Err(_) => return OnChain::Verdict(VerdictStatus::ChainUnavailable, None),
    };
    if entry.uid != record.uid {
        return OnChain::Verdict(VerdictStatus::Mismatch, Some(MismatchReason::UidMismatch));
    }
    match unseal(&SealedToken::new(entry.text), key) {
        Ok(plain) => OnChain::Plaintext(plain),
        Err(_) => OnChain::Verdict(VerdictStatus::Mismatch, Some(MismatchReason::DecryptionFailed)),
    }
}

fn check_with(
    registry: &Registry,
    backend: &dyn Backend,
    key: &SymmetricKey,
    uid: &str,
    local_digest: impl FnOnce(&RegistryRecord) -> String,
    matches: impl FnOnce(&[u8], &RegistryRecord) -> bool,
    fallback_digest: Option<String>,
) -> IntegrityVerdict {
    let now = registry.now();
    let Some(record) = registry.lookup(uid) else {
        return IntegrityVerdict::new(VerdictStatus::NotFound, uid, fallback_digest, now);
    };
    let local = local_digest(&record);
    match fetch_original(backend, key, &record) {
        OnChain::Verdict(status, reason) => IntegrityVerdict {
            reason,
            ..IntegrityVerdict::new(status, uid, Some(local), now)
        },
        OnChain::Plaintext(plain) => {
            let equal = matches(&plain, &record);
            IntegrityVerdict {
                status: if equal { VerdictStatus::Verified } else { VerdictStatus::Mismatch },
                uid: uid.to_owned(),
                on_chain_digest: Some(sha256_hex(&plain)),
                local_digest: Some(local),
                checked_at: now,
                reason: (!equal).then_some(MismatchReason::ContentDiffers),
            }
        }
    }
}

/// Compares `local_text` byte-for-byte with the decrypted on-chain
/// original of `uid`. Every outcome is a verdict.
pub fn check_integrity(
    registry: &Registry,
    backend: &dyn Backend,
    key: &SymmetricKey,
    uid: &str,
    local_text: &[u8],
) -> IntegrityVerdict {
    let local = sha256_hex(local_text);
    check_with(
        registry,
        backend,
        key,
        uid,
        |_| local.clone(),
        |plain, _| plain == local_text,
        Some(local.clone()),
    )
}

/// Compares the decrypted on-chain original against the digest stored
/// in the registry record.
pub fn check_digest(registry: &Registry, backend: &dyn Backend, key: &SymmetricKey, uid: &str) -> IntegrityVerdict {
    check_with(
        registry,
        backend,
        key,
        uid,
        |record| record.plaintext_digest.clone(),
        |plain, record| sha256_hex(plain) == record.plaintext_digest,
        None,
    )
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifySummary {
    pub total: usize,
    pub verified: usize,
    pub mismatched: usize,
    pub not_found: usize,
    pub unavailable: usize,
    pub verdicts: Vec<IntegrityVerdict>,
}

impl VerifySummary {
    /// No mismatches and nothing missing.
    pub fn is_clean(&self) -> bool {
        self.mismatched == 0 && self.not_found == 0
    }
}

/// Digest-checks every record in a snapshot taken at call time.
pub fn verify_all(registry: &Registry, backend: &dyn Backend, key: &SymmetricKey) -> VerifySummary {
    let mut summary = VerifySummary::default();
    for record in registry.records() {
        let verdict = check_digest(registry, backend, key, &record.uid);
        summary.total += 1;
        match verdict.status {
            VerdictStatus::Verified => summary.verified += 1,
            VerdictStatus::Mismatch => summary.mismatched += 1,
            VerdictStatus::NotFound => summary.not_found += 1,
            VerdictStatus::ChainUnavailable => summary.unavailable += 1,
        }
        summary.verdicts.push(verdict);
    }
    summary
}
