//! Local UID registry: an append-only JSON-lines file mapping each review
//! UID to its ledger index, transaction hash and plaintext digest.
//!
//! Each line holds exactly the fields
//! `{"uid","entry_index","tx_hash","plaintext_digest","created_at"}`.
//! Appends are fsynced before `record_save` returns. On open, unparsable
//! lines (a torn final write, say) and repeated UIDs are skipped and
//! reported through [`Registry::anomalies`]; the first record for a UID
//! wins.

mod integrity;

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, SecondsFormat, Utc};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::TxHash;
use crate::ledger::MAX_UID_BYTES;
use crate::sha256_hex;

pub use integrity::{check_digest, check_integrity, verify_all, IntegrityVerdict, MismatchReason, VerdictStatus, VerifySummary};

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("uid {0:?} is already registered")]
    DuplicateUid(String),
    #[error("uid {0:?} is not registered")]
    NotFound(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("registry storage failure: {0}")]
    Storage(String),
}

impl From<std::io::Error> for RegistryError {
    fn from(e: std::io::Error) -> Self {
        RegistryError::Storage(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistryRecord {
    pub uid: String,
    pub entry_index: u64,
    pub tx_hash: TxHash,
    pub plaintext_digest: String,
    #[serde(with = "rfc3339")]
    pub created_at: DateTime<Utc>,
}

impl RegistryRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }

    pub fn from_line(line: &str) -> Result<Self, RegistryError> {
        let record: RegistryRecord =
            serde_json::from_str(line).map_err(|e| RegistryError::InvalidInput(e.to_string()))?;
        if record.uid.is_empty() {
            return Err(RegistryError::InvalidInput("empty uid".into()));
        }
        let digest_ok = record.plaintext_digest.len() == 64
            && record
                .plaintext_digest
                .bytes()
                .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
        if !digest_ok {
            return Err(RegistryError::InvalidInput("plaintext_digest must be 64 lowercase hex digits".into()));
        }
        Ok(record)
    }
}

/// RFC 3339 UTC with `Z` suffix.
pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

mod rfc3339 {
    use chrono::{DateTime, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_timestamp(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&s)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Anomaly {
    Malformed { line: usize, error: String },
    DuplicateUid { line: usize, uid: String },
}

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

#[derive(Default)]
struct Records {
    list: Vec<RegistryRecord>,
    by_uid: HashMap<String, usize>,
}

impl Records {
    fn insert(&mut self, record: RegistryRecord) {
        self.by_uid.insert(record.uid.clone(), self.list.len());
        self.list.push(record);
    }
}

pub struct Registry {
    path: PathBuf,
    records: RwLock<Records>,
    writer: Mutex<File>,
    anomalies: Vec<Anomaly>,
    clock: Clock,
}

impl std::fmt::Debug for Registry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Registry")
            .field("path", &self.path)
            .field("records", &self.len())
            .finish_non_exhaustive()
    }
}

impl Registry {
    /// Opens (creating if needed) the registry file at `path`.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, RegistryError> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(&path)?;
        let mut text = String::new();
        file.read_to_string(&mut text)
            .map_err(|e| RegistryError::Storage(format!("{}: {e}", path.display())))?;

        let (records, anomalies) = parse_lines(&text);
        if !text.is_empty() && !text.ends_with('\n') {
            // terminate a torn final line so the next append starts clean
            file.write_all(b"\n")?;
            file.sync_data()?;
        }
        file.seek(SeekFrom::End(0))?;
        Ok(Registry {
            path,
            records: RwLock::new(records),
            writer: Mutex::new(file),
            anomalies,
            clock: Arc::new(Utc::now),
        })
    }

    /// Replaces the timestamp source used for `created_at` and verdicts.
    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn now(&self) -> DateTime<Utc> {
        (self.clock)()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn anomalies(&self) -> &[Anomaly] {
        &self.anomalies
    }

    pub fn len(&self) -> usize {
        self.records.read().list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, uid: &str) -> bool {
        self.records.read().by_uid.contains_key(uid)
    }

    pub fn lookup(&self, uid: &str) -> Option<RegistryRecord> {
        let records = self.records.read();
        records.by_uid.get(uid).map(|&i| records.list[i].clone())
    }

    /// Snapshot of all records in insertion order.
    pub fn records(&self) -> Vec<RegistryRecord> {
        self.records.read().list.clone()
    }

    /// Appends a record for `uid` and returns it once it is on disk.
    pub fn record_save(
        &self,
        uid: &str,
        entry_index: u64,
        tx_hash: TxHash,
        plaintext: &[u8],
    ) -> Result<RegistryRecord, RegistryError> {
        if uid.is_empty() || uid.len() > MAX_UID_BYTES {
            return Err(RegistryError::InvalidInput(format!(
                "uid must be 1..={MAX_UID_BYTES} bytes"
            )));
        }
        let record = RegistryRecord {
            uid: uid.to_owned(),
            entry_index,
            tx_hash,
            plaintext_digest: sha256_hex(plaintext),
            created_at: self.now(),
        };
        let mut writer = self.writer.lock();
        if self.contains(uid) {
            return Err(RegistryError::DuplicateUid(uid.to_owned()));
        }
        let mut line = record.to_line();
        line.push('\n');
        writer
            .write_all(line.as_bytes())
            .and_then(|()| writer.sync_data())
            .map_err(|e| RegistryError::Storage(format!("{}: {e}", self.path.display())))?;
        self.records.write().insert(record.clone());
        Ok(record)
    }
}

fn parse_lines(text: &str) -> (Records, Vec<Anomaly>) {
    let mut records = Records::default();
    let mut anomalies = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match RegistryRecord::from_line(line) {
            Ok(record) if records.by_uid.contains_key(&record.uid) => anomalies.push(Anomaly::DuplicateUid {
                line: i + 1,
                uid: record.uid,
            }),
            Ok(record) => records.insert(record),
            Err(e) => anomalies.push(Anomaly::Malformed {
                line: i + 1,
                error: e.to_string(),
            }),
        }
    }
    (records, anomalies)
}

/// Parses registry file contents, returning the accepted records and
/// the anomalies found.
pub fn parse_registry(text: &str) -> (Vec<RegistryRecord>, Vec<Anomaly>) {
    let (records, anomalies) = parse_lines(text);
    (records.list, anomalies)
}

/// Rewrites the stored digest for `uid` in the file at `path`.
///
/// This deliberately breaks the append-only rule to simulate someone
/// editing the local database; it exists for tamper demonstrations and
/// tests. Open [`Registry`] handles do not see the change until reopened.
pub fn tamper_digest(path: &Path, uid: &str) -> Result<RegistryRecord, RegistryError> {
    let text = std::fs::read_to_string(path)?;
    let mut tampered = None;
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        match RegistryRecord::from_line(line) {
            Ok(mut record) if record.uid == uid && tampered.is_none() => {
                let mut digest = record.plaintext_digest.into_bytes();
                digest[0] = if digest[0] == b'0' { b'1' } else { b'0' };
                record.plaintext_digest = String::from_utf8(digest).expect("hex is ascii");
                out.push_str(&record.to_line());
                tampered = Some(record);
            }
            _ => out.push_str(line),
        }
        out.push('\n');
    }
    let record = tampered.ok_or_else(|| RegistryError::NotFound(uid.to_owned()))?;
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(out.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| RegistryError::Storage(e.to_string()))?;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn fixed_clock() -> Clock {
        Arc::new(|| Utc.with_ymd_and_hms(2024, 8, 19, 12, 0, 0).unwrap())
    }

    #[test]
    fn save_lookup_duplicate() {
        let dir = tempfile::tempdir().unwrap();
        let reg = Registry::open(dir.path().join("r.jsonl")).unwrap();
        assert!(reg.lookup("u1").is_none());
        let rec = reg.record_save("u1", 0, TxHash([1; 32]), b"text").unwrap();
        assert_eq!(reg.lookup("u1"), Some(rec.clone()));
        assert_eq!(rec.plaintext_digest, sha256_hex(b"text"));
        assert!(matches!(reg.record_save("u1", 1, TxHash([2; 32]), b"x"), Err(RegistryError::DuplicateUid(_))));
        assert!(matches!(reg.record_save("", 1, TxHash([2; 32]), b"x"), Err(RegistryError::InvalidInput(_))));
        assert_eq!(reg.len(), 1);
    }

    #[test]
    fn line_format_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let reg = Registry::open(&path).unwrap().with_clock(fixed_clock());
        reg.record_save("u1", 3, TxHash([0xab; 32]), b"hello").unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let expected = format!(
            "{{\"uid\":\"u1\",\"entry_index\":3,\"tx_hash\":\"0x{}\",\"plaintext_digest\":\"{}\",\"created_at\":\"2024-08-19T12:00:00Z\"}}\n",
            "ab".repeat(32),
            sha256_hex(b"hello")
        );
        assert_eq!(text, expected);
    }

    #[test]
    fn reopen_keeps_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/r.jsonl");
        let saved: Vec<RegistryRecord> = {
            let reg = Registry::open(&path).unwrap();
            (0..20)
                .map(|i| reg.record_save(&format!("u{i}"), i, TxHash([i as u8; 32]), b"t").unwrap())
                .collect()
        };
        let reg = Registry::open(&path).unwrap();
        assert_eq!(reg.records(), saved);
        assert!(reg.anomalies().is_empty());
    }

    #[test]
    fn torn_tail_and_duplicates_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        {
            let reg = Registry::open(&path).unwrap();
            reg.record_save("a", 0, TxHash([1; 32]), b"1").unwrap();
        }
        let line = std::fs::read_to_string(&path).unwrap();
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(line.as_bytes()).unwrap();
        f.write_all(b"{\"uid\":\"b\",\"entry_").unwrap();
        drop(f);

        let reg = Registry::open(&path).unwrap();
        assert_eq!(reg.len(), 1);
        assert_eq!(reg.anomalies().len(), 2);
        assert!(matches!(reg.anomalies()[0], Anomaly::DuplicateUid { line: 2, .. }));
        assert!(matches!(reg.anomalies()[1], Anomaly::Malformed { line: 3, .. }));
        reg.record_save("c", 1, TxHash([3; 32]), b"3").unwrap();
        drop(reg);
        let reg = Registry::open(&path).unwrap();
        assert!(reg.lookup("c").is_some());
    }

    #[test]
    fn tamper_changes_only_the_digest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let reg = Registry::open(&path).unwrap();
        let a = reg.record_save("a", 0, TxHash([1; 32]), b"1").unwrap();
        let b = reg.record_save("b", 1, TxHash([2; 32]), b"2").unwrap();
        drop(reg);
        let t = tamper_digest(&path, "a").unwrap();
        assert_ne!(t.plaintext_digest, a.plaintext_digest);
        let reg = Registry::open(&path).unwrap();
        assert_eq!(reg.lookup("a").unwrap().plaintext_digest, t.plaintext_digest);
        assert_eq!(reg.lookup("b").unwrap(), b);
        assert!(matches!(tamper_digest(&path, "zz"), Err(RegistryError::NotFound(_))));
    }

    #[test]
    fn rejects_unknown_fields() {
        let line = format!(
            "{{\"uid\":\"u\",\"entry_index\":0,\"tx_hash\":\"0x{}\",\"plaintext_digest\":\"{}\",\"created_at\":\"2024-08-19T12:00:00Z\",\"x\":1}}",
            "00".repeat(32),
            "0".repeat(64)
        );
        assert!(RegistryRecord::from_line(&line).is_err());
    }
}
