//! Service configuration from `LEDGERSEAL_*` environment variables, with an
//! optional dotenv file underneath.

use std::collections::HashMap;
use std::net::{IpAddr, Ipv4Addr};
use std::path::{Path, PathBuf};

use ledgerseal_core::chain::{BackendConfig, BackendMode};
use ledgerseal_core::{Address, SymmetricKey, WalletKey};
use sha2::{Digest, Sha256};

pub const ENABLED: &str = "LEDGERSEAL_ENABLED";
pub const BACKEND: &str = "LEDGERSEAL_BACKEND";
pub const PRIVATE_KEY: &str = "LEDGERSEAL_PRIVATE_KEY";
pub const CONTRACT_ADDRESS: &str = "LEDGERSEAL_CONTRACT_ADDRESS";
pub const FERNET_KEY: &str = "LEDGERSEAL_FERNET_KEY";
pub const RPC_URL: &str = "LEDGERSEAL_RPC_URL";
pub const REGISTRY_PATH: &str = "LEDGERSEAL_REGISTRY_PATH";
pub const PORT: &str = "LEDGERSEAL_PORT";
pub const PRICING_PATH: &str = "LEDGERSEAL_PRICING_PATH";
pub const BIND: &str = "LEDGERSEAL_BIND";
pub const CHAIN_PATH: &str = "LEDGERSEAL_CHAIN_PATH";
pub const BLOCK_SIZE: &str = "LEDGERSEAL_BLOCK_SIZE";
pub const FAILURE_RATE: &str = "LEDGERSEAL_FAILURE_RATE";
pub const FAILURE_SEED: &str = "LEDGERSEAL_FAILURE_SEED";
pub const FINGERPRINT_PIN: &str = "LEDGERSEAL_FINGERPRINT_PIN";

pub const DEFAULT_REGISTRY_PATH: &str = "ledgerseal-registry.jsonl";
pub const DEFAULT_PORT: u16 = 8080;
/// `LEDGERSEAL_CHAIN_PATH` value that keeps the simulated chain in memory.
pub const IN_MEMORY: &str = ":memory:";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("{0} is required but not set")]
    Missing(&'static str),
    #[error("{var} is invalid: {reason}")]
    Invalid { var: &'static str, reason: String },
    #[error("cannot read env file {path}: {reason}")]
    EnvFile { path: String, reason: String },
}

fn invalid(var: &'static str, reason: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        var,
        reason: reason.to_string(),
    }
}

/// Where the simulated chain keeps its state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChainStore {
    Memory,
    File(PathBuf),
}

/// Secrets needed once the chain component is attached.
#[derive(Clone)]
pub struct Credentials {
    pub fernet_key: SymmetricKey,
    pub wallet: WalletKey,
}

impl std::fmt::Debug for Credentials {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Credentials")
            .field("wallet", &self.wallet.address())
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub enabled: bool,
    pub backend: BackendConfig,
    /// Present whenever `enabled` is true.
    pub credentials: Option<Credentials>,
    pub contract_address: Option<Address>,
    pub registry_path: PathBuf,
    pub chain_store: ChainStore,
    pub bind: IpAddr,
    pub listen_port: u16,
    pub pricing_path: Option<PathBuf>,
    pub fingerprint_pin: Option<String>,
}

fn parse_bool(var: &'static str, raw: &str) -> Result<bool, ConfigError> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        other => Err(invalid(var, format!("expected true or false, got {other:?}"))),
    }
}

fn parse_num<T: std::str::FromStr>(var: &'static str, raw: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    raw.trim().parse().map_err(|e: T::Err| invalid(var, e))
}

impl ServiceConfig {
    /// Builds a config from a variable lookup. Empty values count as unset.
    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let get = |name: &str| lookup(name).filter(|v| !v.trim().is_empty());

        let enabled = get(ENABLED).map(|v| parse_bool(ENABLED, &v)).transpose()?.unwrap_or(true);
        let mode = match get(BACKEND).as_deref().map(str::trim) {
            None | Some("simulated") => BackendMode::Simulated,
            Some("remote") => BackendMode::RemoteReceiptOnly,
            Some(other) => return Err(invalid(BACKEND, format!("expected simulated or remote, got {other:?}"))),
        };
        let mut backend = BackendConfig {
            mode,
            rpc_url: get(RPC_URL),
            ..BackendConfig::default()
        };
        if let Some(v) = get(BLOCK_SIZE) {
            backend.block_size = parse_num(BLOCK_SIZE, &v)?;
        }
        if let Some(v) = get(FAILURE_RATE) {
            backend.failure_rate = parse_num(FAILURE_RATE, &v)?;
        }
        if let Some(v) = get(FAILURE_SEED) {
            backend.failure_seed = parse_num(FAILURE_SEED, &v)?;
        }
        if mode == BackendMode::RemoteReceiptOnly && backend.rpc_url.is_none() {
            return Err(ConfigError::Missing(RPC_URL));
        }
        backend.validate().map_err(|e| invalid(BACKEND, e))?;

        let contract_address = get(CONTRACT_ADDRESS)
            .map(|v| v.trim().parse::<Address>().map_err(|e| invalid(CONTRACT_ADDRESS, e)))
            .transpose()?;
        if mode == BackendMode::RemoteReceiptOnly && contract_address.is_none() {
            return Err(ConfigError::Missing(CONTRACT_ADDRESS));
        }

        let credentials = if enabled {
            let fernet_key = get(FERNET_KEY)
                .ok_or(ConfigError::Missing(FERNET_KEY))?
                .trim()
                .parse::<SymmetricKey>()
                .map_err(|e| invalid(FERNET_KEY, e))?;
            let wallet = get(PRIVATE_KEY)
                .ok_or(ConfigError::Missing(PRIVATE_KEY))?
                .trim()
                .parse::<WalletKey>()
                .map_err(|e| invalid(PRIVATE_KEY, e))?;
            Some(Credentials { fernet_key, wallet })
        } else {
            None
        };

        let registry_path = PathBuf::from(get(REGISTRY_PATH).unwrap_or_else(|| DEFAULT_REGISTRY_PATH.into()));
        let chain_store = match get(CHAIN_PATH) {
            Some(p) if p.trim() == IN_MEMORY => ChainStore::Memory,
            Some(p) => ChainStore::File(PathBuf::from(p)),
            None => {
                let mut p = registry_path.clone().into_os_string();
                p.push(".chain.json");
                ChainStore::File(PathBuf::from(p))
            }
        };
        let bind = get(BIND)
            .map(|v| parse_num::<IpAddr>(BIND, &v))
            .transpose()?
            .unwrap_or(IpAddr::V4(Ipv4Addr::LOCALHOST));
        let listen_port = get(PORT).map(|v| parse_num(PORT, &v)).transpose()?.unwrap_or(DEFAULT_PORT);
        let fingerprint_pin = get(FINGERPRINT_PIN).map(|v| v.trim().to_ascii_lowercase());
        if let Some(pin) = &fingerprint_pin {
            if pin.len() != 64 || !pin.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(invalid(FINGERPRINT_PIN, "expected 64 hex digits"));
            }
        }

        Ok(ServiceConfig {
            enabled,
            backend,
            credentials,
            contract_address,
            registry_path,
            chain_store,
            bind,
            listen_port,
            pricing_path: get(PRICING_PATH).map(PathBuf::from),
            fingerprint_pin,
        })
    }

    /// Reads the process environment, falling back to `env_file` for
    /// variables the environment does not set.
    pub fn from_env(env_file: Option<&Path>) -> Result<Self, ConfigError> {
        let file_vars = match env_file {
            Some(path) => load_env_file(path)?,
            None => HashMap::new(),
        };
        Self::from_lookup(|name| std::env::var(name).ok().or_else(|| file_vars.get(name).cloned()))
    }
}

/// Parses dotenv-style `KEY=value` text.
pub fn parse_env_file(text: &str) -> Result<HashMap<String, String>, String> {
    dotenvy::from_read_iter(text.as_bytes())
        .map(|item| item.map_err(|e| e.to_string()))
        .collect()
}

pub fn load_env_file(path: &Path) -> Result<HashMap<String, String>, ConfigError> {
    let err = |reason: String| ConfigError::EnvFile {
        path: path.display().to_string(),
        reason,
    };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    parse_env_file(&text).map_err(err)
}

/// SHA-256 over the contract address followed by the owner address,
/// lowercase hex.
pub fn fingerprint(contract: Address, owner: Address) -> String {
    let mut h = Sha256::new();
    h.update(contract.as_bytes());
    h.update(owner.as_bytes());
    hex::encode(h.finalize())
}
