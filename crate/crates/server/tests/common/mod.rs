#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use ledgerseal::Service;
use ledgerseal_core::{BackendConfig, PricingConfig, Registry, SimulatedChain, SymmetricKey, WalletKey};
use serde_json::Value;
use tower::ServiceExt;

pub struct Harness {
    pub dir: tempfile::TempDir,
    pub service: Arc<Service>,
    pub chain: Arc<SimulatedChain>,
    pub wallet: WalletKey,
    pub key: SymmetricKey,
}

impl Harness {
    pub fn new(block_size: u64) -> Self {
        Self::with(block_size, 0.0, |s| s)
    }

    pub fn with(block_size: u64, failure_rate: f64, adjust: impl FnOnce(Service) -> Service) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let wallet = WalletKey::from_bytes([0x21; 32]);
        let key = SymmetricKey::from_bytes([0x42; 32]);
        let cfg = BackendConfig {
            block_size,
            failure_rate,
            ..BackendConfig::default()
        };
        let chain = Arc::new(SimulatedChain::deploy(&cfg, &wallet).unwrap());
        let registry = Registry::open(dir.path().join("registry.jsonl")).unwrap();
        let service = Service::attached(chain.clone(), registry, key.clone(), wallet.clone(), PricingConfig::builtin());
        Harness {
            dir,
            service: Arc::new(adjust(service)),
            chain,
            wallet,
            key,
        }
    }

    pub fn router(&self) -> Router {
        ledgerseal::router(self.service.clone())
    }

    pub fn registry_path(&self) -> std::path::PathBuf {
        self.dir.path().join("registry.jsonl")
    }
}

pub async fn send(router: &Router, method: &str, uri: &str, body: Option<&str>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req.body(body.map(|b| Body::from(b.to_owned())).unwrap_or_else(Body::empty)).unwrap();
    let resp = router.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

pub fn save_body(uid: &str, text: &str) -> String {
    serde_json::json!({ "uid": uid, "text": text }).to_string()
}

pub fn is_tx_hash(v: &Value) -> bool {
    v.as_str()
        .and_then(|s| s.strip_prefix("0x"))
        .is_some_and(|h| h.len() == 64 && h.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase()))
}
