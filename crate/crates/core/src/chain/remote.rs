use std::time::Duration;

use serde::Deserialize;
use serde_json::Value;
use tracing::debug;

use super::tx::{SignedTransaction, TxHash};
use super::{Backend, BackendMode, ChainError, FailureReason, TxReceipt, TxStatus};
use crate::ledger::{Address, TextEntry};

const RECEIPT_METHOD: &str = "eth_getTransactionReceipt";
const REMOTE: &str = "remote";

/// Receipt-only view of an external EVM node.
///
/// Only `eth_getTransactionReceipt` is spoken; every write and every
/// contract read returns [`ChainError::Unsupported`].
pub struct RemoteReceiptClient {
    url: String,
    contract_address: Address,
    agent: ureq::Agent,
}

impl RemoteReceiptClient {
    pub fn new(url: impl Into<String>, contract_address: Address) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(10)))
            .http_status_as_error(false)
            .build()
            .into();
        RemoteReceiptClient {
            url: url.into(),
            contract_address,
            agent,
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn call(&self, body: &str) -> Result<String, ChainError> {
        debug!(url = %self.url, request = body, "json-rpc request");
        let mut response = self
            .agent
            .post(&self.url)
            .content_type("application/json")
            .send(body)
            .map_err(|e| ChainError::BackendUnavailable(e.to_string()))?;
        let status = response.status();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| ChainError::BackendUnavailable(e.to_string()))?;
        debug!(status = status.as_u16(), response = %text, "json-rpc response");
        if !status.is_success() {
            return Err(ChainError::BackendUnavailable(format!("node answered HTTP {status}")));
        }
        Ok(text)
    }
}

/// JSON-RPC 2.0 request body for a receipt query.
pub fn receipt_request(hash: &TxHash) -> String {
    serde_json::json!({
        "jsonrpc": "2.0",
        "id": 1,
        "method": RECEIPT_METHOD,
        "params": [hash.to_string()],
    })
    .to_string()
}

#[derive(Deserialize)]
struct RpcResponse {
    #[serde(default)]
    result: Option<Value>,
    #[serde(default)]
    error: Option<RpcError>,
}

#[derive(Deserialize)]
struct RpcError {
    code: i64,
    message: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RpcReceipt {
    transaction_hash: String,
    #[serde(default)]
    block_number: Option<String>,
    #[serde(default)]
    gas_used: Option<String>,
    #[serde(default)]
    status: Option<String>,
}

fn quantity(field: &str, s: &str) -> Result<u64, ChainError> {
    let digits = s
        .strip_prefix("0x")
        .ok_or_else(|| ChainError::MalformedResponse(format!("{field} is not a hex quantity")))?;
    if digits.is_empty() || digits.len() > 16 {
        return Err(ChainError::MalformedResponse(format!("{field} has bad length")));
    }
    u64::from_str_radix(digits, 16).map_err(|_| ChainError::MalformedResponse(format!("{field} is not hex")))
}

/// Maps a `eth_getTransactionReceipt` response body to a receipt.
///
/// `null` means the node does not know the hash (or has not mined it)
/// and maps to `Ok(None)`. A receipt without a block number is pending.
pub fn parse_receipt_response(body: &[u8], expected: &TxHash) -> Result<Option<TxReceipt>, ChainError> {
    let response: RpcResponse =
        serde_json::from_slice(body).map_err(|e| ChainError::MalformedResponse(e.to_string()))?;
    if let Some(err) = response.error {
        return Err(ChainError::BackendUnavailable(format!("rpc error {}: {}", err.code, err.message)));
    }
    let result = match response.result {
        None | Some(Value::Null) => return Ok(None),
        Some(v) => v,
    };
    let receipt: RpcReceipt =
        serde_json::from_value(result).map_err(|e| ChainError::MalformedResponse(e.to_string()))?;
    let tx_hash: TxHash = receipt
        .transaction_hash
        .to_ascii_lowercase()
        .parse()
        .map_err(|_| ChainError::MalformedResponse("bad transactionHash".into()))?;
    if tx_hash != *expected {
        return Err(ChainError::MalformedResponse(format!(
            "receipt is for {tx_hash}, asked for {expected}"
        )));
    }
    let Some(block) = receipt.block_number else {
        return Ok(Some(TxReceipt {
            tx_hash,
            status: TxStatus::Pending,
            block_number: None,
            gas_used: None,
            logs: Vec::new(),
        }));
    };
    let status = match receipt.status.as_deref() {
        Some(s) if quantity("status", s)? == 1 => TxStatus::Success,
        Some(s) if quantity("status", s)? == 0 => TxStatus::Failed {
            reason: FailureReason::Reverted,
        },
        Some(_) => return Err(ChainError::MalformedResponse("status must be 0x0 or 0x1".into())),
        None => return Err(ChainError::MalformedResponse("receipt has no status field".into())),
    };
    Ok(Some(TxReceipt {
        tx_hash,
        status,
        block_number: Some(quantity("blockNumber", &block)?),
        gas_used: receipt.gas_used.as_deref().map(|g| quantity("gasUsed", g)).transpose()?,
        logs: Vec::new(),
    }))
}

impl Backend for RemoteReceiptClient {
    fn mode(&self) -> BackendMode {
        BackendMode::RemoteReceiptOnly
    }

    fn contract_address(&self) -> Address {
        self.contract_address
    }

    fn owner(&self) -> Result<Address, ChainError> {
        Err(ChainError::Unsupported(REMOTE))
    }

    fn next_nonce(&self, _sender: Address) -> Result<u64, ChainError> {
        Err(ChainError::Unsupported(REMOTE))
    }

    fn submit(&self, _signed: &SignedTransaction) -> Result<TxHash, ChainError> {
        Err(ChainError::Unsupported(REMOTE))
    }

    fn receipt(&self, hash: &TxHash) -> Result<Option<TxReceipt>, ChainError> {
        let body = self.call(&receipt_request(hash))?;
        parse_receipt_response(body.as_bytes(), hash)
    }

    fn seal_block(&self) -> Result<u64, ChainError> {
        Err(ChainError::Unsupported(REMOTE))
    }

    fn get_text(&self, _index: u64) -> Result<TextEntry, ChainError> {
        Err(ChainError::Unsupported(REMOTE))
    }

    fn total_texts(&self) -> Result<u64, ChainError> {
        Err(ChainError::Unsupported(REMOTE))
    }
}
