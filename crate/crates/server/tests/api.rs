mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::http::StatusCode;
use common::{is_tx_hash, save_body, send, Harness};
use ledgerseal::{Service, ServiceConfig};
use ledgerseal_core::chain::sign_tx;
use ledgerseal_core::registry::tamper_digest;
use ledgerseal_core::{
    crypto::seal, Backend, PricingConfig, Registry, RemoteReceiptClient, Transaction, TxCall, TxHash,
};
use proptest::prelude::*;

#[tokio::test]
async fn post_returns_created_with_receipt_fields() {
    let h = Harness::new(4);
    let app = h.router();
    let (status, body) = send(&app, "POST", "/api/v1/reviews", Some(&save_body("book-1", "A fine read."))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["uid"], "book-1");
    assert!(is_tx_hash(&body["tx_hash"]), "{body}");
    assert_eq!(body["entry_index"], 0);
    // gas oracle: base + per byte over the call payload (tag, two length prefixes, token, uid)
    let token_len = h.chain.contract().entries()[0].text.len() as u64;
    assert_eq!(body["gas_used"], 20_000 + 16 * (1 + 4 + token_len + 4 + "book-1".len() as u64));
    assert_eq!(h.service.registry().unwrap().len(), 1);
}

#[tokio::test]
async fn duplicate_uid_conflicts() {
    let h = Harness::new(1);
    let app = h.router();
    assert_eq!(send(&app, "POST", "/api/v1/reviews", Some(&save_body("u", "one"))).await.0, StatusCode::CREATED);
    let (status, body) = send(&app, "POST", "/api/v1/reviews", Some(&save_body("u", "two"))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"]["code"], "duplicate_uid");
    assert!(body["error"]["message"].is_string());
    assert_eq!(h.chain.contract().total_texts(), 1);
}

#[tokio::test]
async fn invalid_bodies_are_rejected() {
    let h = Harness::new(1);
    let app = h.router();
    for body in ["not json", r#"{"uid":"x"}"#, r#"{"uid":"","text":"t"}"#, r#"{"uid":"x","text":""}"#] {
        let (status, v) = send(&app, "POST", "/api/v1/reviews", Some(body)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        assert_eq!(v["error"]["code"], "invalid_input");
    }
    assert_eq!(h.chain.contract().total_texts(), 0);
}

#[tokio::test]
async fn get_round_trips_and_reports_missing() {
    let h = Harness::new(2);
    let app = h.router();
    let text = "Ein Buch über \"Zeit\": 时间\n\tand a tab";
    send(&app, "POST", "/api/v1/reviews", Some(&save_body("r/1", text))).await;
    let (status, body) = send(&app, "GET", "/api/v1/reviews/r%2F1", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["text"], text);
    assert_eq!(body["uid"], "r/1");
    assert_eq!(body["entry_index"], 0);
    assert!(is_tx_hash(&body["tx_hash"]));

    let (status, body) = send(&app, "GET", "/api/v1/reviews/nobody", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"]["code"], "not_found");
}

#[tokio::test]
async fn verify_paths_and_statuses() {
    let h = Harness::new(1);
    let app = h.router();
    send(&app, "POST", "/api/v1/reviews", Some(&save_body("v1", "original"))).await;

    let (status, v) = send(&app, "POST", "/api/v1/reviews/v1/verify", Some(r#"{"text":"original"}"#)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["status"], "verified");
    assert_eq!(v["on_chain_digest"], v["local_digest"]);
    assert!(v["checked_at"].as_str().unwrap().ends_with('Z'));

    let (status, v) = send(&app, "POST", "/api/v1/reviews/v1/verify", Some(r#"{"text":"0riginal"}"#)).await;
    assert_eq!((status, v["status"].as_str()), (StatusCode::OK, Some("mismatch")));

    let (_, v) = send(&app, "POST", "/api/v1/reviews/v1/verify", None).await;
    assert_eq!(v["status"], "verified");
    let (_, v) = send(&app, "POST", "/api/v1/reviews/v1/verify", Some("{}")).await;
    assert_eq!(v["status"], "verified");

    let (status, v) = send(&app, "POST", "/api/v1/reviews/ghost/verify", None).await;
    assert_eq!((status, v["status"].as_str()), (StatusCode::OK, Some("not_found")));

    let (status, v) = send(&app, "POST", "/api/v1/reviews/v1/verify", Some("{broken")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "invalid_input");
}

#[tokio::test]
async fn tampered_registry_digest_is_reported() {
    let h = Harness::new(1);
    let app = h.router();
    send(&app, "POST", "/api/v1/reviews", Some(&save_body("t1", "content"))).await;
    tamper_digest(&h.registry_path(), "t1").unwrap();
    // a fresh service over the edited file
    let registry = Registry::open(h.registry_path()).unwrap();
    let svc = Service::attached(h.chain.clone(), registry, h.key.clone(), h.wallet.clone(), PricingConfig::builtin());
    let app = ledgerseal::router(Arc::new(svc));
    let (_, v) = send(&app, "POST", "/api/v1/reviews/t1/verify", None).await;
    assert_eq!(v["status"], "mismatch");
    assert_ne!(v["on_chain_digest"], v["local_digest"]);
}

#[tokio::test]
async fn transaction_status_lookup() {
    let h = Harness::new(3);
    let app = h.router();
    let (_, saved) = send(&app, "POST", "/api/v1/reviews", Some(&save_body("a", "text"))).await;
    let hash = saved["tx_hash"].as_str().unwrap();
    let (status, v) = send(&app, "GET", &format!("/api/v1/transactions/{hash}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["status"], "success");
    assert_eq!(v["gas_used"], saved["gas_used"]);
    assert!(v["block_number"].is_u64());

    let random = TxHash([0xab; 32]);
    let (status, v) = send(&app, "GET", &format!("/api/v1/transactions/{random}"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"]["code"], "not_found");

    let (status, _) = send(&app, "GET", "/api/v1/transactions/0x1234", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn unsealed_block_is_pending() {
    let h = Harness::new(4);
    let app = h.router();
    // submitted straight to the chain, bypassing the service's sealing
    let token = seal(b"pending text", &h.key).unwrap().into_string();
    let sender = h.wallet.address();
    let tx = Transaction::build(
        sender,
        h.chain.next_nonce(sender).unwrap(),
        TxCall::SaveText {
            token,
            uid: "p".into(),
        },
    )
    .unwrap();
    let hash = h.chain.submit(&sign_tx(tx, &h.wallet).unwrap()).unwrap();
    let (status, v) = send(&app, "GET", &format!("/api/v1/transactions/{hash}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["status"], "pending");
    assert!(v.get("block_number").is_none());
    assert!(v.get("gas_used").is_none());

    h.chain.seal_block().unwrap();
    let (_, v) = send(&app, "GET", &format!("/api/v1/transactions/{hash}"), None).await;
    assert_eq!(v["status"], "success");
    assert_eq!(v["block_number"], 0);
}

#[tokio::test]
async fn failed_transactions_return_bad_gateway_without_record() {
    let h = Harness::with(1, 1.0, |s| s);
    let app = h.router();
    let (status, v) = send(&app, "POST", "/api/v1/reviews", Some(&save_body("f", "text"))).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(v["error"]["code"], "tx_failed");
    assert!(h.service.registry().unwrap().is_empty());
    assert_eq!(h.chain.contract().total_texts(), 0);
    let (status, _) = send(&app, "GET", "/api/v1/reviews/f", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn unreachable_remote_backend() {
    let h = Harness::new(1);
    h.service.save_review("r", b"stored").unwrap();
    let registry = Registry::open(h.registry_path()).unwrap();
    // nothing listens on the discard port
    let remote = Arc::new(RemoteReceiptClient::new("http://127.0.0.1:9/", h.chain.contract_address()));
    let svc = Service::attached(remote, registry, h.key.clone(), h.wallet.clone(), PricingConfig::builtin());
    let app = ledgerseal::router(Arc::new(svc));

    let (status, v) = send(&app, "GET", "/api/v1/reviews/r", None).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(v["error"]["code"], "chain_unavailable");

    let (status, v) = send(&app, "POST", "/api/v1/reviews", Some(&save_body("new", "x"))).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(v["error"]["code"], "chain_unavailable");

    let (status, v) = send(&app, "POST", "/api/v1/reviews/r/verify", None).await;
    assert_eq!((status, v["status"].as_str()), (StatusCode::OK, Some("chain_unavailable")));

    let (_, v) = send(&app, "GET", "/healthz", None).await;
    assert_eq!(v["backend"], "remote");
}

#[tokio::test]
async fn gas_report_endpoint() {
    let h = Harness::new(1);
    let app = h.router();
    let (status, v) = send(&app, "GET", "/api/v1/gas/report", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["rows"].as_array().unwrap().len(), 8);
    let savings = v["savings"].as_array().unwrap();
    assert_eq!(savings.len(), 4);
    for s in savings {
        assert!(s["savings_percent"].as_f64().unwrap() > 98.0, "{s}");
    }

    let (_, v) = send(&app, "GET", "/api/v1/gas/report?sizes=1000", None).await;
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r["gas_units"] == 36_000));

    for bad in ["0", "", "abc", "10,-1", "1,,2"] {
        let (status, v) = send(&app, "GET", &format!("/api/v1/gas/report?sizes={bad}"), None).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{bad}");
        assert_eq!(v["error"]["code"], "invalid_input");
    }
}

fn disabled_service() -> Arc<Service> {
    let cfg = ServiceConfig::from_lookup(|name| (name == "LEDGERSEAL_ENABLED").then(|| "false".to_string())).unwrap();
    Arc::new(Service::from_config(&cfg).unwrap())
}

#[tokio::test]
async fn disabled_switch() {
    let app = ledgerseal::router(disabled_service());
    let (status, v) = send(&app, "POST", "/api/v1/reviews", Some(&save_body("u", "t"))).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(v["error"]["code"], "service_disabled");
    let (status, _) = send(&app, "POST", "/api/v1/reviews/u/verify", None).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    let (status, _) = send(&app, "GET", "/api/v1/reviews/u", None).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    let (status, v) = send(&app, "GET", "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v, serde_json::json!({"status": "ok", "enabled": false, "backend": "simulated"}));
    // pure computation still works
    let (status, _) = send(&app, "GET", "/api/v1/gas/report", None).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn healthz_is_fast() {
    let h = Harness::new(1);
    let app = h.router();
    let (status, v) = send(&app, "GET", "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v, serde_json::json!({"status": "ok", "enabled": true, "backend": "simulated"}));
    let mut worst = Duration::ZERO;
    for _ in 0..50 {
        let t = Instant::now();
        send(&app, "GET", "/healthz", None).await;
        worst = worst.max(t.elapsed());
    }
    assert!(worst < Duration::from_millis(50), "{worst:?}");
}

#[tokio::test]
async fn unknown_route_uses_envelope() {
    let h = Harness::new(1);
    let (status, v) = send(&h.router(), "GET", "/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"]["code"], "not_found");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 8)]
async fn concurrent_posts_land_exactly_once() {
    let h = Harness::new(4);
    let app = h.router();
    let tasks: Vec<_> = (0..100)
        .map(|i| {
            let app = app.clone();
            tokio::spawn(async move {
                send(&app, "POST", "/api/v1/reviews", Some(&save_body(&format!("c{i}"), &format!("text {i}")))).await
            })
        })
        .collect();
    let mut indexes = Vec::new();
    for t in tasks {
        let (status, v) = t.await.unwrap();
        assert_eq!(status, StatusCode::CREATED, "{v}");
        indexes.push(v["entry_index"].as_u64().unwrap());
    }
    indexes.sort_unstable();
    assert_eq!(indexes, (0..100).collect::<Vec<_>>());
    assert_eq!(h.chain.contract().total_texts(), 100);
    for i in 0..100 {
        let (_, v) = send(&app, "GET", &format!("/api/v1/reviews/c{i}"), None).await;
        assert_eq!(v["text"], format!("text {i}"));
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 8)]
async fn duplicate_race_admits_one() {
    let h = Harness::new(4);
    let app = h.router();
    let tasks: Vec<_> = (0..24)
        .map(|i| {
            let app = app.clone();
            tokio::spawn(async move { send(&app, "POST", "/api/v1/reviews", Some(&save_body("same", &format!("v{i}")))).await })
        })
        .collect();
    let mut created = 0;
    for t in tasks {
        match t.await.unwrap().0 {
            StatusCode::CREATED => created += 1,
            StatusCode::CONFLICT => {}
            other => panic!("unexpected {other}"),
        }
    }
    assert_eq!(created, 1);
    assert_eq!(h.chain.contract().total_texts(), 1);
    assert_eq!(h.service.registry().unwrap().len(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn post_get_verify_law(text in "\\PC{1,300}", raw in proptest::collection::vec(any::<u8>(), 1..200)) {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async {
            let h = Harness::new(2);
            let app = h.router();
            // binary data travels as a JSON-escaped string
            let escaped: String = raw.iter().map(|&b| char::from(b)).collect();
            for (uid, t) in [("utf8", text.as_str()), ("bin", escaped.as_str())] {
                let (status, _) = send(&app, "POST", "/api/v1/reviews", Some(&save_body(uid, t))).await;
                prop_assert_eq!(status, StatusCode::CREATED);
                let (_, v) = send(&app, "GET", &format!("/api/v1/reviews/{uid}"), None).await;
                prop_assert_eq!(v["text"].as_str(), Some(t));
                let body = serde_json::json!({ "text": t }).to_string();
                let (_, v) = send(&app, "POST", &format!("/api/v1/reviews/{uid}/verify"), Some(&body)).await;
                prop_assert_eq!(v["status"].as_str(), Some("verified"));
            }
            Ok(())
        })?;
    }
}
