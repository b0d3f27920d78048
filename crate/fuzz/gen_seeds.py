"""Writes the checked-in seed corpora under corpus/<target>/."""

import gzip
import json
import pathlib
import struct

root = pathlib.Path(__file__).parent / "corpus"
fixtures = pathlib.Path(__file__).parent.parent / "crates/core/tests/fixtures/fernet_vectors.json"


def put(target, name, data):
    d = root / target
    d.mkdir(parents=True, exist_ok=True)
    (d / name).write_bytes(data if isinstance(data, bytes) else data.encode())


vectors = json.loads(fixtures.read_text())["vectors"]
for i, v in enumerate(vectors[:6]):
    put("token_unseal", f"python_{i}", v["token"])
    put("gzip_decompress", f"python_{i}", bytes.fromhex(v["compressed_hex"]))
put("token_unseal", "short", "gAAAAAA=")
put("token_unseal", "not_base64", "***")

put("gzip_decompress", "hello", gzip.compress(b"hello world " * 20, compresslevel=6, mtime=0))
put("gzip_decompress", "empty_member", gzip.compress(b"", mtime=0))
put("gzip_decompress", "truncated", gzip.compress(b"truncate me please", mtime=0)[:-5])


def field(b):
    return struct.pack(">I", len(b)) + b


sender = bytes(range(1, 21))
put("tx_decode", "save_text",
    b"\x01" + sender + struct.pack(">Q", 7) + b"\x01" + field(vectors[1]["token"].encode()) + field(b"book-1"))
put("tx_decode", "transfer", b"\x01" + sender + struct.pack(">Q", 0) + b"\x02" + field(bytes([0xAA] * 20)))
put("tx_decode", "bad_version", b"\x02" + sender + struct.pack(">Q", 0) + b"\x02")

digest = "ab" * 32
txh = "0x" + "11" * 32
put("registry_line", "record",
    json.dumps({"uid": "u1", "entry_index": 3, "tx_hash": txh, "plaintext_digest": digest,
                "created_at": "2024-08-19T12:00:00Z"}, separators=(",", ":")))
put("registry_line", "two_lines_and_garbage",
    json.dumps({"uid": "a", "entry_index": 0, "tx_hash": txh, "plaintext_digest": digest,
                "created_at": "2024-08-19T12:00:00Z"}, separators=(",", ":")) + "\n{not json\n")

put("pricing_config", "shipped", (pathlib.Path(__file__).parent.parent / "crates/core/config/pricing.json").read_text())
put("pricing_config", "minimal",
    '{"networks":[{"name":"a","gas_price_gwei":1,"token_usd":1},{"name":"b","gas_price_gwei":2,"token_usd":3}]}')

put("env_file", "full",
    "# service\nLEDGERSEAL_ENABLED=true\nLEDGERSEAL_BACKEND=simulated\n"
    "LEDGERSEAL_FERNET_KEY=cw_0x689RpI-jtRR7oE8h_eQsKImvJapLeSbXpwF4e4=\n"
    "LEDGERSEAL_PRIVATE_KEY=0x" + "46" * 32 + "\nLEDGERSEAL_PORT=8080\n")
put("env_file", "remote",
    "LEDGERSEAL_BACKEND=remote\nLEDGERSEAL_RPC_URL='http://127.0.0.1:8545'\n"
    "LEDGERSEAL_CONTRACT_ADDRESS=0x" + "aa" * 20 + "\nLEDGERSEAL_ENABLED=\"false\"\n")

ok = {"transactionHash": txh, "blockNumber": "0x1b4", "gasUsed": "0x8ca0", "status": "0x1"}
put("receipt_response", "success", json.dumps({"jsonrpc": "2.0", "id": 1, "result": ok}))
put("receipt_response", "pending", json.dumps({"jsonrpc": "2.0", "id": 1, "result": {"transactionHash": txh, "blockNumber": None}}))
put("receipt_response", "null", '{"jsonrpc":"2.0","id":1,"result":null}')
put("receipt_response", "error", '{"jsonrpc":"2.0","id":1,"error":{"code":-32000,"message":"boom"}}')

put("identifiers", "address", "0x" + "aB" * 20)
put("identifiers", "tx_hash", txh)
put("identifiers", "fernet_key", "cw_0x689RpI-jtRR7oE8h_eQsKImvJapLeSbXpwF4e4=")
put("identifiers", "wallet", "46" * 32)
