#![no_main]

use ledgerseal_core::chain::parse_receipt_response;
use ledgerseal_core::{TxHash, TxStatus};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let expected = TxHash([0x11; 32]);
    if let Ok(Some(receipt)) = parse_receipt_response(data, &expected) {
        assert_eq!(receipt.tx_hash, expected);
        assert_eq!(receipt.status == TxStatus::Pending, receipt.block_number.is_none());
    }
});
