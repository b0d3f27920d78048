#![no_main]

use ledgerseal_core::registry::parse_registry;
use ledgerseal_core::RegistryRecord;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(record) = RegistryRecord::from_line(text) {
        assert_eq!(RegistryRecord::from_line(&record.to_line()).unwrap(), record);
    }
    let (records, anomalies) = parse_registry(text);
    assert!(records.len() + anomalies.len() <= text.lines().count());
});
