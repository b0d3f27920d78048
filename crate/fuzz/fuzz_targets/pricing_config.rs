#![no_main]

use ledgerseal_core::PricingConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = PricingConfig::from_json(text) {
        if let Ok(report) = config.compare(&[1, 1000, 5000]) {
            let _ = report.to_csv();
            let _ = report.to_json();
        }
    }
});
