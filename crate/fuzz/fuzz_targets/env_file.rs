#![no_main]

use ledgerseal::config::parse_env_file;
use ledgerseal::ServiceConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(vars) = parse_env_file(text) {
        let _ = ServiceConfig::from_lookup(|name| vars.get(name).cloned());
    }
});
