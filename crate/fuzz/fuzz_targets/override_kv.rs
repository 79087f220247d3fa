#![no_main]

use libfuzzer_sys::fuzz_target;
use riscf_core::scenario::ScenarioBuilder;

fuzz_target!(|data: &[u8]| {
    // CLI --override pairs: force() replaces earlier values, then the
    // builder fills defaults and validates. No input may panic.
    if let Ok(text) = std::str::from_utf8(data) {
        let mut builder = ScenarioBuilder::new();
        for line in text.lines() {
            if let Some((key, value)) = line.split_once('=') {
                let _ = builder.force(key.trim(), value.trim());
            }
        }
        let _ = builder.build();
    }
});
