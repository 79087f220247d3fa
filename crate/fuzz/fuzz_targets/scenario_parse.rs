#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Scenario documents come from operators; parsing and validation must
    // reject bad input without panicking.
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = riscf_core::ScenarioConfig::parse_str(text);
    }
});
