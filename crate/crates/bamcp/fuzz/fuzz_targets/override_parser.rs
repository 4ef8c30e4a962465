#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // The transition-table parser must never panic on arbitrary input.
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = bamcp::domains::parse_override(text);
    }
});
