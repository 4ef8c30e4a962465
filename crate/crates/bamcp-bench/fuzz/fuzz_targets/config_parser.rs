#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Config files and arm specs are user input; parsing must never panic.
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = bamcp_bench::config::parse_config_text(text);
        let _ = bamcp_bench::config::parse_arms(text);
    }
});
