#![no_main]

use libfuzzer_sys::fuzz_target;
use sensevm::trace::parse_record;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    if let Ok(r) = parse_record(line) {
        assert!(!r.kind.is_empty());
    }
});
