#![no_main]

use libfuzzer_sys::fuzz_target;
use sensevm::image::load_program;

fuzz_target!(|data: &[u8]| {
    if let Ok(p) = load_program(data) {
        // whatever loads re-encodes to an image that loads to the same program
        let again = load_program(&p.to_bytes()).expect("re-encoded image loads");
        assert_eq!(again, p);
    }
});
