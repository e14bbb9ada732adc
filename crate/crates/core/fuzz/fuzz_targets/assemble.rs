#![no_main]

use libfuzzer_sys::fuzz_target;
use sensevm::asm::{assemble, disassemble};
use sensevm::image::load_program;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok(image) = assemble(src) {
        let p = load_program(&image).expect("assembled image loads");
        let listing = disassemble(&image).expect("assembled image disassembles");
        assert_eq!(assemble(&listing).expect("listing reassembles"), p.to_bytes());
    }
});
