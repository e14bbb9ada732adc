#![no_main]

use libfuzzer_sys::fuzz_target;
use sensevm::asm::{assemble, disassemble};
use sensevm::image::load_program;

fuzz_target!(|data: &[u8]| {
    let Ok(p) = load_program(data) else { return };
    let listing = disassemble(data).expect("loadable image disassembles");
    assert_eq!(assemble(&listing).expect("listing reassembles"), p.to_bytes());
});
