#![no_main]

use libfuzzer_sys::fuzz_target;
use sensevm::sim::{load_scenario, ScenarioEngine};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = load_scenario(text) {
        assert!(s.events.windows(2).all(|w| w[0].time_ms <= w[1].time_ms));
        let engine = ScenarioEngine::new(&s);
        assert_eq!(engine.is_exhausted(), s.events.is_empty());
    }
});
