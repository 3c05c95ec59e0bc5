#![no_main]

use libfuzzer_sys::fuzz_target;
use tomo_core::sampler::{parse_state, StateFile};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rho) = parse_state(text) {
        let file = StateFile::from_state(&rho).expect("valid state serializes");
        assert_eq!(file.to_state().expect("re-parse"), rho);
    }
});
