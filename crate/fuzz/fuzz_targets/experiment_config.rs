#![no_main]

use libfuzzer_sys::fuzz_target;
use tomo_core::experiments::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = ExperimentConfig::from_json_str(text) {
        let again = ExperimentConfig::from_json_str(&config.to_json_string()).expect("re-parse");
        assert_eq!(again, config);
    }
});
