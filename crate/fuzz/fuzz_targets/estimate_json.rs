#![no_main]

use libfuzzer_sys::fuzz_target;
use tomo_core::sampler::EstimateFile;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(file) = EstimateFile::parse(text) {
        let again = EstimateFile::parse(&file.to_json_string()).expect("re-parse");
        assert_eq!(again.estimate().unwrap(), file.estimate().unwrap());
    }
});
