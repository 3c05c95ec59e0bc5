#![no_main]

use libfuzzer_sys::fuzz_target;
use tomo_core::sampler::CountsDataset;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(dataset) = CountsDataset::from_json_str(text) {
        let again = CountsDataset::from_json_str(&dataset.to_json_string()).expect("re-parse");
        assert_eq!(again, dataset);
    }
});
