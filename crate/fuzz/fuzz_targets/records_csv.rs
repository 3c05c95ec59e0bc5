#![no_main]

use libfuzzer_sys::fuzz_target;
use tomo_core::experiments::{aggregate, records_from_csv, records_to_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(records) = records_from_csv(text) {
        let again = records_from_csv(&records_to_csv(&records).unwrap()).expect("re-parse");
        assert_eq!(again, records);
        if !records.is_empty() {
            aggregate(&records).unwrap();
        }
    }
});
