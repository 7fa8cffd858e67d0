#![no_main]

use libfuzzer_sys::fuzz_target;
use spdalign::io::{read_features, write_features};

fuzz_target!(|data: &[u8]| {
    if let Ok(block) = read_features(data) {
        let again = write_features(&block).expect("decoded block re-encodes");
        assert_eq!(again, data);
    }
});
