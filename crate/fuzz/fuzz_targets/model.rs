#![no_main]

use libfuzzer_sys::fuzz_target;
use spdalign::io::{read_model, write_model};

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = read_model(data) {
        let again = write_model(&model).expect("decoded model re-encodes");
        assert_eq!(read_model(&again).expect("re-encoded model decodes"), model);
    }
});
