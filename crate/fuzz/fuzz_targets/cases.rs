#![no_main]

use libfuzzer_sys::fuzz_target;
use spdalign::io::{format_case, parse_cases};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cases) = parse_cases(text) {
        let lines: Vec<String> = cases.iter().map(format_case).collect();
        assert_eq!(parse_cases(&lines.join("\n")).expect("formatted cases parse"), cases);
    }
});
