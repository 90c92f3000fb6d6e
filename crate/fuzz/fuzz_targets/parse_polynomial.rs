#![no_main]

use libfuzzer_sys::fuzz_target;
use lattice_uc::io::{parse_polynomial, polynomial_to_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = parse_polynomial(text) {
        assert_eq!(parse_polynomial(&polynomial_to_json(&p)).expect("round trip"), p);
    }
});
