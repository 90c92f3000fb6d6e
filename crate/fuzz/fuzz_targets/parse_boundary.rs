#![no_main]

use libfuzzer_sys::fuzz_target;
use lattice_uc::io::{boundary_to_json, parse_boundary};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok((spec, g)) = parse_boundary(text) {
        let again = parse_boundary(&boundary_to_json(&spec, &g)).expect("re-encoded boundary parses");
        assert_eq!(again, (spec, g));
    }
});
