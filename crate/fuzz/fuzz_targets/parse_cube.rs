#![no_main]

use libfuzzer_sys::fuzz_target;
use lattice_uc::io::{cube_to_json, parse_cube};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(f) = parse_cube(text) {
        let encoded = cube_to_json(&f).expect("parsed cubes are centred");
        assert_eq!(parse_cube(&encoded).expect("re-encoded cube parses"), f);
        // the stencil check must fail cleanly or succeed, never panic
        let _ = f.check_harmonic();
    }
});
