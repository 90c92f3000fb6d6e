#![no_main]

use libfuzzer_sys::fuzz_target;
use lattice_uc_cli::Report;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(r) = Report::from_json(text) {
        let _ = r.to_csv();
        // rendering is a fixed point after one pass
        let once = r.to_json();
        let back = Report::from_json(&once).expect("rendered report parses");
        assert_eq!(back.to_json(), once);
    }
});
