//! Replays the checked-in fuzz seeds through the same round-trip checks the
//! fuzz targets make, so regressions surface without a fuzzing toolchain.

use std::fs;
use std::path::PathBuf;

use lattice_uc::io::{boundary_to_json, cube_to_json, parse_boundary, parse_cube, parse_polynomial, polynomial_to_json};
use lattice_uc::polyext::{format_rational, parse_rational};

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, String)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            let text = String::from_utf8_lossy(&fs::read(&path).unwrap()).into_owned();
            (path.file_name().unwrap().to_string_lossy().into_owned(), text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn boundary_seeds() {
    let mut ok = 0;
    for (name, text) in seeds("parse_boundary") {
        if let Ok((spec, g)) = parse_boundary(&text) {
            assert_eq!(parse_boundary(&boundary_to_json(&spec, &g)).unwrap(), (spec, g), "{name}");
            ok += 1;
        }
    }
    assert!(ok >= 2);
}

#[test]
fn cube_seeds() {
    for (name, text) in seeds("parse_cube") {
        let f = parse_cube(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(parse_cube(&cube_to_json(&f).unwrap()).unwrap(), f, "{name}");
        let _ = f.check_harmonic();
    }
}

#[test]
fn polynomial_seeds() {
    for (name, text) in seeds("parse_polynomial") {
        let p = parse_polynomial(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(parse_polynomial(&polynomial_to_json(&p)).unwrap(), p, "{name}");
    }
}

#[test]
fn rational_seeds() {
    let mut rejected = 0;
    for (name, text) in seeds("parse_rational") {
        match parse_rational(&text) {
            Ok(q) => assert_eq!(parse_rational(&format_rational(&q)).unwrap(), q, "{name}"),
            Err(_) => rejected += 1,
        }
    }
    // the zero-denominator seed
    assert!(rejected >= 1);
}
