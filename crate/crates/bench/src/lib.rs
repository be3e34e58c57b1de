//! Shared fixtures for the benchmarks.

use std::path::PathBuf;

use authpi::{parse_file, SourceFile};

pub fn fixture_source(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn fixture(name: &str) -> SourceFile {
    parse_file(&fixture_source(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}
