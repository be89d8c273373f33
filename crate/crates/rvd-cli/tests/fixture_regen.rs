//! Regenerates the checked-in fixture corpus. The generator is
//! deterministic, so reruns are byte-identical; run it only when the
//! record format or the fixture design changes:
//!
//! ```text
//! cargo test -p rvd-cli --test fixture_regen -- --ignored
//! ```

mod common;

use std::fs;

#[test]
#[ignore = "writes into tests/fixtures; run explicitly after format changes"]
fn regenerate_table1_fixture() {
    let root = common::fixture_dir();
    let records_dir = root.join("records");
    if records_dir.exists() {
        fs::remove_dir_all(&records_dir).unwrap();
    }
    fs::create_dir_all(&root).unwrap();
    let docs = common::fixture_corpus_docs();
    common::write_corpus_files(&root, &docs);

    // A few labels so label loading is exercised by the fixture too.
    let mut labels = String::new();
    for id in (0..docs.len()).step_by(10) {
        labels.push_str(&format!("{id}:triage\n"));
    }
    fs::write(root.join("labels.txt"), labels).unwrap();

    let count = fs::read_dir(&records_dir).unwrap().count();
    assert_eq!(count, 110);
}
