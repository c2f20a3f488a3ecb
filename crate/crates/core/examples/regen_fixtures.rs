//! Rewrites `fixtures/skilldb.json` and `fixtures/annotations.json`.
//!
//! Run with `cargo run -p skillground-core --example regen_fixtures`.

use std::path::Path;

use skillground::fixture::{fixture_annotations, fixture_config, generate_fixture_database};
use skillground::genpipe::QueryLedger;

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let ledger = QueryLedger::new();
    let out = generate_fixture_database(300, &fixture_config(), &ledger).expect("fixture generation");
    assert!(out.is_complete(), "fixture generation was partial: {:?}", out.rejections);
    out.db.save(dir.join("skilldb.json")).expect("write database");
    fixture_annotations(&out.db)
        .save(dir.join("annotations.json"))
        .expect("write annotations");
    println!("{} records, {:?}", out.db.len(), ledger.snapshot());
}
