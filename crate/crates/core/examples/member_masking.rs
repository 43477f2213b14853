//! Mask member profiles per purpose from each member's settings.
//!
//! `cargo run --example member_masking`

use chrono::{TimeZone, Utc};
use maskgate::consent::{build_snapshots, MemoryStore, SnapshotStore};
use maskgate::evaluator::apply_plan;
use maskgate::pipeline::{compile_pair, Inventory};
use maskgate::samples;
use maskgate::value::Relation;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (catalog, assignments) = samples::member_catalog();
    let inv = Inventory::new([samples::member_profiles_schema()], assignments, catalog)?;

    let as_of = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
    let store = MemoryStore::new();
    for snap in build_snapshots(&samples::member_settings(), as_of)? {
        store.save(&snap)?;
    }

    let profiles = samples::member_profiles();
    for purpose in ["ads", "jobs"] {
        let view = compile_pair(&inv, "member_profiles", purpose)?.view;
        println!("-- {purpose}\n{}", view.sql);
        let masked = apply_plan(&view, &profiles, as_of, &store)?;
        for row in &masked.rows {
            println!("{}", Relation::row_to_json(&masked.schema, row));
        }
        println!();
    }
    Ok(())
}
