//! Parse, render and resolve field paths against a nested relation.
//!
//! `cargo run --example field_paths`

use maskgate::samples;
use maskgate::schema::{enumerate_paths, resolve_path, FieldPath};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schema = samples::nested_relation_schema();

    for text in [
        "$.col1",
        "$.[?(@.col1='def')]",
        "$.col2.field21",
        "$.col3.[item].[?(@.field31='s1')]",
        "$.col4.[value]",
        "$.col4.[key]",
    ] {
        let path = FieldPath::parse(text)?;
        let binding = resolve_path(&schema, &path)?;
        println!(
            "{:<40} -> {:<45} column={:<5} mask={:?}",
            path.render(),
            binding.resolved_type.to_string(),
            binding.root_attribute.as_deref().unwrap_or("-"),
            binding.mask,
        );
    }

    // Type errors name the failing operator.
    let bad = FieldPath::parse("$.col2.[item]")?;
    println!("\n{}", resolve_path(&schema, &bad).unwrap_err());

    println!("\nevery dereference/unnest path of {}:", schema.name);
    for p in enumerate_paths(&schema) {
        println!("  {p}");
    }
    Ok(())
}
