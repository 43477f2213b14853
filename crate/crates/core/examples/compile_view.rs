//! Compile pruned maskings into a schema-preserving view: SQL text plus plan.
//!
//! `cargo run --example compile_view` prints the SQL; add `--plan` for the plan JSON.

use maskgate::compiler::compile_view;
use maskgate::planner::{build_schema_tree, prune_policies};
use maskgate::samples;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schema = samples::table1_schema();
    let pruned = prune_policies(&build_schema_tree(&samples::table1_pairs())).pairs();
    let view = compile_view(&schema, &pruned, "ads")?;

    if std::env::args().any(|a| a == "--plan") {
        println!("{}", serde_json::to_string_pretty(&view.plan)?);
        return Ok(());
    }
    println!("{}", view.sql);
    println!(
        "\n-- {} row filter(s), {} column mask(s)",
        view.row_filter_count(),
        view.column_mask_count()
    );
    Ok(())
}
