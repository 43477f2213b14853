//! Build the schema tree of six overlapping maskings and drop the redundant ones.
//!
//! `cargo run --example pruning`

use maskgate::planner::{build_schema_tree, prune_policies};
use maskgate::samples;

fn main() {
    let pairs = samples::table1_pairs();
    println!("matched maskings:");
    for (path, policy) in &pairs {
        println!("  {:<38} {}  consents={:?}", path.render(), policy.id, policy.consents());
    }

    let tree = build_schema_tree(&pairs);
    println!("\nschema tree:\n{}", tree.dump());

    let pruned = prune_policies(&tree);
    println!("after pruning:\n{}", pruned.dump());
    println!("retained:");
    for (path, policy) in pruned.pairs() {
        println!("  {:<38} {}", path.render(), policy.id);
    }
    println!("pruned:");
    for (path, policy) in pruned.pruned_pairs() {
        println!("  {:<38} {}", path.render(), policy.id);
    }
}
