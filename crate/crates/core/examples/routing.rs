//! Keep views current as catalogs change and route table reads to them.
//!
//! `cargo run --example routing`

use chrono::{Duration, Utc};
use maskgate::pipeline::Inventory;
use maskgate::policy::{Action, AttrClass, AttributeRegistry, LabelAssignment, LabelAssignments, Policy, PolicyCatalog, Purpose};
use maskgate::schema::{RelationSchema, SchemaType};
use maskgate::viewshift::{gc_views, get_view, maintain_views, AccessContext, AccessLog, Scope, ViewRegistry};

fn table(name: &str, extra: &[&str]) -> RelationSchema {
    let mut cols = vec![("id".to_string(), SchemaType::bigint()), ("email".to_string(), SchemaType::varchar())];
    cols.extend(extra.iter().map(|c| (c.to_string(), SchemaType::varchar())));
    RelationSchema::new(name, cols, Some("id")).unwrap()
}

fn inventory(schemas: Vec<RelationSchema>, conditions: &[&str]) -> Inventory {
    let reg = AttributeRegistry::from_pairs([("allowContact", AttrClass::Consent), ("allowMarketing", AttrClass::Consent)]).unwrap();
    let policies = conditions
        .iter()
        .enumerate()
        .map(|(i, c)| Policy::new(format!("contact{i}"), "ads", "contact", c, Action::Keep, &reg).unwrap())
        .collect::<Vec<_>>();
    let catalog = PolicyCatalog::new(
        "1",
        ["contact".to_string()],
        [Purpose::new("ads", Vec::<String>::new())],
        reg,
        policies,
    )
    .unwrap();
    let mut assignments = Vec::new();
    for s in &schemas {
        for c in s.column_names().filter(|c| *c == "email" || *c == "phone") {
            assignments.push(LabelAssignment::new(s.name.clone(), &format!("$.{c}"), "contact").unwrap());
        }
    }
    Inventory::new(schemas, LabelAssignments::new(assignments), catalog).unwrap()
}

fn report(step: &str, inv: &Inventory, registry: &ViewRegistry) {
    let r = maintain_views(inv, registry, &Scope::default()).unwrap();
    let updated: Vec<_> = r.updated.iter().map(|u| format!("{} ({:?})", u.view, u.change)).collect();
    println!("{step:<28} updated={updated:?} unchanged={}", r.unchanged);
}

fn main() {
    let registry = ViewRegistry::in_memory();
    let log = AccessLog::in_memory();
    let tables = || vec![table("orders", &[]), table("profiles", &["name"]), table("events", &[])];

    report("initial", &inventory(tables(), &["allowContact"]), &registry);
    report("rerun", &inventory(tables(), &["allowContact"]), &registry);
    report("new policy on `contact`", &inventory(tables(), &["allowContact", "allowMarketing"]), &registry);
    let mut grown = tables();
    grown[1] = table("profiles", &["name", "phone"]);
    report("profiles.phone labeled", &inventory(grown, &["allowContact", "allowMarketing"]), &registry);

    let versions: Vec<String> = registry.versions("profiles", "ads").iter().map(|v| v.to_string()).collect();
    println!("\nprofiles versions: {}", versions.join(", "));
    let latest = get_view("profiles", &AccessContext::new("ads"), &registry, &log).unwrap();
    let pinned = get_view("profiles", &AccessContext::new("ads").pinned("1.0.0".parse().unwrap()), &registry, &log).unwrap();
    println!("latest: {latest}\npinned: {pinned}");
    println!("jobs:   {}", get_view("profiles", &AccessContext::new("jobs"), &registry, &log).unwrap_err());

    let removed = gc_views(&registry, 1, Duration::zero(), Utc::now() + Duration::seconds(1)).unwrap();
    println!("\ngc removed {} version(s)", removed.len());
    let ctx = AccessContext::new("ads").pinned("1.0.0".parse().unwrap());
    println!("pinned after gc: {}", get_view("profiles", &ctx, &registry, &log).unwrap_err());
    println!("access log entries: {}", log.entries().len());
}
