//! Random nested relations, label assignments, policies and consent snapshots
//! shared by the property tests and the acceptance harness.

#![allow(dead_code)]

use std::collections::BTreeSet;

use chrono::{TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use maskgate::consent::{build_snapshots, ConsentRecord, ConsentResolver};
use maskgate::evaluator::{oracle_fold, CompiledPlan};
use maskgate::pipeline::{compile_pair, Compiled, Inventory};
use maskgate::policy::{
    Action, AttrClass, AttributeRegistry, LabelAssignment, LabelAssignments, Policy, PolicyCatalog, Purpose,
};
use maskgate::planner::SchemaTreeNode;
use maskgate::schema::{AtomicType, RelationSchema, SchemaType, StructField};
use maskgate::value::{Relation, Row, Value};

pub const CONSENTS: [&str; 4] = ["c1", "c2", "c3", "c4"];
const STRS: [&str; 3] = ["a", "b", "c"];

/// Knobs of the generator.
#[derive(Debug, Clone, Copy)]
pub struct GenConfig {
    pub max_rows: usize,
    pub max_policies: usize,
    /// Allow `IS NULL` in element filters. Masking can turn a filter that
    /// failed into one that holds, so idempotence checks switch it off.
    pub is_null_filters: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_rows: 200,
            max_policies: 6,
            is_null_filters: true,
        }
    }
}

pub struct Case {
    pub seed: u64,
    pub inventory: Inventory,
    pub relation: Relation,
    pub resolver: ConsentResolver,
}

pub fn atomic(rng: &mut ChaCha8Rng) -> SchemaType {
    SchemaType::atomic(
        *[AtomicType::Varchar, AtomicType::Bigint, AtomicType::Boolean, AtomicType::Double]
            .choose(rng)
            .unwrap(),
    )
}

/// A type nested at most `depth` levels.
pub fn gen_type(rng: &mut ChaCha8Rng, depth: usize) -> SchemaType {
    if depth <= 1 {
        return atomic(rng);
    }
    match rng.gen_range(0..5) {
        0 => atomic(rng),
        1 | 2 => {
            let n = rng.gen_range(1..=3);
            SchemaType::Struct {
                fields: (0..n)
                    .map(|i| StructField::new(format!("f{i}"), gen_type(rng, depth - 1)))
                    .collect(),
            }
        }
        3 => {
            // Mostly arrays of structs, which is where element filters apply.
            let element = if rng.gen_bool(0.7) && depth >= 3 {
                let n = rng.gen_range(1..=3);
                SchemaType::Struct {
                    fields: (0..n)
                        .map(|i| StructField::new(format!("f{i}"), gen_type(rng, depth - 2)))
                        .collect(),
                }
            } else {
                gen_type(rng, depth - 1)
            };
            SchemaType::array_of(element)
        }
        _ => {
            let key = if rng.gen_bool(0.5) {
                SchemaType::varchar()
            } else {
                SchemaType::bigint()
            };
            SchemaType::map_of(key, gen_type(rng, depth - 1))
        }
    }
}

pub fn gen_atomic_value(rng: &mut ChaCha8Rng, ty: AtomicType) -> Value {
    match ty {
        AtomicType::Varchar => Value::str(STRS.choose(rng).unwrap()),
        AtomicType::Boolean => Value::Bool(rng.gen()),
        AtomicType::Double => Value::Double([0.5, 1.5, 2.5][rng.gen_range(0..3)]),
        AtomicType::Timestamp => Value::Timestamp(rng.gen_range(0..4) * 1_000_000),
        _ => Value::Int(rng.gen_range(0..4)),
    }
}

pub fn gen_value(rng: &mut ChaCha8Rng, ty: &SchemaType) -> Value {
    if rng.gen_bool(0.1) {
        return Value::Null;
    }
    match ty {
        SchemaType::Atomic { name } => gen_atomic_value(rng, *name),
        SchemaType::Struct { fields } => Value::structure(fields.iter().map(|f| gen_value(rng, &f.data_type)).collect()),
        SchemaType::Array { element } => {
            let n = rng.gen_range(0..=3);
            Value::array((0..n).map(|_| gen_value(rng, element)).collect())
        }
        SchemaType::Map { key, value } => {
            let mut keys: Vec<Value> = match key.as_atomic() {
                Some(AtomicType::Varchar) => STRS.iter().map(|s| Value::str(s)).collect(),
                _ => (0..4).map(Value::Int).collect(),
            };
            keys.shuffle(rng);
            keys.truncate(rng.gen_range(0..=3));
            Value::map(keys.into_iter().map(|k| (k, gen_value(rng, value))).collect())
        }
    }
}

fn literal_for(rng: &mut ChaCha8Rng, ty: AtomicType) -> String {
    match ty {
        AtomicType::Varchar => format!("'{}'", STRS.choose(rng).unwrap()),
        AtomicType::Boolean => rng.gen::<bool>().to_string(),
        AtomicType::Double => ["0.5", "1.5", "2.5"].choose(rng).unwrap().to_string(),
        _ => rng.gen_range(0..4).to_string(),
    }
}

/// Element filter text over one atomic field of a struct element.
pub fn gen_filter(rng: &mut ChaCha8Rng, fields: &[StructField], is_null: bool) -> Option<String> {
    let atomics: Vec<_> = fields.iter().filter_map(|f| Some((&f.name, f.data_type.as_atomic()?))).collect();
    let (name, ty) = atomics.choose(rng)?;
    let pred = match rng.gen_range(0..6) {
        0 if is_null => format!("@.{name} IS NULL"),
        1 if matches!(ty, AtomicType::Varchar | AtomicType::Bigint) => {
            format!("@.{name} IN ({}, {})", literal_for(rng, *ty), literal_for(rng, *ty))
        }
        2 if *ty == AtomicType::Bigint => format!("@.{name} > {}", rng.gen_range(0..3)),
        3 => format!("NOT @.{name} = {}", literal_for(rng, *ty)),
        _ => format!("@.{name} = {}", literal_for(rng, *ty)),
    };
    Some(format!("[?({pred})]"))
}

/// A random walk from the row into one labeled column, or a row-level path.
fn gen_path(rng: &mut ChaCha8Rng, schema: &RelationSchema, cfg: &GenConfig) -> String {
    let mut text = String::from("$");
    match rng.gen_range(0..12) {
        0 => return text,
        1 => {
            let pred = match rng.gen_range(0..3) {
                0 => format!("@.k = {}", rng.gen_range(0..4)),
                1 => format!("@.k IN ({}, {})", rng.gen_range(0..4), rng.gen_range(0..4)),
                _ => format!("@.k BETWEEN 1 AND {}", rng.gen_range(1..4)),
            };
            text.push_str(&format!(".[?({pred})]"));
            if rng.gen_bool(0.5) {
                return text;
            }
        }
        _ => {}
    }
    let labeled: Vec<_> = schema.columns.iter().filter(|c| c.name.starts_with('c')).collect();
    let col = labeled.choose(rng).unwrap();
    text.push('.');
    text.push_str(&col.name);
    let mut ty = &col.data_type;
    loop {
        if rng.gen_bool(0.3) {
            return text;
        }
        match ty {
            SchemaType::Atomic { .. } => return text,
            SchemaType::Struct { fields } => {
                let f = fields.choose(rng).unwrap();
                text.push('.');
                text.push_str(&f.name);
                ty = &f.data_type;
            }
            SchemaType::Array { element } | SchemaType::Map { value: element, .. } => {
                if let SchemaType::Map { .. } = ty {
                    if rng.gen_bool(0.25) {
                        text.push_str(".[key]");
                        return text;
                    }
                    text.push_str(".[value]");
                } else {
                    text.push_str(".[item]");
                }
                if let SchemaType::Struct { fields } = element.as_ref() {
                    if rng.gen_bool(0.5) {
                        if let Some(f) = gen_filter(rng, fields, cfg.is_null_filters) {
                            text.push('.');
                            text.push_str(&f);
                        }
                    }
                }
                ty = element;
            }
        }
    }
}

fn gen_condition(rng: &mut ChaCha8Rng) -> (String, Action) {
    let mut names: Vec<&str> = CONSENTS.to_vec();
    names.shuffle(rng);
    match rng.gen_range(0..20) {
        0 | 1 => (format!("{} OR {}", names[0], names[1]), Action::Keep),
        2 => (format!("{} = false", names[0]), Action::Keep),
        3 => (format!("NOT ({} AND {})", names[0], names[1]), Action::Keep),
        4 | 5 => (format!("{} = false", names[0]), Action::Mask),
        _ => {
            let n = rng.gen_range(1..=3);
            (names[..n].join(" AND "), Action::Keep)
        }
    }
}

pub fn registry() -> AttributeRegistry {
    AttributeRegistry::from_pairs(CONSENTS.map(|c| (c, AttrClass::Consent))).unwrap()
}

pub fn gen_schema(rng: &mut ChaCha8Rng) -> RelationSchema {
    let mut columns = vec![("id".to_string(), SchemaType::bigint()), ("k".to_string(), SchemaType::bigint())];
    for i in 0..rng.gen_range(2..=4) {
        columns.push((format!("c{i}"), gen_type(rng, 4)));
    }
    RelationSchema::new("R", columns, Some("id")).unwrap()
}

pub fn gen_rows(rng: &mut ChaCha8Rng, schema: &RelationSchema, n: usize) -> Vec<Row> {
    (0..n)
        .map(|_| {
            schema
                .columns
                .iter()
                .map(|c| match c.name.as_str() {
                    "id" if rng.gen_bool(0.05) => Value::Null,
                    "id" => Value::Int(rng.gen_range(0..48)),
                    _ => gen_value(rng, &c.data_type),
                })
                .collect()
        })
        .collect()
}

/// Consent snapshots over subjects 0..40; ids 40..48 fall outside the universe.
pub fn gen_resolver(rng: &mut ChaCha8Rng) -> ConsentResolver {
    let mut records = Vec::new();
    for c in CONSENTS {
        let rate = *[0.0, 0.3, 0.5, 0.8, 1.0].choose(rng).unwrap();
        for s in 0..40 {
            records.push(ConsentRecord::new(s, c, rng.gen_bool(rate)));
        }
    }
    let at = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
    ConsentResolver::from_snapshots(build_snapshots(&records, at).unwrap())
}

/// Labels, policies and a purpose `p` inheriting from `base`.
pub fn gen_inventory(rng: &mut ChaCha8Rng, schema: &RelationSchema, cfg: &GenConfig) -> Inventory {
    let labels: Vec<String> = (0..4).map(|i| format!("l{i}")).collect();
    let mut assignments = Vec::new();
    let mut seen = BTreeSet::new();
    for _ in 0..rng.gen_range(1..=5) {
        let path = gen_path(rng, schema, cfg);
        let label = labels.choose(rng).unwrap().clone();
        if seen.insert((path.clone(), label.clone())) {
            assignments.push(LabelAssignment::new("R", &path, label).unwrap());
        }
    }
    let reg = registry();
    let policies: Vec<Policy> = (0..rng.gen_range(0..=cfg.max_policies))
        .map(|i| {
            let (cond, action) = gen_condition(rng);
            let purpose = if rng.gen_bool(0.7) { "p" } else { "base" };
            Policy::new(format!("p{i}"), purpose, labels.choose(rng).unwrap(), &cond, action, &reg).unwrap()
        })
        .collect();
    let catalog = PolicyCatalog::new(
        "1",
        labels,
        [Purpose::new("base", Vec::<String>::new()), Purpose::new("p", ["base"])],
        reg,
        policies,
    )
    .unwrap();
    Inventory::new([schema.clone()], LabelAssignments::new(assignments), catalog).unwrap()
}

pub fn gen_case(seed: u64, cfg: &GenConfig) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = gen_schema(&mut rng);
    let inventory = gen_inventory(&mut rng, &schema, cfg);
    let n = rng.gen_range(0..=cfg.max_rows);
    let relation = Relation::new(schema.clone(), gen_rows(&mut rng, &schema, n)).unwrap();
    let resolver = gen_resolver(&mut rng);
    Case {
        seed,
        inventory,
        relation,
        resolver,
    }
}

/// Outcome of running one case through both implementations.
pub struct Checked {
    pub compiled: Compiled,
    pub planned: Relation,
    pub oracle: Relation,
}

pub fn run_case(case: &Case) -> Checked {
    let compiled = compile_pair(&case.inventory, "R", "p").unwrap();
    let plan = CompiledPlan::new(&compiled.view).unwrap();
    let (planned, _) = plan.apply(&case.relation, &case.resolver).unwrap();
    let oracle = oracle_fold(&case.relation, &compiled.pairs, &case.resolver).unwrap();
    Checked {
        compiled,
        planned,
        oracle,
    }
}

/// Output schema equals the input schema and every row conforms to it.
pub fn schema_preserved(input: &Relation, view_schema: &RelationSchema, output: &Relation) -> bool {
    output.schema == input.schema && *view_schema == input.schema && output.check().is_ok()
}

pub fn consent_set(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Smallest number of candidates whose union covers `delta`, by exhaustive search.
pub fn brute_force_cover(delta: &BTreeSet<String>, candidates: &[BTreeSet<String>]) -> Option<usize> {
    let n = candidates.len();
    (0u32..1 << n)
        .filter(|mask| {
            let union: BTreeSet<&String> = (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .flat_map(|i| candidates[i].iter())
                .collect();
            delta.iter().all(|c| union.contains(c))
        })
        .map(|mask| mask.count_ones() as usize)
        .min()
}

pub fn harmonic(n: usize) -> f64 {
    (1..=n).map(|i| 1.0 / i as f64).sum()
}

/// Nodes of a pruned tree where pruning lost coverage or dropped a policy it
/// may not drop. Checked against the consent sets directly, not via the planner.
pub fn coverage_violations(pruned: &SchemaTreeNode) -> Vec<String> {
    fn walk(node: &SchemaTreeNode, path: &str, ancestors: &BTreeSet<String>, out: &mut Vec<String>) {
        let here = format!("{path}.{}", node.key);
        let retained: BTreeSet<String> = node
            .policies
            .iter()
            .filter_map(|p| p.coverable_consents())
            .flatten()
            .collect();
        let mut original = retained.clone();
        for p in &node.pruned {
            match p.coverable_consents() {
                Some(cs) => original.extend(cs),
                None => out.push(format!("{here}: non-coverable {} pruned", p.id)),
            }
        }
        let missing: Vec<_> = original
            .iter()
            .filter(|c| !retained.contains(*c) && !ancestors.contains(*c))
            .collect();
        if !missing.is_empty() {
            out.push(format!("{here}: {missing:?} no longer covered"));
        }
        let below: BTreeSet<String> = ancestors.union(&retained).cloned().collect();
        for c in &node.children {
            walk(c, &here, &below, out);
        }
    }
    let mut out = Vec::new();
    walk(pruned, "", &BTreeSet::new(), &mut out);
    out
}

/// `id BIGINT, email VARCHAR` plus `extra` VARCHAR columns.
pub fn contact_table(name: &str, extra: &[&str]) -> RelationSchema {
    let mut cols = vec![("id".to_string(), SchemaType::bigint()), ("email".to_string(), SchemaType::varchar())];
    cols.extend(extra.iter().map(|c| (c.to_string(), SchemaType::varchar())));
    RelationSchema::new(name, cols, Some("id")).unwrap()
}

/// Three tables whose `email` (and any `phone`) columns carry label `contact`;
/// one ads policy on `contact` per condition, plus an unrelated jobs policy.
pub fn contact_inventory(schemas: Vec<RelationSchema>, conditions: &[&str]) -> Inventory {
    let reg = AttributeRegistry::from_pairs([
        ("allowContact", AttrClass::Consent),
        ("allowMarketing", AttrClass::Consent),
        ("allowJobs", AttrClass::Consent),
    ])
    .unwrap();
    let mut policies: Vec<Policy> = conditions
        .iter()
        .enumerate()
        .map(|(i, c)| Policy::new(format!("contact{i}"), "ads", "contact", c, Action::Keep, &reg).unwrap())
        .collect();
    policies.push(Policy::new("name_jobs", "jobs", "name", "allowJobs", Action::Keep, &reg).unwrap());
    let catalog = PolicyCatalog::new(
        "1",
        ["contact", "name"].map(String::from),
        [Purpose::new("ads", Vec::<String>::new()), Purpose::new("jobs", Vec::<String>::new())],
        reg,
        policies,
    )
    .unwrap();
    let mut assignments = Vec::new();
    for s in &schemas {
        for c in s.column_names() {
            let label = match c {
                "email" | "phone" => "contact",
                "name" => "name",
                _ => continue,
            };
            assignments.push(LabelAssignment::new(s.name.clone(), &format!("$.{c}"), label).unwrap());
        }
    }
    Inventory::new(schemas, LabelAssignments::new(assignments), catalog).unwrap()
}

pub fn contact_tables() -> Vec<RelationSchema> {
    vec![
        contact_table("orders", &[]),
        contact_table("profiles", &["name"]),
        contact_table("events", &[]),
    ]
}
