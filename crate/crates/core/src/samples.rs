//! Small fixed datasets used by the examples, tests and the CLI `validate` self-check.

use crate::condition::AttrClass;
use crate::consent::ConsentRecord;
use crate::policy::{
    Action, AttributeRegistry, LabelAssignment, LabelAssignments, Policy, PolicyCatalog, Purpose,
};
use crate::schema::{FieldPath, RelationSchema, SchemaType};
use crate::value::{Relation, Value};

fn nested_columns(col1: SchemaType) -> Vec<(&'static str, SchemaType)> {
    vec![
        ("col1", col1),
        (
            "col2",
            SchemaType::struct_of([("field21", SchemaType::bigint()), ("field22", SchemaType::varchar())]),
        ),
        (
            "col3",
            SchemaType::array_of(SchemaType::struct_of([
                ("field31", SchemaType::varchar()),
                ("field32", SchemaType::double()),
            ])),
        ),
        (
            "col4",
            SchemaType::map_of(
                SchemaType::varchar(),
                SchemaType::array_of(SchemaType::struct_of([
                    ("field41", SchemaType::varchar()),
                    ("field42", SchemaType::boolean()),
                ])),
            ),
        ),
    ]
}

/// Relation `R` with a struct, an array of structs and a map of arrays of structs.
pub fn nested_relation_schema() -> RelationSchema {
    RelationSchema::new("R", nested_columns(SchemaType::varchar()), None).expect("valid schema")
}

fn elem3(a: &str, b: f64) -> Value {
    Value::structure(vec![Value::str(a), Value::Double(b)])
}

fn elem4(a: &str, b: bool) -> Value {
    Value::structure(vec![Value::str(a), Value::Bool(b)])
}

/// The three rows `abc`, `def`, `ghj` of `R`.
pub fn nested_relation() -> Relation {
    let rows = vec![
        vec![
            Value::str("abc"),
            Value::structure(vec![Value::Int(123), Value::str("foo")]),
            Value::array(vec![elem3("s1", 113.2)]),
            Value::Null,
        ],
        vec![
            Value::str("def"),
            Value::structure(vec![Value::Int(243), Value::str("bar")]),
            Value::Null,
            Value::Null,
        ],
        vec![
            Value::str("ghj"),
            Value::structure(vec![Value::Int(123), Value::str("bar")]),
            Value::array(vec![elem3("s1", 345.2), elem3("s3", 212.0)]),
            Value::map(vec![
                (Value::str("k1"), Value::array(vec![elem4("v1", true), elem4("v2", false)])),
                (Value::str("k2"), Value::Null),
            ]),
        ],
    ]
    .into_iter()
    .collect();
    Relation::new(nested_relation_schema(), rows).expect("rows conform")
}

/// `R` with `col1` holding numeric data-subject ids.
pub fn table1_schema() -> RelationSchema {
    RelationSchema::new("R", nested_columns(SchemaType::bigint()), Some("col1")).expect("valid schema")
}

/// `R` rows with subject ids 1..=3 in place of the string keys.
pub fn table1_relation() -> Relation {
    let mut rel = nested_relation();
    rel.schema = table1_schema();
    for (i, row) in rel.rows.iter_mut().enumerate() {
        row[0] = Value::Int(i as i64 + 1);
    }
    rel
}

pub fn table1_registry() -> AttributeRegistry {
    AttributeRegistry::from_pairs((1..=4).map(|i| (format!("consent{i}"), AttrClass::Consent)))
        .expect("consent classes")
}

/// The six (path, policy) maskings used to illustrate deduplication, in table order.
pub fn table1_pairs() -> Vec<(FieldPath, Policy)> {
    let reg = table1_registry();
    let pol = |id: &str, label: &str, cond: &str| {
        Policy::new(id, "ads", label, cond, Action::Keep, &reg).expect("valid policy")
    };
    let p1 = pol("p1", "l1", "consent1");
    let p2 = pol("p2", "l2", "consent2");
    let p3 = pol("p3", "l3", "consent3 AND consent4");
    let p4 = pol("p4", "l3", "consent3");
    let path = |t: &str| FieldPath::parse(t).expect("valid path");
    vec![
        (path("$"), p1.clone()),
        (path("$.col2.field21"), p1),
        (path("$.col3"), p2.clone()),
        (path("$.col3.[item].[?(@.field31='s1')]"), p2),
        (path("$.col4.[value]"), p3),
        (path("$.col4.[value]"), p4),
    ]
}

/// Catalog and label assignments that make `match_policies` produce [`table1_pairs`].
pub fn table1_catalog() -> (PolicyCatalog, LabelAssignments) {
    let pairs = table1_pairs();
    let mut policies: Vec<Policy> = Vec::new();
    let mut assignments: Vec<LabelAssignment> = Vec::new();
    for (path, policy) in pairs {
        if !policies.iter().any(|p| p.id == policy.id) {
            policies.push(policy.clone());
        }
        if !assignments.iter().any(|a| a.path == path && a.label == policy.label) {
            assignments.push(LabelAssignment {
                relation: "R".into(),
                path,
                label: policy.label.clone(),
            });
        }
    }
    let catalog = PolicyCatalog::new(
        "1",
        ["l1", "l2", "l3"].map(String::from),
        [Purpose::new("ads", Vec::<String>::new())],
        table1_registry(),
        policies,
    )
    .expect("valid catalog");
    (catalog, LabelAssignments::new(assignments))
}

/// `T1(id, col1, col2)` keyed by data-subject id.
pub fn t1_schema() -> RelationSchema {
    RelationSchema::new(
        "T1",
        [
            ("id", SchemaType::bigint()),
            ("col1", SchemaType::varchar()),
            ("col2", SchemaType::varchar()),
        ],
        Some("id"),
    )
    .expect("valid schema")
}

pub fn member_profiles_schema() -> RelationSchema {
    RelationSchema::new(
        "member_profiles",
        [
            ("memberId", SchemaType::bigint()),
            ("education", SchemaType::varchar()),
            ("employer", SchemaType::varchar()),
        ],
        Some("memberId"),
    )
    .expect("valid schema")
}

pub fn member_profiles() -> Relation {
    let row = |id: i64, edu: &str, emp: &str| vec![Value::Int(id), Value::str(edu), Value::str(emp)];
    Relation::new(
        member_profiles_schema(),
        vec![
            row(123, "Stanford", "Contoso"),
            row(234, "MIT", "Initech"),
            row(345, "CMU", "Globex"),
        ],
    )
    .expect("rows conform")
}

/// Settings of each member: 123 and 234 disagree per purpose, 345 allows everything.
pub fn member_settings() -> Vec<ConsentRecord> {
    let mut out = Vec::new();
    for (id, edu_ads, emp_ads, edu_jobs, emp_jobs) in [
        (123, false, true, true, false),
        (234, true, false, false, true),
        (345, true, true, true, true),
    ] {
        for (name, value) in [
            ("allowEduForAds", edu_ads),
            ("allowEmpForAds", emp_ads),
            ("allowEduForJobs", edu_jobs),
            ("allowEmpForJobs", emp_jobs),
        ] {
            out.push(ConsentRecord::new(id, name, value));
        }
    }
    out
}

pub fn member_catalog() -> (PolicyCatalog, LabelAssignments) {
    let consents = ["allowEduForAds", "allowEmpForAds", "allowEduForJobs", "allowEmpForJobs"];
    let reg = AttributeRegistry::from_pairs(consents.map(|c| (c, AttrClass::Consent))).expect("classes");
    let pol = |id: &str, purpose: &str, label: &str, cond: &str| {
        Policy::new(id, purpose, label, cond, Action::Keep, &reg).expect("valid policy")
    };
    let policies = vec![
        pol("edu_ads", "ads", "education", "allowEduForAds = true"),
        pol("emp_ads", "ads", "employer", "allowEmpForAds = true"),
        pol("edu_jobs", "jobs", "education", "allowEduForJobs = true"),
        pol("emp_jobs", "jobs", "employer", "allowEmpForJobs = true"),
    ];
    let catalog = PolicyCatalog::new(
        "1",
        ["education", "employer"].map(String::from),
        [
            Purpose::new("ads", Vec::<String>::new()),
            Purpose::new("jobs", Vec::<String>::new()),
        ],
        reg,
        policies,
    )
    .expect("valid catalog");
    let assignments = LabelAssignments::new(vec![
        LabelAssignment::new("member_profiles", "$.education", "education").expect("path"),
        LabelAssignment::new("member_profiles", "$.employer", "employer").expect("path"),
    ]);
    (catalog, assignments)
}
