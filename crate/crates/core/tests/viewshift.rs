use std::collections::BTreeSet;

use chrono::{DateTime, Duration, TimeZone, Utc};
use proptest::prelude::*;
use semver::Version;

use maskgate::compiler::{compile_view, ChangeKind, ViewDefinition};
use maskgate::pipeline::Inventory;
use maskgate::policy::{Action, LabelAssignment, LabelAssignments, Policy, PolicyCatalog};
use maskgate::samples;
use maskgate::schema::{RelationSchema, SchemaType};
use maskgate::viewshift::{
    gc_views, get_view, maintain_views, AccessContext, AccessLog, Scope, ViewId, ViewRegistry, ViewShiftError,
};

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 6, 1, 0, 0, 0).unwrap()
}

fn view(relation: &str, purpose: &str, version: Version, created_at: DateTime<Utc>) -> ViewDefinition {
    let schema = RelationSchema::new(relation, [("id", SchemaType::bigint())], Some("id")).unwrap();
    let mut v = compile_view(&schema, &[], purpose).unwrap();
    v.version = version;
    v.created_at = created_at;
    v
}

proptest! {
    #[test]
    fn gc_removes_exactly_the_old_tail(
        ages in prop::collection::vec(prop::collection::vec(0i64..40, 1..7), 1..4),
        keep in 0usize..4,
        min_age in 0i64..30,
    ) {
        let reg = ViewRegistry::in_memory();
        let now = t0() + Duration::days(40);
        for (k, list) in ages.iter().enumerate() {
            for (i, age) in list.iter().enumerate() {
                reg.register(view(&format!("r{k}"), "ads", Version::new(i as u64 + 1, 0, 0), now - Duration::days(*age))).unwrap();
            }
        }
        let removed = gc_views(&reg, keep, Duration::days(min_age), now).unwrap();

        let mut want = BTreeSet::new();
        for (k, list) in ages.iter().enumerate() {
            let protected = keep.max(1);
            for (i, age) in list.iter().enumerate() {
                if i + protected < list.len() && *age > min_age {
                    want.insert(ViewId { relation: format!("r{k}"), purpose: "ads".into(), version: Version::new(i as u64 + 1, 0, 0) });
                }
            }
        }
        prop_assert_eq!(removed.iter().cloned().collect::<BTreeSet<_>>(), want.clone());
        for (k, list) in ages.iter().enumerate() {
            let left = reg.versions(&format!("r{k}"), "ads");
            prop_assert_eq!(left.len() + want.iter().filter(|id| id.relation == format!("r{k}")).count(), list.len());
            prop_assert_eq!(left.last(), Some(&Version::new(list.len() as u64, 0, 0)));
        }
    }
}

#[test]
fn registry_survives_a_reopen() {
    let dir = tempfile::tempdir().unwrap();
    {
        let reg = ViewRegistry::open(dir.path()).unwrap();
        reg.register(view("orders", "ads", Version::new(1, 0, 0), t0())).unwrap();
        reg.register(view("orders", "ads", Version::new(1, 1, 0), t0())).unwrap();
        reg.register(view("orders", "jobs", Version::new(1, 0, 0), t0())).unwrap();
        let stale = reg.register(view("orders", "ads", Version::new(1, 0, 5), t0()));
        assert!(matches!(stale, Err(ViewShiftError::VersionNotIncreasing { .. })));
    }
    let reg = ViewRegistry::open(dir.path()).unwrap();
    assert_eq!(reg.keys(), [("orders".to_string(), "ads".to_string()), ("orders".to_string(), "jobs".to_string())]);
    assert_eq!(reg.versions("orders", "ads"), [Version::new(1, 0, 0), Version::new(1, 1, 0)]);
    assert_eq!(reg.latest("orders", "ads").unwrap(), view("orders", "ads", Version::new(1, 1, 0), t0()));
    assert!(dir.path().join("index.json").is_file());
    assert!(dir.path().join("ads/orders/1.1.0.sql").is_file());

    gc_views(&reg, 1, Duration::zero(), t0() + Duration::days(1)).unwrap();
    let reg = ViewRegistry::open(dir.path()).unwrap();
    assert_eq!(reg.versions("orders", "ads"), [Version::new(1, 1, 0)]);
    assert!(!dir.path().join("ads/orders/1.0.0.json").exists());

    let log_path = dir.path().join("access.jsonl");
    let log = AccessLog::at(&log_path);
    let old = AccessContext::new("ads").pinned(Version::new(1, 0, 0));
    assert!(matches!(get_view("orders", &old, &reg, &log), Err(ViewShiftError::PinnedVersionMissing { .. })));
    let id = get_view("orders", &AccessContext::new("jobs"), &reg, &log).unwrap();
    assert_eq!(id.to_string(), "jobs.orders@1.0.0");
    let entries = AccessLog::read(&log_path).unwrap();
    assert_eq!(entries.len(), 2);
    assert!(entries[0].error.is_some() && entries[0].pinned);
    assert_eq!(entries[1].view.as_deref(), Some("jobs.orders@1.0.0"));
}

fn member_inventory(extra_columns: &[&str], extra_labels: &[(&str, &str)], extra_policy: bool) -> Inventory {
    let base = samples::member_profiles_schema();
    let mut cols: Vec<(String, SchemaType)> =
        base.columns.iter().map(|c| (c.name.clone(), c.data_type.clone())).collect();
    cols.extend(extra_columns.iter().map(|c| (c.to_string(), SchemaType::varchar())));
    let schema = RelationSchema::new("member_profiles", cols, Some("memberId")).unwrap();

    let (catalog, labels) = samples::member_catalog();
    let mut policies = catalog.policies.clone();
    if extra_policy {
        policies.push(Policy::new("emp_ads2", "ads", "employer", "allowEduForAds", Action::Keep, &catalog.attributes).unwrap());
    }
    let mut names = catalog.labels.clone();
    names.insert("misc".into());
    let purposes = catalog.purposes.purposes();
    let catalog = PolicyCatalog::new("2", names, purposes, catalog.attributes.clone(), policies).unwrap();

    let mut entries = labels.entries.clone();
    entries.extend(extra_labels.iter().map(|(p, l)| LabelAssignment::new("member_profiles", *p, *l).unwrap()));
    Inventory::new([schema], LabelAssignments::new(entries), catalog).unwrap()
}

fn changes(inv: &Inventory, reg: &ViewRegistry) -> Vec<(String, ChangeKind)> {
    let scope = Scope { purpose: Some("ads".into()), ..Scope::default() };
    maintain_views(inv, reg, &scope).unwrap().updated.into_iter().map(|u| (u.view, u.change)).collect()
}

#[test]
fn changes_are_classified_by_what_they_break() {
    let reg = ViewRegistry::in_memory();
    let at = |v: &str, k| vec![(format!("ads.member_profiles@{v}"), k)];
    assert_eq!(changes(&member_inventory(&[], &[], false), &reg), at("1.0.0", ChangeKind::Initial));
    assert!(changes(&member_inventory(&[], &[], false), &reg).is_empty());
    // A label without policies changes the inputs, not the view.
    assert_eq!(changes(&member_inventory(&[], &[("$.memberId", "misc")], false), &reg), at("1.0.1", ChangeKind::Patch));
    // An unlabeled column adds output without touching existing columns.
    assert_eq!(
        changes(&member_inventory(&["bio"], &[("$.memberId", "misc")], false), &reg),
        at("1.1.0", ChangeKind::Minor)
    );
    // Dropping it again breaks readers of the column.
    assert_eq!(changes(&member_inventory(&[], &[("$.memberId", "misc")], false), &reg), at("2.0.0", ChangeKind::Major));
    // So does masking more.
    assert_eq!(changes(&member_inventory(&[], &[("$.memberId", "misc")], true), &reg), at("3.0.0", ChangeKind::Major));
    assert_eq!(
        reg.versions("member_profiles", "ads").iter().map(|v| v.to_string()).collect::<Vec<_>>(),
        ["1.0.0", "1.0.1", "1.1.0", "2.0.0", "3.0.0"]
    );
}
