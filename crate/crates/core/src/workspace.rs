//! On-disk workspace layout and the commands the CLI exposes over it.
//!
//! Every command returns a JSON summary; the binary only parses flags and prints.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, Utc};
use semver::Version;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use crate::consent::{
    build_snapshots, read_consent_csv, read_consent_jsonl, snapshot_gc, FsStore, SnapshotSummary,
};
use crate::evaluator::{apply_plan_with, oracle_fold};
use crate::pipeline::{compile_pair, Inventory};
use crate::policy::{AttributeRegistry, LabelAssignments, PolicyCatalog};
use crate::schema::RelationSchema;
use crate::value::Relation;
use crate::viewshift::{
    gc_views, get_view, maintain_views, pinned_behind, AccessContext, AccessLog, Identities, Scope, ViewId,
    ViewRegistry,
};
use crate::Error;

/// Retention knobs used by `gc` when no flag overrides them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GcDefaults {
    pub keep_latest: usize,
    pub min_age_days: i64,
    pub snapshot_retention_days: i64,
}

impl Default for GcDefaults {
    fn default() -> Self {
        GcDefaults {
            keep_latest: 3,
            min_age_days: 7,
            snapshot_retention_days: 30,
        }
    }
}

/// Paths of a workspace, relative to its root unless absolute. Read from an
/// optional `workspace.toml`; anything missing takes the default below.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkspaceConfig {
    pub schemas: PathBuf,
    pub labels: PathBuf,
    pub policies: PathBuf,
    pub consents: PathBuf,
    pub views: PathBuf,
    pub access_log: PathBuf,
    pub identities: PathBuf,
    pub gc: GcDefaults,
}

impl Default for WorkspaceConfig {
    fn default() -> Self {
        WorkspaceConfig {
            schemas: "schemas".into(),
            labels: "labels.json".into(),
            policies: "policies.json".into(),
            consents: "consents".into(),
            views: "views".into(),
            access_log: "access.log.jsonl".into(),
            identities: "identities.json".into(),
            gc: GcDefaults::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Workspace {
    pub root: PathBuf,
    pub config: WorkspaceConfig,
}

fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

impl Workspace {
    /// Opens the workspace at `root`, creating missing store directories.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, Error> {
        let root = root.into();
        if !root.is_dir() {
            return Err(Error::Config(format!("workspace {} is not a directory", root.display())));
        }
        let toml_path = root.join("workspace.toml");
        let config = if toml_path.is_file() {
            toml::from_str(&read_text(&toml_path)?).map_err(|e| Error::Config(format!("workspace.toml: {e}")))?
        } else {
            WorkspaceConfig::default()
        };
        let ws = Workspace { root, config };
        for dir in [ws.path(&ws.config.consents), ws.path(&ws.config.views)] {
            fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        }
        Ok(ws)
    }

    pub fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    /// Every `*.json` schema in the schema directory.
    pub fn schemas(&self) -> Result<Vec<RelationSchema>, Error> {
        let dir = self.path(&self.config.schemas);
        if !dir.is_dir() {
            return Ok(Vec::new());
        }
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        files
            .iter()
            .map(|f| {
                RelationSchema::from_json(&read_text(f)?)
                    .map_err(|e| Error::Config(format!("{}: {e}", f.display())))
            })
            .collect()
    }

    pub fn catalog(&self) -> Result<PolicyCatalog, Error> {
        let path = self.path(&self.config.policies);
        if !path.is_file() {
            return Ok(PolicyCatalog::new("0", [], [], AttributeRegistry::default(), [])?);
        }
        Ok(PolicyCatalog::from_json(&read_text(&path)?)?)
    }

    pub fn assignments(&self) -> Result<LabelAssignments, Error> {
        let path = self.path(&self.config.labels);
        if !path.is_file() {
            return Ok(LabelAssignments::default());
        }
        Ok(LabelAssignments::from_json(&read_text(&path)?)?)
    }

    /// Schemas, labels and policies, validated against each other.
    pub fn inventory(&self) -> Result<Inventory, Error> {
        Ok(Inventory::new(self.schemas()?, self.assignments()?, self.catalog()?)?)
    }

    pub fn registry(&self) -> Result<ViewRegistry, Error> {
        Ok(ViewRegistry::open(self.path(&self.config.views))?)
    }

    pub fn store(&self) -> Result<FsStore, Error> {
        Ok(FsStore::open(self.path(&self.config.consents))?)
    }

    pub fn access_log(&self) -> AccessLog {
        AccessLog::at(self.path(&self.config.access_log))
    }

    pub fn identities(&self) -> Result<Identities, Error> {
        let path = self.path(&self.config.identities);
        if !path.is_file() {
            return Ok(Identities::new());
        }
        serde_json::from_str(&read_text(&path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Checks schemas, labels and policies; counts what was found.
pub fn cmd_validate(ws: &Workspace) -> Result<Json, Error> {
    let inv = ws.inventory()?;
    Ok(json!({
        "relations": inv.schemas.len(),
        "labels": inv.catalog.labels.len(),
        "purposes": inv.catalog.purposes.names().count(),
        "policies": inv.catalog.policies.len(),
        "assignments": inv.assignments.entries.len(),
    }))
}

/// Compiles and registers views in scope, then summarizes the latest view of
/// each. Pair failures are listed under `errors`; the command then fails.
pub fn cmd_compile(ws: &Workspace, relation: Option<&str>, purpose: Option<&str>) -> Result<Json, Error> {
    let inv = ws.inventory()?;
    if let Some(r) = relation {
        if !inv.schemas.contains_key(r) {
            return Err(Error::Config(format!("unknown relation `{r}`")));
        }
    }
    let scope = Scope {
        relation: relation.map(str::to_string),
        purpose: purpose.map(str::to_string),
    };
    let registry = ws.registry()?;
    let report = maintain_views(&inv, &registry, &scope)?;
    let mut views = Vec::new();
    for (rel, pur) in registry.keys() {
        if scope.relation.as_ref().is_some_and(|r| *r != rel) || scope.purpose.as_ref().is_some_and(|p| *p != pur) {
            continue;
        }
        let latest = registry.latest(&rel, &pur).expect("key has a version");
        let mut entry = json!({
            "view": latest.id(),
            "version": latest.version.to_string(),
            "row_filters": latest.row_filter_count(),
            "column_masks": latest.column_mask_count(),
            "updated": report.updated.iter().any(|u| u.view == latest.id()),
        });
        if let Ok(c) = compile_pair(&inv, &rel, &pur) {
            entry["matched"] = json!(c.pairs.len());
            entry["pruned"] = json!(c.pruned_tree.pruned_count());
        }
        views.push(entry);
    }
    let out = json!({ "views": views, "errors": report.errors });
    if let Some(first) = report.errors.first() {
        return Err(Error::PairFailures {
            first: format!("{} for {}: {}", first.relation, first.purpose, first.error),
            report: out,
        });
    }
    Ok(out)
}

/// Parses `purpose.relation@version`, or `purpose.relation` for the latest.
pub fn parse_view_id(text: &str, registry: &ViewRegistry) -> Result<ViewId, Error> {
    let (name, version) = match text.split_once('@') {
        Some((n, v)) => (n, Some(Version::parse(v).map_err(|e| Error::Config(format!("view `{text}`: {e}")))?)),
        None => (text, None),
    };
    let (purpose, relation) = name
        .split_once('.')
        .ok_or_else(|| Error::Config(format!("view `{text}` is not `purpose.relation[@version]`")))?;
    let version = match version {
        Some(v) => v,
        None => registry
            .latest(relation, purpose)
            .map(|v| v.version)
            .ok_or_else(|| Error::Config(format!("no view `{text}`")))?,
    };
    Ok(ViewId {
        relation: relation.to_string(),
        purpose: purpose.to_string(),
        version,
    })
}

pub struct ApplyArgs<'a> {
    pub view: &'a str,
    pub input: &'a Path,
    pub output: Option<&'a Path>,
    pub access_time: Option<DateTime<Utc>>,
    /// Also run the reference masking over the current catalog and compare.
    pub oracle: bool,
}

/// Runs a registered view over a JSON-lines file.
pub fn cmd_apply(ws: &Workspace, args: &ApplyArgs) -> Result<Json, Error> {
    let registry = ws.registry()?;
    let id = parse_view_id(args.view, &registry)?;
    let view = registry
        .get(&id)
        .ok_or_else(|| Error::Config(format!("no view `{id}`")))?;
    let file = fs::File::open(args.input).map_err(|e| Error::Io(format!("{}: {e}", args.input.display())))?;
    let rel = Relation::read_jsonl(view.schema.clone(), BufReader::new(file))?;
    let access_time = args.access_time.unwrap_or_else(Utc::now);
    let store = ws.store()?;
    let resolver = crate::consent::ConsentResolver::bind(&store, access_time, view.consents().iter().map(String::as_str))?;
    let (out, stats) = apply_plan_with(&view, &rel, &resolver)?;
    if let Some(path) = args.output {
        let f = fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        out.write_jsonl(BufWriter::new(f))?;
    }
    let mut summary = json!({
        "view": id.to_string(),
        "access_time": access_time.to_rfc3339(),
        "rows_in": stats.rows_in,
        "rows_out": stats.rows_out,
        "masks": stats.masks_fired.iter().map(|(p, n)| json!({"path": p, "count": n})).collect::<Vec<_>>(),
    });
    if args.oracle {
        let inv = ws.inventory()?;
        let compiled = compile_pair(&inv, &id.relation, &id.purpose)?;
        let resolver = crate::consent::ConsentResolver::bind(
            &store,
            access_time,
            compiled.pairs.iter().flat_map(|(_, p)| p.consents().iter().map(String::as_str)),
        )?;
        let expected = oracle_fold(&rel, &compiled.pairs, &resolver)?;
        summary["oracle_equal"] = json!(expected == out);
    }
    Ok(summary)
}

/// Builds one snapshot per consent from a CSV or JSON-lines consent table.
pub fn cmd_bitmap_build(ws: &Workspace, input: &Path, as_of: Option<DateTime<Utc>>) -> Result<Json, Error> {
    let file = fs::File::open(input).map_err(|e| Error::Io(format!("{}: {e}", input.display())))?;
    let records = if input.extension().is_some_and(|x| x == "csv") {
        read_consent_csv(file)?
    } else {
        read_consent_jsonl(BufReader::new(file))?
    };
    let as_of = as_of.unwrap_or_else(Utc::now);
    let snaps = build_snapshots(&records, as_of)?;
    let store = ws.store()?;
    let mut out = Vec::new();
    for s in &snaps {
        crate::consent::SnapshotStore::save(&store, s)?;
        out.push(SnapshotSummary::from(s));
    }
    Ok(json!({ "generated_at": as_of.to_rfc3339(), "records": records.len(), "snapshots": out }))
}

/// Routes an access. The purpose comes from `purpose`, or from the identity
/// file entry of `service` together with its pin for `relation`.
pub fn cmd_route(
    ws: &Workspace,
    relation: &str,
    purpose: Option<&str>,
    service: Option<&str>,
    pin: Option<Version>,
    environment: Option<&str>,
) -> Result<Json, Error> {
    let mut ctx = match (purpose, service) {
        (Some(p), _) => AccessContext::new(p),
        (None, Some(svc)) => {
            let ids = ws.identities()?;
            let ident = ids
                .get(svc)
                .ok_or_else(|| Error::Config(format!("unknown service `{svc}`")))?;
            let mut ctx = AccessContext::new(&ident.purpose).in_environment(&ident.environment);
            ctx.pinned_version = ident.pins.get(relation).cloned();
            ctx
        }
        (None, None) => return Err(Error::Config("route needs --purpose or --service".into())),
    };
    if pin.is_some() {
        ctx.pinned_version = pin;
    }
    if let Some(env) = environment {
        ctx.environment = env.to_string();
    }
    let registry = ws.registry()?;
    let id = get_view(relation, &ctx, &registry, &ws.access_log())?;
    Ok(json!({
        "relation": relation,
        "purpose": ctx.purpose,
        "pinned": ctx.pinned_version.is_some(),
        "view": id.to_string(),
        "version": id.version.to_string(),
    }))
}

/// Recompiles changed views and reports pinned consumers behind latest.
pub fn cmd_maintain(ws: &Workspace) -> Result<Json, Error> {
    let inv = ws.inventory()?;
    let registry = ws.registry()?;
    let report = maintain_views(&inv, &registry, &Scope::default())?;
    let behind = pinned_behind(&ws.identities()?, &registry);
    Ok(json!({
        "updated": report.updated.len(),
        "unchanged": report.unchanged,
        "updates": report.updated,
        "errors": report.errors,
        "pinned_behind": behind,
    }))
}

pub struct GcArgs {
    pub keep_latest: Option<usize>,
    pub min_age: Option<Duration>,
    pub snapshot_retention: Option<Duration>,
    pub now: DateTime<Utc>,
}

/// Collects old view versions and consent snapshots.
pub fn cmd_gc(ws: &Workspace, args: &GcArgs) -> Result<Json, Error> {
    let d = &ws.config.gc;
    let registry = ws.registry()?;
    let removed = gc_views(
        &registry,
        args.keep_latest.unwrap_or(d.keep_latest),
        args.min_age.unwrap_or(Duration::days(d.min_age_days)),
        args.now,
    )?;
    let snaps = snapshot_gc(
        &ws.store()?,
        args.snapshot_retention.unwrap_or(Duration::days(d.snapshot_retention_days)),
        args.now,
    )?;
    let by_view: BTreeMap<String, usize> = removed.iter().fold(BTreeMap::new(), |mut m, id| {
        *m.entry(format!("{}.{}", id.purpose, id.relation)).or_insert(0) += 1;
        m
    });
    Ok(json!({
        "views_removed": removed.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "views_removed_by_key": by_view,
        "snapshots_removed": snaps,
    }))
}
