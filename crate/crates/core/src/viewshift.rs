//! Versioned view registry, maintenance, purpose-based routing and access logging.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, Duration, Utc};
use semver::Version;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compiler::{assign_version, classify_change, ChangeKind, ViewDefinition};
use crate::pipeline::{compile_pair, has_matches, Inventory};

#[derive(Debug, Error)]
pub enum ViewShiftError {
    #[error("no view of `{relation}` for purpose `{purpose}`")]
    NoViewForPurpose { relation: String, purpose: String },
    #[error("pinned version {version} of `{relation}` for purpose `{purpose}` does not exist")]
    PinnedVersionMissing {
        relation: String,
        purpose: String,
        version: Version,
    },
    #[error("version {version} of {purpose}.{relation} is not newer than {latest}")]
    VersionNotIncreasing {
        relation: String,
        purpose: String,
        version: Version,
        latest: Version,
    },
    #[error("registry {path}: {message}")]
    Storage { path: String, message: String },
}

fn storage(path: &Path, e: impl fmt::Display) -> ViewShiftError {
    ViewShiftError::Storage {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// A resolved view: `purpose.relation@version`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ViewId {
    pub relation: String,
    pub purpose: String,
    pub version: Version,
}

impl fmt::Display for ViewId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}@{}", self.purpose, self.relation, self.version)
    }
}

impl From<&ViewDefinition> for ViewId {
    fn from(v: &ViewDefinition) -> Self {
        ViewId {
            relation: v.relation.clone(),
            purpose: v.purpose.clone(),
            version: v.version.clone(),
        }
    }
}

type Key = (String, String);

/// Views by (relation, purpose), versions ascending. Optionally backed by a
/// directory `<root>/<purpose>/<relation>/<version>.{json,sql}` plus `index.json`.
#[derive(Debug, Default)]
pub struct ViewRegistry {
    root: Option<PathBuf>,
    entries: RwLock<BTreeMap<Key, Vec<ViewDefinition>>>,
}

#[derive(Serialize)]
struct IndexEntry<'a> {
    relation: &'a str,
    purpose: &'a str,
    latest: &'a Version,
    versions: Vec<&'a Version>,
}

impl ViewRegistry {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (creating if needed) a registry directory and loads every stored view.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, ViewShiftError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| storage(&root, e))?;
        let mut entries: BTreeMap<Key, Vec<ViewDefinition>> = BTreeMap::new();
        for purpose_dir in read_dirs(&root)? {
            for rel_dir in read_dirs(&purpose_dir)? {
                let files = fs::read_dir(&rel_dir).map_err(|e| storage(&rel_dir, e))?;
                for f in files {
                    let path = f.map_err(|e| storage(&rel_dir, e))?.path();
                    if path.extension().is_some_and(|x| x == "json") {
                        let text = fs::read_to_string(&path).map_err(|e| storage(&path, e))?;
                        let view: ViewDefinition = serde_json::from_str(&text).map_err(|e| storage(&path, e))?;
                        entries
                            .entry((view.relation.clone(), view.purpose.clone()))
                            .or_default()
                            .push(view);
                    }
                }
            }
        }
        for versions in entries.values_mut() {
            versions.sort_by(|a, b| a.version.cmp(&b.version));
        }
        Ok(ViewRegistry {
            root: Some(root),
            entries: RwLock::new(entries),
        })
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn latest(&self, relation: &str, purpose: &str) -> Option<ViewDefinition> {
        let entries = self.entries.read().unwrap();
        entries.get(&key(relation, purpose)).and_then(|v| v.last().cloned())
    }

    pub fn get(&self, id: &ViewId) -> Option<ViewDefinition> {
        let entries = self.entries.read().unwrap();
        entries
            .get(&key(&id.relation, &id.purpose))
            .and_then(|vs| vs.iter().find(|v| v.version == id.version).cloned())
    }

    pub fn versions(&self, relation: &str, purpose: &str) -> Vec<Version> {
        let entries = self.entries.read().unwrap();
        entries
            .get(&key(relation, purpose))
            .map(|vs| vs.iter().map(|v| v.version.clone()).collect())
            .unwrap_or_default()
    }

    /// Every (relation, purpose) with at least one version.
    pub fn keys(&self) -> Vec<(String, String)> {
        self.entries.read().unwrap().keys().cloned().collect()
    }

    pub fn view_count(&self) -> usize {
        self.entries.read().unwrap().values().map(Vec::len).sum()
    }

    /// Adds a view; its version must exceed the current latest for its key.
    pub fn register(&self, view: ViewDefinition) -> Result<ViewId, ViewShiftError> {
        let mut entries = self.entries.write().unwrap();
        let k = key(&view.relation, &view.purpose);
        if let Some(latest) = entries.get(&k).and_then(|v| v.last()) {
            if view.version <= latest.version {
                return Err(ViewShiftError::VersionNotIncreasing {
                    relation: view.relation,
                    purpose: view.purpose,
                    version: view.version,
                    latest: latest.version.clone(),
                });
            }
        }
        if let Some(root) = &self.root {
            write_view(root, &view)?;
        }
        let id = ViewId::from(&view);
        entries.entry(k).or_default().push(view);
        self.write_index(&entries)?;
        Ok(id)
    }

    fn remove_many(&self, ids: &[ViewId]) -> Result<(), ViewShiftError> {
        let mut entries = self.entries.write().unwrap();
        for id in ids {
            if let Some(vs) = entries.get_mut(&key(&id.relation, &id.purpose)) {
                vs.retain(|v| v.version != id.version);
            }
            if let Some(root) = &self.root {
                for ext in ["json", "sql"] {
                    let p = view_file(root, id, ext);
                    if p.exists() {
                        fs::remove_file(&p).map_err(|e| storage(&p, e))?;
                    }
                }
            }
        }
        entries.retain(|_, vs| !vs.is_empty());
        self.write_index(&entries)
    }

    fn write_index(&self, entries: &BTreeMap<Key, Vec<ViewDefinition>>) -> Result<(), ViewShiftError> {
        let Some(root) = &self.root else {
            return Ok(());
        };
        let index: Vec<IndexEntry> = entries
            .iter()
            .filter_map(|((relation, purpose), vs)| {
                vs.last().map(|last| IndexEntry {
                    relation,
                    purpose,
                    latest: &last.version,
                    versions: vs.iter().map(|v| &v.version).collect(),
                })
            })
            .collect();
        let text = serde_json::to_string_pretty(&index).expect("index serializes");
        write_atomic(&root.join("index.json"), text.as_bytes())
    }
}

fn key(relation: &str, purpose: &str) -> Key {
    (relation.to_string(), purpose.to_string())
}

fn read_dirs(dir: &Path) -> Result<Vec<PathBuf>, ViewShiftError> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).map_err(|e| storage(dir, e))? {
        let p = e.map_err(|e| storage(dir, e))?.path();
        if p.is_dir() {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn view_file(root: &Path, id: &ViewId, ext: &str) -> PathBuf {
    root.join(&id.purpose)
        .join(&id.relation)
        .join(format!("{}.{ext}", id.version))
}

fn write_view(root: &Path, view: &ViewDefinition) -> Result<(), ViewShiftError> {
    let id = ViewId::from(view);
    let json_path = view_file(root, &id, "json");
    let dir = json_path.parent().expect("view path has a parent");
    fs::create_dir_all(dir).map_err(|e| storage(dir, e))?;
    let json = serde_json::to_string_pretty(view).expect("view serializes");
    write_atomic(&view_file(root, &id, "sql"), view.sql.as_bytes())?;
    write_atomic(&json_path, json.as_bytes())
}

/// Writes through a sibling temp file and rename, so readers never see a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ViewShiftError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| storage(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| storage(path, e))
}

/// Who is asking and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessContext {
    pub purpose: String,
    #[serde(default)]
    pub pinned_version: Option<Version>,
    #[serde(default)]
    pub environment: String,
}

impl AccessContext {
    pub fn new(purpose: impl Into<String>) -> Self {
        AccessContext {
            purpose: purpose.into(),
            pinned_version: None,
            environment: String::new(),
        }
    }

    pub fn pinned(mut self, version: Version) -> Self {
        self.pinned_version = Some(version);
        self
    }

    pub fn in_environment(mut self, env: impl Into<String>) -> Self {
        self.environment = env.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessLogEntry {
    pub timestamp: DateTime<Utc>,
    pub relation: String,
    pub purpose: String,
    pub environment: String,
    pub pinned: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<Version>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Append-only access log, kept in memory and optionally mirrored to a JSON-lines file.
#[derive(Debug, Default)]
pub struct AccessLog {
    path: Option<PathBuf>,
    entries: Mutex<Vec<AccessLogEntry>>,
}

impl AccessLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn at(path: impl Into<PathBuf>) -> Self {
        AccessLog {
            path: Some(path.into()),
            entries: Mutex::default(),
        }
    }

    pub fn append(&self, entry: AccessLogEntry) -> Result<(), ViewShiftError> {
        let mut entries = self.entries.lock().unwrap();
        if let Some(path) = &self.path {
            let mut line = serde_json::to_string(&entry).expect("log entry serializes");
            line.push('\n');
            let mut f = fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| storage(path, e))?;
            f.write_all(line.as_bytes()).map_err(|e| storage(path, e))?;
        }
        entries.push(entry);
        Ok(())
    }

    /// Entries appended through this handle.
    pub fn entries(&self) -> Vec<AccessLogEntry> {
        self.entries.lock().unwrap().clone()
    }

    /// All entries in a log file.
    pub fn read(path: &Path) -> Result<Vec<AccessLogEntry>, ViewShiftError> {
        if !path.exists() {
            return Ok(Vec::new());
        }
        let text = fs::read_to_string(path).map_err(|e| storage(path, e))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| storage(path, e)))
            .collect()
    }
}

fn resolve(relation: &str, ctx: &AccessContext, registry: &ViewRegistry) -> Result<ViewId, ViewShiftError> {
    let versions = registry.versions(relation, &ctx.purpose);
    let Some(latest) = versions.last() else {
        return Err(ViewShiftError::NoViewForPurpose {
            relation: relation.to_string(),
            purpose: ctx.purpose.clone(),
        });
    };
    let version = match &ctx.pinned_version {
        None => latest.clone(),
        Some(pin) if versions.contains(pin) => pin.clone(),
        Some(pin) => {
            return Err(ViewShiftError::PinnedVersionMissing {
                relation: relation.to_string(),
                purpose: ctx.purpose.clone(),
                version: pin.clone(),
            })
        }
    };
    Ok(ViewId {
        relation: relation.to_string(),
        purpose: ctx.purpose.clone(),
        version,
    })
}

/// Resolves an access to `relation` to the view it must read instead: the pinned
/// version when one is given, the latest otherwise. Every call is logged, failed
/// ones with their error.
pub fn get_view(
    relation: &str,
    ctx: &AccessContext,
    registry: &ViewRegistry,
    log: &AccessLog,
) -> Result<ViewId, ViewShiftError> {
    let result = resolve(relation, ctx, registry);
    let (view, version, error) = match &result {
        Ok(id) => (Some(id.to_string()), Some(id.version.clone()), None),
        Err(e) => (None, None, Some(e.to_string())),
    };
    log.append(AccessLogEntry {
        timestamp: Utc::now(),
        relation: relation.to_string(),
        purpose: ctx.purpose.clone(),
        environment: ctx.environment.clone(),
        pinned: ctx.pinned_version.is_some(),
        view,
        version,
        error,
    })?;
    result
}

/// Restricts maintenance to some relations or purposes; `None` means all.
#[derive(Debug, Clone, Default)]
pub struct Scope {
    pub relation: Option<String>,
    pub purpose: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ViewUpdate {
    pub view: String,
    pub change: ChangeKind,
    pub previous: Option<Version>,
    pub row_filters: usize,
    pub column_masks: usize,
    pub pruned: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairError {
    pub relation: String,
    pub purpose: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MaintainReport {
    pub updated: Vec<ViewUpdate>,
    pub unchanged: usize,
    pub errors: Vec<PairError>,
}

/// Recompiles every (relation, purpose) with matching policies, or that already
/// has a view, whose inputs digest changed. Failures are reported per pair.
pub fn maintain_views(
    inv: &Inventory,
    registry: &ViewRegistry,
    scope: &Scope,
) -> Result<MaintainReport, ViewShiftError> {
    let mut report = MaintainReport::default();
    let purposes = inv.purposes();
    for relation in inv.schemas.keys() {
        if scope.relation.as_ref().is_some_and(|r| r != relation) {
            continue;
        }
        for purpose in &purposes {
            if scope.purpose.as_ref().is_some_and(|p| p != purpose) {
                continue;
            }
            let fail = |e: &dyn fmt::Display| PairError {
                relation: relation.clone(),
                purpose: purpose.clone(),
                error: e.to_string(),
            };
            let previous = registry.latest(relation, purpose);
            match has_matches(inv, relation, purpose) {
                Ok(false) if previous.is_none() => continue,
                Ok(_) => {}
                Err(e) => {
                    report.errors.push(fail(&e));
                    continue;
                }
            }
            let compiled = match compile_pair(inv, relation, purpose) {
                Ok(c) => c,
                Err(e) => {
                    report.errors.push(fail(&e));
                    continue;
                }
            };
            if previous.as_ref().is_some_and(|p| p.inputs_digest == compiled.view.inputs_digest) {
                report.unchanged += 1;
                continue;
            }
            let change = classify_change(previous.as_ref(), &compiled.view);
            if change == ChangeKind::Unchanged {
                report.unchanged += 1;
                continue;
            }
            let mut view = compiled.view.clone();
            view.version = assign_version(previous.as_ref().map(|p| &p.version), change);
            let summary = compiled.summary();
            let id = registry.register(view)?;
            report.updated.push(ViewUpdate {
                view: id.to_string(),
                change,
                previous: previous.map(|p| p.version),
                row_filters: summary.row_filters,
                column_masks: summary.column_masks,
                pruned: summary.pruned,
            });
        }
    }
    Ok(report)
}

/// Removes old versions. Per key, the newest `keep_latest` versions (at least one)
/// and anything created within `min_age` of `now` survive. Pinned versions get no
/// protection; routing to them fails afterwards with `PinnedVersionMissing`.
pub fn gc_views(
    registry: &ViewRegistry,
    keep_latest: usize,
    min_age: Duration,
    now: DateTime<Utc>,
) -> Result<Vec<ViewId>, ViewShiftError> {
    let keep = keep_latest.max(1);
    let cutoff = now - min_age;
    let mut doomed = Vec::new();
    {
        let entries = registry.entries.read().unwrap();
        for vs in entries.values() {
            let old = vs.len().saturating_sub(keep);
            doomed.extend(vs[..old].iter().filter(|v| v.created_at < cutoff).map(ViewId::from));
        }
    }
    registry.remove_many(&doomed)?;
    Ok(doomed)
}

/// A consuming service: its purpose and the versions it pinned, per relation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Identity {
    pub purpose: String,
    #[serde(default)]
    pub pins: BTreeMap<String, Version>,
    #[serde(default)]
    pub environment: String,
}

/// Service name to identity, read from `identities.json`.
pub type Identities = BTreeMap<String, Identity>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PinnedBehind {
    pub service: String,
    pub relation: String,
    pub purpose: String,
    pub pinned: Version,
    pub latest: Option<Version>,
    /// The pinned version no longer exists.
    pub missing: bool,
}

/// Pinned consumers that are not on the latest version of their view.
pub fn pinned_behind(identities: &Identities, registry: &ViewRegistry) -> Vec<PinnedBehind> {
    let mut out = Vec::new();
    for (service, ident) in identities {
        for (relation, pin) in &ident.pins {
            let versions = registry.versions(relation, &ident.purpose);
            let latest = versions.last().cloned();
            if latest.as_ref() == Some(pin) {
                continue;
            }
            out.push(PinnedBehind {
                service: service.clone(),
                relation: relation.clone(),
                purpose: ident.purpose.clone(),
                pinned: pin.clone(),
                missing: !versions.contains(pin),
                latest,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;

    fn view(relation: &str, purpose: &str, version: &str, age_days: i64) -> ViewDefinition {
        let (catalog, assignments) = samples::table1_catalog();
        let inv = Inventory::new([samples::table1_schema()], assignments, catalog).unwrap();
        let mut v = compile_pair(&inv, "R", "ads").unwrap().view;
        v.relation = relation.into();
        v.purpose = purpose.into();
        v.version = Version::parse(version).unwrap();
        v.created_at = Utc::now() - Duration::days(age_days);
        v
    }

    #[test]
    fn default_latest_and_pinned() {
        let reg = ViewRegistry::in_memory();
        reg.register(view("R", "ads", "1.0.0", 3)).unwrap();
        reg.register(view("R", "ads", "2.0.0", 1)).unwrap();
        let log = AccessLog::in_memory();
        let ctx = AccessContext::new("ads");
        assert_eq!(get_view("R", &ctx, &reg, &log).unwrap().version, Version::new(2, 0, 0));
        let pinned = ctx.clone().pinned(Version::new(1, 0, 0));
        assert_eq!(get_view("R", &pinned, &reg, &log).unwrap().version, Version::new(1, 0, 0));
        assert!(matches!(
            get_view("R", &AccessContext::new("jobs"), &reg, &log),
            Err(ViewShiftError::NoViewForPurpose { .. })
        ));
        let entries = log.entries();
        assert_eq!(entries.len(), 3);
        assert!(entries[1].pinned);
        assert!(entries[2].error.is_some());
    }

    #[test]
    fn versions_must_increase() {
        let reg = ViewRegistry::in_memory();
        reg.register(view("R", "ads", "1.1.0", 0)).unwrap();
        assert!(matches!(
            reg.register(view("R", "ads", "1.0.5", 0)),
            Err(ViewShiftError::VersionNotIncreasing { .. })
        ));
    }

    #[test]
    fn gc_keeps_newest_and_young() {
        let reg = ViewRegistry::in_memory();
        reg.register(view("R", "ads", "1.0.0", 30)).unwrap();
        assert!(gc_views(&reg, 0, Duration::days(1), Utc::now()).unwrap().is_empty());
        for (i, v) in ["2.0.0", "3.0.0", "4.0.0", "5.0.0"].iter().enumerate() {
            reg.register(view("R", "ads", v, 20 - i as i64)).unwrap();
        }
        let removed = gc_views(&reg, 2, Duration::days(1), Utc::now()).unwrap();
        let removed: Vec<_> = removed.iter().map(|id| id.version.to_string()).collect();
        assert_eq!(removed, ["1.0.0", "2.0.0", "3.0.0"]);
        assert_eq!(reg.versions("R", "ads"), [Version::new(4, 0, 0), Version::new(5, 0, 0)]);
    }

    #[test]
    fn gc_of_pinned_version_surfaces_at_routing() {
        let reg = ViewRegistry::in_memory();
        reg.register(view("R", "ads", "1.0.0", 10)).unwrap();
        reg.register(view("R", "ads", "2.0.0", 10)).unwrap();
        let ctx = AccessContext::new("ads").pinned(Version::new(1, 0, 0));
        let log = AccessLog::in_memory();
        get_view("R", &ctx, &reg, &log).unwrap();
        gc_views(&reg, 1, Duration::zero(), Utc::now()).unwrap();
        assert!(matches!(
            get_view("R", &ctx, &reg, &log),
            Err(ViewShiftError::PinnedVersionMissing { .. })
        ));
    }

    #[test]
    fn persisted_registry_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let reg = ViewRegistry::open(dir.path()).unwrap();
        reg.register(view("R", "ads", "1.0.0", 0)).unwrap();
        reg.register(view("R", "ads", "1.0.1", 0)).unwrap();
        assert!(dir.path().join("ads/R/1.0.1.sql").is_file());
        assert!(dir.path().join("index.json").is_file());
        let again = ViewRegistry::open(dir.path()).unwrap();
        assert_eq!(again.versions("R", "ads").len(), 2);
        assert_eq!(again.latest("R", "ads"), reg.latest("R", "ads"));
        gc_views(&again, 1, Duration::zero(), Utc::now()).unwrap();
        assert!(!dir.path().join("ads/R/1.0.0.json").exists());
    }

    #[test]
    fn maintenance_converges() {
        let (catalog, assignments) = samples::table1_catalog();
        let inv = Inventory::new([samples::table1_schema()], assignments, catalog).unwrap();
        let reg = ViewRegistry::in_memory();
        let first = maintain_views(&inv, &reg, &Scope::default()).unwrap();
        assert_eq!(first.updated.len(), 1);
        assert_eq!(first.updated[0].change, ChangeKind::Initial);
        let second = maintain_views(&inv, &reg, &Scope::default()).unwrap();
        assert!(second.updated.is_empty());
        assert_eq!(second.unchanged, 1);
    }

    #[test]
    fn pinned_report() {
        let reg = ViewRegistry::in_memory();
        reg.register(view("R", "ads", "1.0.0", 0)).unwrap();
        reg.register(view("R", "ads", "2.0.0", 0)).unwrap();
        let ids: Identities = serde_json::from_str(
            r#"{"svc": {"purpose": "ads", "pins": {"R": "1.0.0"}}, "fresh": {"purpose": "ads", "pins": {"R": "2.0.0"}}}"#,
        )
        .unwrap();
        let behind = pinned_behind(&ids, &reg);
        assert_eq!(behind.len(), 1);
        assert_eq!(behind[0].service, "svc");
        assert!(!behind[0].missing);
    }
}
