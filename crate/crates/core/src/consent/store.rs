use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, NaiveDateTime, Utc};
use roaring::RoaringTreemap;

use super::{ConsentError, ConsentSnapshot, SnapshotMeta};

/// Listing, loading and saving of consent snapshots.
pub trait SnapshotStore: Send + Sync {
    /// Consent names with at least one snapshot, sorted.
    fn consents(&self) -> Result<Vec<String>, ConsentError>;
    /// Snapshot times of one consent, ascending.
    fn list(&self, consent: &str) -> Result<Vec<DateTime<Utc>>, ConsentError>;
    fn load(&self, consent: &str, at: DateTime<Utc>) -> Result<Arc<ConsentSnapshot>, ConsentError>;
    fn save(&self, snapshot: &ConsentSnapshot) -> Result<(), ConsentError>;
    fn remove(&self, consent: &str, at: DateTime<Utc>) -> Result<(), ConsentError>;
}

type Timeline = BTreeMap<DateTime<Utc>, Arc<ConsentSnapshot>>;

#[derive(Debug, Default)]
pub struct MemoryStore {
    inner: RwLock<BTreeMap<String, Timeline>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

fn missing(consent: &str, at: DateTime<Utc>) -> ConsentError {
    ConsentError::Store(format!("no snapshot `{consent}` at {at}"))
}

impl SnapshotStore for MemoryStore {
    fn consents(&self) -> Result<Vec<String>, ConsentError> {
        Ok(self.inner.read().unwrap().keys().cloned().collect())
    }

    fn list(&self, consent: &str) -> Result<Vec<DateTime<Utc>>, ConsentError> {
        Ok(self
            .inner
            .read()
            .unwrap()
            .get(consent)
            .map(|tl| tl.keys().copied().collect())
            .unwrap_or_default())
    }

    fn load(&self, consent: &str, at: DateTime<Utc>) -> Result<Arc<ConsentSnapshot>, ConsentError> {
        self.inner
            .read()
            .unwrap()
            .get(consent)
            .and_then(|tl| tl.get(&at))
            .cloned()
            .ok_or_else(|| missing(consent, at))
    }

    fn save(&self, snapshot: &ConsentSnapshot) -> Result<(), ConsentError> {
        self.inner
            .write()
            .unwrap()
            .entry(snapshot.consent_name.clone())
            .or_default()
            .insert(snapshot.generated_at, Arc::new(snapshot.clone()));
        Ok(())
    }

    fn remove(&self, consent: &str, at: DateTime<Utc>) -> Result<(), ConsentError> {
        let mut inner = self.inner.write().unwrap();
        let tl = inner.get_mut(consent).ok_or_else(|| missing(consent, at))?;
        tl.remove(&at).ok_or_else(|| missing(consent, at))?;
        if tl.is_empty() {
            inner.remove(consent);
        }
        Ok(())
    }
}

const DIR_TIME_FORMAT: &str = "%Y%m%dT%H%M%S%.6fZ";

/// `<root>/<consent>/<generated_at>/{bitmap.bin, meta.json}`.
#[derive(Debug)]
pub struct FsStore {
    root: PathBuf,
    cache: Mutex<HashMap<(String, DateTime<Utc>), Arc<ConsentSnapshot>>>,
}

impl FsStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, ConsentError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(FsStore {
            root,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn snapshot_dir(&self, consent: &str, at: DateTime<Utc>) -> PathBuf {
        self.root
            .join(consent)
            .join(at.format(DIR_TIME_FORMAT).to_string())
    }
}

impl SnapshotStore for FsStore {
    fn consents(&self) -> Result<Vec<String>, ConsentError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            if entry.file_type()?.is_dir() {
                let name = entry.file_name().to_string_lossy().into_owned();
                if !self.list(&name)?.is_empty() {
                    out.push(name);
                }
            }
        }
        out.sort();
        Ok(out)
    }

    fn list(&self, consent: &str) -> Result<Vec<DateTime<Utc>>, ConsentError> {
        let dir = self.root.join(consent);
        if !dir.is_dir() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for entry in fs::read_dir(dir)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if !entry.path().join("meta.json").is_file() {
                continue;
            }
            if let Ok(t) = NaiveDateTime::parse_from_str(&name, DIR_TIME_FORMAT) {
                out.push(t.and_utc());
            }
        }
        out.sort();
        Ok(out)
    }

    fn load(&self, consent: &str, at: DateTime<Utc>) -> Result<Arc<ConsentSnapshot>, ConsentError> {
        let key = (consent.to_string(), at);
        if let Some(s) = self.cache.lock().unwrap().get(&key) {
            return Ok(s.clone());
        }
        let dir = self.snapshot_dir(consent, at);
        if !dir.join("meta.json").is_file() {
            return Err(missing(consent, at));
        }
        let meta: SnapshotMeta = serde_json::from_slice(&fs::read(dir.join("meta.json"))?)
            .map_err(|e| ConsentError::Store(format!("{}: {e}", dir.display())))?;
        let bytes = fs::read(dir.join("bitmap.bin"))?;
        let bitmap = RoaringTreemap::deserialize_from(bytes.as_slice())
            .map_err(|e| ConsentError::Store(format!("{}: {e}", dir.display())))?;
        let snap = Arc::new(ConsentSnapshot {
            consent_name: meta.consent_name,
            polarity: meta.polarity,
            bitmap,
            generated_at: meta.generated_at,
            universe_size: meta.universe_size,
        });
        self.cache.lock().unwrap().insert(key, snap.clone());
        Ok(snap)
    }

    fn save(&self, snapshot: &ConsentSnapshot) -> Result<(), ConsentError> {
        let dir = self.snapshot_dir(&snapshot.consent_name, snapshot.generated_at);
        let tmp = dir.with_extension("partial");
        if tmp.exists() {
            fs::remove_dir_all(&tmp)?;
        }
        fs::create_dir_all(&tmp)?;
        let mut w = BufWriter::new(fs::File::create(tmp.join("bitmap.bin"))?);
        snapshot.bitmap.serialize_into(&mut w)?;
        drop(w);
        let meta = serde_json::to_vec_pretty(&snapshot.meta()).expect("meta serializes");
        fs::write(tmp.join("meta.json"), meta)?;
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::rename(&tmp, &dir)?;
        self.cache
            .lock()
            .unwrap()
            .remove(&(snapshot.consent_name.clone(), snapshot.generated_at));
        Ok(())
    }

    fn remove(&self, consent: &str, at: DateTime<Utc>) -> Result<(), ConsentError> {
        let dir = self.snapshot_dir(consent, at);
        if !dir.exists() {
            return Err(missing(consent, at));
        }
        fs::remove_dir_all(dir)?;
        self.cache.lock().unwrap().remove(&(consent.to_string(), at));
        Ok(())
    }
}
