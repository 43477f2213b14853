//! Consent bitmaps: one compressed id set per consent and snapshot time, storing
//! whichever of the consenting / non-consenting populations is smaller.

mod store;

pub use store::{FsStore, MemoryStore, SnapshotStore};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use roaring::RoaringTreemap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConsentError {
    #[error("subject {subject} has conflicting values for consent `{consent}`")]
    DuplicateSubjectRow { subject: i64, consent: String },
    #[error("subject id {0} is negative")]
    NegativeSubjectId(i64),
    #[error("no snapshot of consent `{consent}` at or before {access_time}")]
    NoSnapshotAvailable {
        consent: String,
        access_time: DateTime<Utc>,
    },
    #[error("consent table line {line}: {message}")]
    Input { line: usize, message: String },
    #[error("snapshot store: {0}")]
    Store(String),
}

impl From<std::io::Error> for ConsentError {
    fn from(e: std::io::Error) -> Self {
        ConsentError::Store(e.to_string())
    }
}

/// Which population a snapshot's bitmap holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    /// Bitmap lists subjects who consented.
    #[serde(rename = "TRUE_BITMAP")]
    True,
    /// Bitmap lists subjects who did not.
    #[serde(rename = "FALSE_BITMAP")]
    False,
}

/// One row of a consent table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsentRecord {
    pub subject_id: i64,
    pub consent: String,
    pub value: bool,
}

impl ConsentRecord {
    pub fn new(subject_id: i64, consent: impl Into<String>, value: bool) -> Self {
        ConsentRecord {
            subject_id,
            consent: consent.into(),
            value,
        }
    }
}

/// Reads `subject_id,consent,value` CSV (with header).
pub fn read_consent_csv(reader: impl std::io::Read) -> Result<Vec<ConsentRecord>, ConsentError> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| ConsentError::Input {
                line: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Reads one `{"subject_id", "consent", "value"}` object per line.
pub fn read_consent_jsonl(reader: impl BufRead) -> Result<Vec<ConsentRecord>, ConsentError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ConsentError::Input {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub consent_name: String,
    pub polarity: Polarity,
    pub universe_size: u64,
    pub generated_at: DateTime<Utc>,
}

/// `(consent, generated_at)`: where a snapshot lives in a store.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SnapshotAddress {
    pub consent_name: String,
    pub generated_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsentSnapshot {
    pub consent_name: String,
    pub polarity: Polarity,
    pub bitmap: RoaringTreemap,
    pub generated_at: DateTime<Utc>,
    pub universe_size: u64,
}

impl ConsentSnapshot {
    /// Stores the smaller of `granted` and `universe \ granted`; ties keep the granted side.
    pub fn from_sets(
        consent_name: impl Into<String>,
        granted: RoaringTreemap,
        universe: &RoaringTreemap,
        generated_at: DateTime<Utc>,
    ) -> Self {
        let n = universe.len();
        let (polarity, bitmap) = if 2 * granted.len() <= n {
            (Polarity::True, granted)
        } else {
            (Polarity::False, universe - &granted)
        };
        ConsentSnapshot {
            consent_name: consent_name.into(),
            polarity,
            bitmap,
            generated_at,
            universe_size: n,
        }
    }

    /// Decoded consent value; NULL-like (negative) ids never consent.
    pub fn contains(&self, subject: i64) -> bool {
        if subject < 0 {
            return false;
        }
        let present = self.bitmap.contains(subject as u64);
        match self.polarity {
            Polarity::True => present,
            Polarity::False => !present,
        }
    }

    pub fn meta(&self) -> SnapshotMeta {
        SnapshotMeta {
            consent_name: self.consent_name.clone(),
            polarity: self.polarity,
            universe_size: self.universe_size,
            generated_at: self.generated_at,
        }
    }

    pub fn address(&self) -> SnapshotAddress {
        SnapshotAddress {
            consent_name: self.consent_name.clone(),
            generated_at: self.generated_at,
        }
    }
}

/// Builds one snapshot per consent named in `records`. Subjects appearing anywhere
/// in the table but without a row for a given consent count as not consenting.
pub fn build_snapshots(
    records: &[ConsentRecord],
    as_of: DateTime<Utc>,
) -> Result<Vec<ConsentSnapshot>, ConsentError> {
    let mut universe = RoaringTreemap::new();
    let mut values: BTreeMap<&str, HashMap<i64, bool>> = BTreeMap::new();
    for r in records {
        if r.subject_id < 0 {
            return Err(ConsentError::NegativeSubjectId(r.subject_id));
        }
        universe.insert(r.subject_id as u64);
        let per = values.entry(&r.consent).or_default();
        match per.insert(r.subject_id, r.value) {
            Some(prev) if prev != r.value => {
                return Err(ConsentError::DuplicateSubjectRow {
                    subject: r.subject_id,
                    consent: r.consent.clone(),
                })
            }
            _ => {}
        }
    }
    Ok(values
        .into_iter()
        .map(|(name, per)| {
            let granted: RoaringTreemap = per
                .into_iter()
                .filter(|(_, v)| *v)
                .map(|(s, _)| s as u64)
                .collect();
            ConsentSnapshot::from_sets(name, granted, &universe, as_of)
        })
        .collect())
}

/// Snapshots bound to one access time, so every lookup of a query sees the same data.
#[derive(Debug, Clone, Default)]
pub struct ConsentResolver {
    access_time: Option<DateTime<Utc>>,
    // Sorted by name. Plans reference few consents, so a binary search over a
    // vector beats hashing the name on every lookup.
    snapshots: Vec<(String, Arc<ConsentSnapshot>)>,
}

impl ConsentResolver {
    /// Loads, for each consent, the latest snapshot generated at or before `access_time`.
    pub fn bind<'a>(
        store: &dyn SnapshotStore,
        access_time: DateTime<Utc>,
        consents: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self, ConsentError> {
        let mut snapshots: Vec<(String, Arc<ConsentSnapshot>)> = Vec::new();
        for name in consents {
            if snapshots.iter().any(|(n, _)| n == name) {
                continue;
            }
            let at = store
                .list(name)?
                .into_iter()
                .rev()
                .find(|t| *t <= access_time)
                .ok_or_else(|| ConsentError::NoSnapshotAvailable {
                    consent: name.to_string(),
                    access_time,
                })?;
            snapshots.push((name.to_string(), store.load(name, at)?));
        }
        snapshots.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(ConsentResolver {
            access_time: Some(access_time),
            snapshots,
        })
    }

    /// A resolver over explicitly provided snapshots.
    pub fn from_snapshots(snaps: impl IntoIterator<Item = ConsentSnapshot>) -> Self {
        let mut snapshots: Vec<(String, Arc<ConsentSnapshot>)> = Vec::new();
        for s in snaps {
            snapshots.retain(|(n, _)| *n != s.consent_name);
            snapshots.push((s.consent_name.clone(), Arc::new(s)));
        }
        snapshots.sort_by(|a, b| a.0.cmp(&b.0));
        ConsentResolver {
            access_time: None,
            snapshots,
        }
    }

    pub fn access_time(&self) -> Option<DateTime<Utc>> {
        self.access_time
    }

    pub fn snapshot(&self, consent: &str) -> Option<&Arc<ConsentSnapshot>> {
        self.snapshots
            .binary_search_by(|(n, _)| n.as_str().cmp(consent))
            .ok()
            .map(|i| &self.snapshots[i].1)
    }

    /// Consent value of `subject`; `None` subjects (NULL ids) never consent.
    pub fn lookup(&self, consent: &str, subject: Option<i64>) -> Result<bool, ConsentError> {
        let snap = self
            .snapshot(consent)
            .ok_or_else(|| ConsentError::NoSnapshotAvailable {
                consent: consent.to_string(),
                access_time: self.access_time.unwrap_or(DateTime::<Utc>::MIN_UTC),
            })?;
        Ok(subject.is_some_and(|s| snap.contains(s)))
    }
}

/// Splits a comma-joined consent list.
pub fn split_consents(consents: &str) -> Vec<&str> {
    consents
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

/// True iff `subject` granted every consent in the comma-joined list at `access_time`.
pub fn has_user_consent(
    consents: &str,
    subject_id: i64,
    access_time: DateTime<Utc>,
    store: &dyn SnapshotStore,
) -> Result<bool, ConsentError> {
    let names = split_consents(consents);
    let resolver = ConsentResolver::bind(store, access_time, names.iter().copied())?;
    for name in names {
        if !resolver.lookup(name, Some(subject_id))? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Removes snapshots older than `retention`, always keeping each consent's latest.
pub fn snapshot_gc(
    store: &dyn SnapshotStore,
    retention: Duration,
    now: DateTime<Utc>,
) -> Result<Vec<SnapshotAddress>, ConsentError> {
    let cutoff = now - retention;
    let mut removed = Vec::new();
    for consent in store.consents()? {
        let times = store.list(&consent)?;
        let Some((latest, older)) = times.split_last() else {
            continue;
        };
        for t in older.iter().filter(|t| **t < cutoff && *t != latest) {
            store.remove(&consent, *t)?;
            removed.push(SnapshotAddress {
                consent_name: consent.clone(),
                generated_at: *t,
            });
        }
    }
    Ok(removed)
}

/// Per-consent polarity and size, for reports.
#[derive(Debug, Clone, Serialize)]
pub struct SnapshotSummary {
    pub consent_name: String,
    pub polarity: Polarity,
    pub stored_ids: u64,
    pub universe_size: u64,
    pub serialized_bytes: u64,
    pub generated_at: DateTime<Utc>,
}

impl From<&ConsentSnapshot> for SnapshotSummary {
    fn from(s: &ConsentSnapshot) -> Self {
        SnapshotSummary {
            consent_name: s.consent_name.clone(),
            polarity: s.polarity,
            stored_ids: s.bitmap.len(),
            universe_size: s.universe_size,
            serialized_bytes: s.bitmap.serialized_size() as u64,
            generated_at: s.generated_at,
        }
    }
}

/// Distinct consent names referenced by a list of records.
pub fn consent_names(records: &[ConsentRecord]) -> BTreeSet<String> {
    records.iter().map(|r| r.consent.clone()).collect()
}
