//! Versioned manual storage on the local filesystem.
//!
//! Layout under the store root:
//!
//! ```text
//! manuals/<id>/v<N>.json    one immutable file per version
//! manuals/<id>/index.json   version list; the commit point for a write
//! gold/samples.jsonl        gold samples, one JSON object per line
//! calibration/model.json    current calibration model
//! ```
//!
//! Writers are serialized by an in-process lock. Version files are written
//! before the index, so readers going through the index only ever observe
//! committed versions.

use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{CalibrationModel, GoldDataset, GoldSample};
use crate::types::{now_utc, validate_manual, ManualDocument, StepStatus, Violation};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("manual `{0}` not found")]
    NotFound(String),
    #[error("manual `{id}` has no version {version}")]
    VersionNotFound { id: String, version: u32 },
    #[error("manual `{0}` already exists")]
    AlreadyExists(String),
    #[error("manual `{id}` is at version {current}, update was based on {base}")]
    ConcurrentUpdateConflict { id: String, base: u32, current: u32 },
    #[error("invalid manual: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("invalid manual id `{0}`")]
    InvalidId(String),
    #[error("invalid gold sample: {0}")]
    InvalidGold(String),
    #[error("store I/O: {0}")]
    Io(#[from] io::Error),
    #[error("store data at {path}: {message}")]
    Corrupt { path: String, message: String },
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionMeta {
    pub version: u32,
    pub updated_at: DateTime<Utc>,
    pub steps: usize,
    pub simplified_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ManualIndex {
    manual_id: String,
    title: String,
    tags: BTreeSet<String>,
    versions: Vec<VersionMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManualSummary {
    pub manual_id: String,
    pub title: String,
    pub tags: BTreeSet<String>,
    pub latest_version: u32,
}

pub struct ManualStore {
    root: PathBuf,
    write_lock: Mutex<()>,
}

fn slugify(title: &str) -> String {
    let mut out = String::new();
    for c in title.chars().flat_map(char::to_lowercase) {
        if c.is_ascii_alphanumeric() {
            out.push(c);
        } else if !out.ends_with('-') && !out.is_empty() {
            out.push('-');
        }
    }
    let out = out.trim_end_matches('-').to_string();
    if out.is_empty() {
        "manual".to_string()
    } else {
        out
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' || c == '_')
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().expect("store paths have a parent");
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("file")
    ));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| StoreError::Corrupt {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn meta_of(doc: &ManualDocument) -> VersionMeta {
    VersionMeta {
        version: doc.version,
        updated_at: doc.updated_at,
        steps: doc.steps.len(),
        simplified_steps: doc
            .steps
            .iter()
            .filter(|s| s.status != StepStatus::Draft)
            .count(),
    }
}

impl ManualStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("manuals"))?;
        fs::create_dir_all(root.join("gold"))?;
        Ok(Self {
            root,
            write_lock: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn manual_dir(&self, id: &str) -> PathBuf {
        self.root.join("manuals").join(id)
    }

    fn index_path(&self, id: &str) -> PathBuf {
        self.manual_dir(id).join("index.json")
    }

    fn version_path(&self, id: &str, version: u32) -> PathBuf {
        self.manual_dir(id).join(format!("v{version}.json"))
    }

    pub fn gold_path(&self) -> PathBuf {
        self.root.join("gold").join("samples.jsonl")
    }

    pub fn model_path(&self) -> PathBuf {
        self.root.join("calibration").join("model.json")
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, ()> {
        self.write_lock.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn read_index(&self, id: &str) -> Result<ManualIndex> {
        if !valid_id(id) {
            return Err(StoreError::NotFound(id.to_string()));
        }
        let path = self.index_path(id);
        if !path.exists() {
            return Err(StoreError::NotFound(id.to_string()));
        }
        read_json(&path)
    }

    fn commit(&self, doc: &ManualDocument, mut index: ManualIndex) -> Result<()> {
        let body = serde_json::to_vec_pretty(doc).expect("manual serializes");
        write_atomic(&self.version_path(&doc.manual_id, doc.version), &body)?;
        index.title = doc.title.clone();
        index.tags = doc.tags.clone();
        index.versions.push(meta_of(doc));
        let body = serde_json::to_vec_pretty(&index).expect("index serializes");
        write_atomic(&self.index_path(&doc.manual_id), &body)?;
        Ok(())
    }

    /// Stores `doc` as version 1 and returns its id. An empty `manual_id` is
    /// derived from the title.
    pub fn create_manual(&self, doc: &ManualDocument) -> Result<String> {
        let violations = validate_manual(doc);
        if !violations.is_empty() {
            return Err(StoreError::Invalid(violations));
        }
        let _guard = self.lock();
        let id = if doc.manual_id.is_empty() {
            let base = slugify(&doc.title);
            let mut id = base.clone();
            let mut n = 2;
            while self.manual_dir(&id).exists() {
                id = format!("{base}-{n}");
                n += 1;
            }
            id
        } else {
            if !valid_id(&doc.manual_id) {
                return Err(StoreError::InvalidId(doc.manual_id.clone()));
            }
            if self.manual_dir(&doc.manual_id).exists() {
                return Err(StoreError::AlreadyExists(doc.manual_id.clone()));
            }
            doc.manual_id.clone()
        };
        let now = now_utc();
        let stored = ManualDocument {
            manual_id: id.clone(),
            version: 1,
            created_at: now,
            updated_at: now,
            ..doc.clone()
        };
        let index = ManualIndex {
            manual_id: id.clone(),
            title: stored.title.clone(),
            tags: stored.tags.clone(),
            versions: Vec::new(),
        };
        self.commit(&stored, index)?;
        Ok(id)
    }

    /// Stores a new version. `doc.version` must equal the current latest
    /// version (the base the caller edited); otherwise the update is
    /// rejected as a conflict.
    pub fn update_manual(&self, id: &str, doc: &ManualDocument) -> Result<u32> {
        let violations = validate_manual(doc);
        if !violations.is_empty() {
            return Err(StoreError::Invalid(violations));
        }
        let _guard = self.lock();
        let index = self.read_index(id)?;
        let current = index.versions.last().map_or(0, |v| v.version);
        if doc.version != current {
            return Err(StoreError::ConcurrentUpdateConflict {
                id: id.to_string(),
                base: doc.version,
                current,
            });
        }
        let first: ManualDocument = read_json(&self.version_path(id, 1))?;
        let stored = ManualDocument {
            manual_id: id.to_string(),
            version: current + 1,
            created_at: first.created_at,
            updated_at: now_utc().max(first.created_at),
            ..doc.clone()
        };
        self.commit(&stored, index)?;
        Ok(stored.version)
    }

    /// A specific version, or the latest when `version` is `None`.
    pub fn get_manual(&self, id: &str, version: Option<u32>) -> Result<ManualDocument> {
        let index = self.read_index(id)?;
        let latest = index.versions.last().map_or(0, |v| v.version);
        let v = version.unwrap_or(latest);
        if v == 0 || v > latest {
            return Err(StoreError::VersionNotFound {
                id: id.to_string(),
                version: v,
            });
        }
        read_json(&self.version_path(id, v))
    }

    pub fn list_versions(&self, id: &str) -> Result<Vec<VersionMeta>> {
        Ok(self.read_index(id)?.versions)
    }

    pub fn list_ids(&self) -> Result<Vec<String>> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(self.root.join("manuals"))? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if valid_id(&name) && entry.path().join("index.json").exists() {
                ids.push(name);
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Case-insensitive substring search over title, step texts and tags of
    /// each manual's latest version. Results must carry every tag in `tags`.
    pub fn search(&self, query: &str, tags: &BTreeSet<String>) -> Result<Vec<ManualSummary>> {
        let q = query.trim().to_lowercase();
        let mut out = Vec::new();
        for id in self.list_ids()? {
            let doc = self.get_manual(&id, None)?;
            if !tags.iter().all(|t| doc.tags.contains(t)) {
                continue;
            }
            let hit = q.is_empty()
                || doc.title.to_lowercase().contains(&q)
                || doc.tags.iter().any(|t| t.to_lowercase().contains(&q))
                || doc.steps.iter().any(|s| {
                    s.original_text.to_lowercase().contains(&q)
                        || s.simplified_text
                            .as_deref()
                            .is_some_and(|t| t.to_lowercase().contains(&q))
                });
            if hit {
                out.push(ManualSummary {
                    manual_id: doc.manual_id.clone(),
                    title: doc.title.clone(),
                    tags: doc.tags.clone(),
                    latest_version: doc.version,
                });
            }
        }
        Ok(out)
    }

    pub fn append_gold(&self, sample: &GoldSample) -> Result<()> {
        sample.check().map_err(StoreError::InvalidGold)?;
        let _guard = self.lock();
        let mut line = serde_json::to_string(sample).expect("gold sample serializes");
        line.push('\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.gold_path())?;
        f.write_all(line.as_bytes())?;
        f.sync_data()?;
        Ok(())
    }

    pub fn load_gold(&self) -> Result<GoldDataset> {
        read_gold_file(&self.gold_path())
    }

    pub fn save_model(&self, model: &CalibrationModel) -> Result<()> {
        let _guard = self.lock();
        write_atomic(&self.model_path(), model.to_json().as_bytes())?;
        Ok(())
    }

    /// Raw JSON of the persisted model, if any.
    pub fn load_model_json(&self) -> Result<Option<String>> {
        match fs::read_to_string(self.model_path()) {
            Ok(s) => Ok(Some(s)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }
}

/// Reads a JSON-lines gold file. A missing file is an empty dataset.
pub fn read_gold_file(path: &Path) -> Result<GoldDataset> {
    let f = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(GoldDataset::default()),
        Err(e) => return Err(e.into()),
    };
    let mut samples = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: GoldSample = serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
            path: format!("{}:{}", path.display(), i + 1),
            message: e.to_string(),
        })?;
        samples.push(s);
    }
    Ok(GoldDataset::new(samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::GoldSource;
    use crate::corpus;
    use crate::types::ErrorClass;

    fn store() -> (tempfile::TempDir, ManualStore) {
        let dir = tempfile::tempdir().unwrap();
        let s = ManualStore::open(dir.path()).unwrap();
        (dir, s)
    }

    #[test]
    fn create_update_get_old_version() {
        let (_d, s) = store();
        let id = s.create_manual(&corpus::coffee_manual()).unwrap();
        assert_eq!(id, "pour-over-coffee");
        let v1 = s.get_manual(&id, None).unwrap();
        let mut edited = v1.clone();
        edited.steps[0].simplified_text = Some("Place dripper on coffee mug.".into());
        edited.steps[0].status = StepStatus::Simplified;
        assert_eq!(s.update_manual(&id, &edited).unwrap(), 2);
        assert_eq!(s.get_manual(&id, Some(1)).unwrap(), v1);
        assert_eq!(s.get_manual(&id, None).unwrap().version, 2);
        let versions: Vec<u32> = s
            .list_versions(&id)
            .unwrap()
            .iter()
            .map(|v| v.version)
            .collect();
        assert_eq!(versions, [1, 2]);
    }

    #[test]
    fn stale_update_conflicts() {
        let (_d, s) = store();
        let id = s.create_manual(&corpus::coffee_manual()).unwrap();
        let base = s.get_manual(&id, None).unwrap();
        s.update_manual(&id, &base).unwrap();
        assert!(matches!(
            s.update_manual(&id, &base),
            Err(StoreError::ConcurrentUpdateConflict {
                base: 1,
                current: 2,
                ..
            })
        ));
    }

    #[test]
    fn missing_ids_and_versions() {
        let (_d, s) = store();
        assert!(matches!(
            s.get_manual("nope", None),
            Err(StoreError::NotFound(_))
        ));
        assert!(matches!(
            s.get_manual("../etc", None),
            Err(StoreError::NotFound(_))
        ));
        let id = s.create_manual(&corpus::coffee_manual()).unwrap();
        assert!(matches!(
            s.get_manual(&id, Some(9)),
            Err(StoreError::VersionNotFound { version: 9, .. })
        ));
        assert!(matches!(
            s.update_manual("nope", &corpus::coffee_manual()),
            Err(StoreError::NotFound(_))
        ));
    }

    #[test]
    fn duplicate_titles_get_distinct_ids() {
        let (_d, s) = store();
        let a = s.create_manual(&corpus::coffee_manual()).unwrap();
        let b = s.create_manual(&corpus::coffee_manual()).unwrap();
        assert_eq!(b, format!("{a}-2"));
        let mut explicit = corpus::coffee_manual();
        explicit.manual_id = a.clone();
        assert!(matches!(
            s.create_manual(&explicit),
            Err(StoreError::AlreadyExists(_))
        ));
    }

    #[test]
    fn invalid_documents_are_rejected() {
        let (_d, s) = store();
        let mut doc = corpus::coffee_manual();
        doc.steps.clear();
        assert!(matches!(s.create_manual(&doc), Err(StoreError::Invalid(_))));
    }

    #[test]
    fn search_by_text_and_tag() {
        let (_d, s) = store();
        let coffee = s.create_manual(&corpus::coffee_manual()).unwrap();
        s.create_manual(&corpus::meeting_manual()).unwrap();
        let hits = s.search("coffee", &BTreeSet::new()).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].manual_id, coffee);
        assert_eq!(s.search("PROJECTOR", &BTreeSet::new()).unwrap().len(), 0);
        assert_eq!(s.search("", &BTreeSet::new()).unwrap().len(), 2);
        let office: BTreeSet<String> = ["office".to_string()].into();
        assert_eq!(
            s.search("", &office).unwrap()[0].title,
            corpus::MEETING_TITLE
        );
        assert_eq!(s.search("charger", &BTreeSet::new()).unwrap().len(), 1);
    }

    #[test]
    fn gold_round_trip() {
        let (_d, s) = store();
        assert_eq!(s.load_gold().unwrap().k(), 0);
        s.append_gold(&GoldSample::correct("a b", "a", GoldSource::ExpertReview))
            .unwrap();
        s.append_gold(&GoldSample::erroneous(
            "a b",
            "b",
            ErrorClass::TooLong,
            GoldSource::Seeded,
        ))
        .unwrap();
        let g = s.load_gold().unwrap();
        assert_eq!(g.k(), 2);
        assert_eq!(g.samples[1].verdict, 0);
        let mut bad = GoldSample::correct("a", "b", GoldSource::Seeded);
        bad.verdict = 2;
        assert!(s.append_gold(&bad).is_err());
    }

    #[test]
    fn slugs() {
        assert_eq!(slugify("Meeting room setup!"), "meeting-room-setup");
        assert_eq!(slugify("***"), "manual");
    }
}
