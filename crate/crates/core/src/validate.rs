//! Checks a local copy of a dataset against its canonical index.
//!
//! Only indexed files are examined; extra local files are ignored. A file is
//! *missing* when nothing exists at its resolved path and *invalid* when its
//! digest differs from the index (full mode only). Existing files that cannot
//! be read are reported invalid and additionally flagged *unreadable*.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::canonical::{self, child_path, expect_object, expect_str, Fields};
use crate::error::{Error, Result};
use crate::index::{compute_checksum, with_workers, DatasetIndex, FileRef};
use crate::model::ClipId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ValidationMode {
    /// Existence and checksum of every file.
    #[default]
    Full,
    /// Existence only; never reports invalid files.
    Fast,
}

impl ValidationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ValidationMode::Full => "full",
            ValidationMode::Fast => "fast",
        }
    }
}

impl fmt::Display for ValidationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ValidationMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "full" => Ok(ValidationMode::Full),
            "fast" => Ok(ValidationMode::Fast),
            other => Err(format!("unknown validation mode {other:?}")),
        }
    }
}

/// Problems found in one group of files (clip fields or metadata).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Findings {
    pub clips: BTreeMap<ClipId, BTreeSet<String>>,
    pub metadata: BTreeSet<String>,
}

impl Findings {
    pub fn is_empty(&self) -> bool {
        self.clips.is_empty() && self.metadata.is_empty()
    }

    pub fn contains(&self, clip: &str, field: &str) -> bool {
        self.clips.get(clip).is_some_and(|f| f.contains(field))
    }

    /// Total number of listed files.
    pub fn len(&self) -> usize {
        self.clips.values().map(BTreeSet::len).sum::<usize>() + self.metadata.len()
    }

    fn insert(&mut self, key: &FileKey) {
        match key {
            FileKey::Clip(id, field) => {
                self.clips.entry(id.clone()).or_default().insert(field.clone());
            }
            FileKey::Metadata(name) => {
                self.metadata.insert(name.clone());
            }
        }
    }

    fn to_json(&self) -> Value {
        let clips: Map<String, Value> = self
            .clips
            .iter()
            .map(|(id, fields)| (id.to_string(), json!(fields)))
            .collect();
        json!({"clips": clips, "metadata": self.metadata})
    }

    fn from_json(value: &Value, path: &str) -> Result<Self> {
        let mut f = Fields::new(value, path)?;
        let mut clips = BTreeMap::new();
        let clips_path = f.path_of("clips");
        for (id, fields) in f.object("clips")? {
            let p = child_path(&clips_path, id);
            let id = ClipId::new(id.as_str()).map_err(|e| Error::schema(&p, e.to_string()))?;
            let fields = string_set(fields, &p)?;
            if fields.is_empty() {
                return Err(Error::schema(p, "empty field list"));
            }
            clips.insert(id, fields);
        }
        let meta_path = f.path_of("metadata");
        let metadata = string_set(f.required("metadata")?, &meta_path)?;
        f.finish()?;
        Ok(Findings { clips, metadata })
    }
}

fn string_set(value: &Value, path: &str) -> Result<BTreeSet<String>> {
    let items = value
        .as_array()
        .ok_or_else(|| Error::schema(path, "expected an array"))?;
    let mut out = BTreeSet::new();
    let mut prev: Option<&str> = None;
    for item in items {
        let s = expect_str(item, path)?;
        if prev.is_some_and(|p| p.as_bytes() >= s.as_bytes()) {
            return Err(Error::schema(path, "entries must be sorted and unique"));
        }
        prev = Some(s);
        out.insert(s.to_owned());
    }
    Ok(out)
}

/// Result of comparing a local copy with the index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub mode: ValidationMode,
    pub files_checked: u64,
    pub missing: Findings,
    pub invalid: Findings,
    /// Subset of `invalid` whose files exist but could not be read.
    pub unreadable: Findings,
}

impl ValidationReport {
    pub fn new(mode: ValidationMode) -> Self {
        ValidationReport {
            mode,
            files_checked: 0,
            missing: Findings::default(),
            invalid: Findings::default(),
            unreadable: Findings::default(),
        }
    }

    pub fn is_clean(&self) -> bool {
        self.missing.is_empty() && self.invalid.is_empty()
    }

    /// Canonical document form. The `unreadable` key is only present when
    /// some file could not be read.
    pub fn to_json(&self) -> Value {
        let mut doc = json!({
            "clean": self.is_clean(),
            "files_checked": self.files_checked,
            "invalid": self.invalid.to_json(),
            "missing": self.missing.to_json(),
            "mode": self.mode.as_str(),
        });
        if !self.unreadable.is_empty() {
            doc["unreadable"] = self.unreadable.to_json();
        }
        doc
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let mut f = Fields::new(value, "$")?;
        let clean = f.boolean("clean")?;
        let files_checked = f.count("files_checked")?;
        let invalid = Findings::from_json(f.required("invalid")?, "invalid")?;
        let missing = Findings::from_json(f.required("missing")?, "missing")?;
        let mode = f
            .string("mode")?
            .parse()
            .map_err(|m| Error::schema("mode", m))?;
        let unreadable = match f.optional("unreadable") {
            Some(v) => {
                expect_object(v, "unreadable")?;
                Findings::from_json(v, "unreadable")?
            }
            None => Findings::default(),
        };
        f.finish()?;
        let report = ValidationReport {
            mode,
            files_checked,
            missing,
            invalid,
            unreadable,
        };
        if report.is_clean() != clean {
            return Err(Error::schema("clean", "disagrees with the listed findings"));
        }
        Ok(report)
    }
}

/// Canonical bytes of a report.
pub fn report_to_document(report: &ValidationReport) -> Vec<u8> {
    canonical::to_bytes(&report.to_json())
}

pub fn parse_report(bytes: &[u8]) -> Result<ValidationReport> {
    ValidationReport::from_json(&canonical::parse(bytes)?)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum FileKey {
    Clip(ClipId, String),
    Metadata(String),
}

enum Status {
    Ok,
    Missing,
    Invalid,
    Unreadable,
}

fn check_file(file: &FileRef, data_home: &Path, report_mode: ValidationMode, algorithm: crate::ChecksumAlgorithm) -> Status {
    let path = file.resolve(data_home);
    match std::fs::metadata(&path) {
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Status::Missing,
        Err(_) => return Status::Unreadable,
        Ok(_) => {}
    }
    if report_mode == ValidationMode::Fast {
        return Status::Ok;
    }
    match compute_checksum(&path, algorithm) {
        Ok(digest) if digest == file.checksum() => Status::Ok,
        Ok(_) => Status::Invalid,
        Err(Error::Io { source, .. }) if source.kind() == io::ErrorKind::NotFound => Status::Missing,
        Err(_) => Status::Unreadable,
    }
}

/// Compares `data_home` against `index`. `data_home` need not exist.
pub fn validate(index: &DatasetIndex, data_home: &Path, mode: ValidationMode) -> ValidationReport {
    validate_with_workers(index, data_home, mode, None)
}

/// As [`validate`], hashing on a pool of `workers` threads. The report does
/// not depend on the worker count.
pub fn validate_with_workers(
    index: &DatasetIndex,
    data_home: &Path,
    mode: ValidationMode,
    workers: Option<usize>,
) -> ValidationReport {
    let mut targets: Vec<(FileKey, &FileRef)> = Vec::with_capacity(index.file_count());
    for (id, entry) in index.clips() {
        for (field, file) in entry.fields() {
            if let Some(file) = file {
                targets.push((FileKey::Clip(id.clone(), field.clone()), file));
            }
        }
    }
    for (name, file) in index.metadata() {
        targets.push((FileKey::Metadata(name.clone()), file));
    }

    let algorithm = index.checksum_algorithm();
    let statuses: Vec<Status> = with_workers(workers, || {
        targets
            .par_iter()
            .map(|(_, file)| check_file(file, data_home, mode, algorithm))
            .collect()
    });

    let mut report = ValidationReport::new(mode);
    report.files_checked = targets.len() as u64;
    for ((key, _), status) in targets.iter().zip(statuses) {
        match status {
            Status::Ok => {}
            Status::Missing => report.missing.insert(key),
            Status::Invalid => report.invalid.insert(key),
            Status::Unreadable => {
                report.invalid.insert(key);
                report.unreadable.insert(key);
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::{build_index, ChecksumAlgorithm, FieldRule};

    fn fixture() -> (tempfile::TempDir, DatasetIndex) {
        let dir = tempfile::tempdir().unwrap();
        for (rel, body) in [
            ("audio/a.wav", "A"),
            ("audio/b.wav", "B"),
            ("events/a.txt", "0.0\t1.0\tdog\n"),
            ("clip_info.csv", "clip_id\na\nb\n"),
        ] {
            let p = dir.path().join(rel);
            std::fs::create_dir_all(p.parent().unwrap()).unwrap();
            std::fs::write(p, body).unwrap();
        }
        let index = build_index(dir.path(), ChecksumAlgorithm::Md5, &FieldRule::default()).unwrap();
        (dir, index)
    }

    #[test]
    fn empty_index_is_clean() {
        let report = validate(
            &DatasetIndex::empty(ChecksumAlgorithm::Md5),
            Path::new("/nonexistent/soundkit"),
            ValidationMode::Full,
        );
        assert!(report.is_clean());
        assert_eq!(report.files_checked, 0);
    }

    #[test]
    fn built_index_validates_clean() {
        let (dir, index) = fixture();
        let report = validate(&index, dir.path(), ValidationMode::Full);
        assert!(report.is_clean(), "{report:?}");
        assert_eq!(report.files_checked, 4);
    }

    #[test]
    fn missing_data_home_reports_everything_missing() {
        let (_dir, index) = fixture();
        let report = validate(&index, Path::new("/nonexistent/soundkit"), ValidationMode::Full);
        assert_eq!(report.missing.len(), 4);
        assert!(report.missing.metadata.contains("clip_info"));
        assert!(report.invalid.is_empty());
    }

    #[test]
    fn corruption_detected_in_full_mode_only() {
        let (dir, index) = fixture();
        let path = dir.path().join("events/a.txt");
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] ^= 0x01;
        std::fs::write(&path, bytes).unwrap();

        let full = validate(&index, dir.path(), ValidationMode::Full);
        assert!(full.invalid.contains("a", "events"));
        assert_eq!(full.invalid.len(), 1);
        assert!(full.missing.is_empty());

        let fast = validate(&index, dir.path(), ValidationMode::Fast);
        assert!(fast.is_clean());
    }

    #[test]
    fn unreadable_file_is_flagged() {
        let (dir, index) = fixture();
        let path = dir.path().join("audio/b.wav");
        std::fs::remove_file(&path).unwrap();
        std::fs::create_dir(&path).unwrap();
        let report = validate(&index, dir.path(), ValidationMode::Full);
        assert!(report.invalid.contains("b", "audio"));
        assert!(report.unreadable.contains("b", "audio"));
        let doc = String::from_utf8(report_to_document(&report)).unwrap();
        assert!(doc.contains("\"unreadable\""));
        assert_eq!(parse_report(doc.as_bytes()).unwrap(), report);
    }

    #[test]
    fn null_pairs_are_skipped_and_extra_files_ignored() {
        let (dir, index) = fixture();
        let mut clips = index.clips().clone();
        let mut fields = clips[&ClipId::new("b").unwrap()].fields().clone();
        fields.insert("spectrogram".into(), None);
        clips.insert(ClipId::new("b").unwrap(), crate::IndexEntry::new(fields).unwrap());
        let index = DatasetIndex::new(index.checksum_algorithm(), clips, index.metadata().clone()).unwrap();
        std::fs::write(dir.path().join("unindexed.bin"), b"x").unwrap();
        let report = validate(&index, dir.path(), ValidationMode::Full);
        assert!(report.is_clean());
        assert_eq!(report.files_checked, 4);
    }

    #[test]
    fn clean_document_shape() {
        let doc = report_to_document(&ValidationReport::new(ValidationMode::Full));
        assert_eq!(
            String::from_utf8(doc).unwrap(),
            "{\n  \"clean\": true,\n  \"files_checked\": 0,\n  \"invalid\": {\n    \"clips\": {},\n    \"metadata\": []\n  },\n  \"missing\": {\n    \"clips\": {},\n    \"metadata\": []\n  },\n  \"mode\": \"full\"\n}\n"
        );
    }

    #[test]
    fn missing_field_listed_under_missing_clips() {
        let mut report = ValidationReport::new(ValidationMode::Full);
        report.files_checked = 12;
        report.missing.insert(&FileKey::Clip(ClipId::new("clip-0003").unwrap(), "events".into()));
        let value = canonical::parse(&report_to_document(&report)).unwrap();
        assert_eq!(value["missing"]["clips"]["clip-0003"], json!(["events"]));
        assert_eq!(value["clean"], json!(false));
    }

    #[test]
    fn parse_rejects_inconsistent_clean_flag() {
        let mut value = ValidationReport::new(ValidationMode::Fast).to_json();
        value["clean"] = json!(false);
        assert!(ValidationReport::from_json(&value).is_err());
        let mut value = ValidationReport::new(ValidationMode::Fast).to_json();
        value["extra"] = json!(1);
        assert!(ValidationReport::from_json(&value).is_err());
    }
}
