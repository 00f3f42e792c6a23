//! The canonical index: for every clip, the relative path and checksum of
//! each of its files, plus dataset-level metadata files.
//!
//! Indexes are persisted as canonical JSON (see [`crate::canonical`]):
//!
//! ```text
//! {
//!   "checksum_algorithm": "md5",
//!   "clips": {
//!     "clip-0001": {
//!       "audio": ["audio/clip-0001.wav", "<hex>"],
//!       "spectrogram": [null, null]
//!     }
//!   },
//!   "metadata": {
//!     "clip_info": ["metadata/clips.csv", "<hex>"]
//!   },
//!   "schema_version": "1.0"
//! }
//! ```
//!
//! A `[null, null]` field marks an asset the clip lacks by design.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use md5::Md5;
use rayon::prelude::*;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::canonical::{self, child_path, expect_object, expect_str, Fields};
use crate::error::{Error, Result};
use crate::model::ClipId;

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChecksumAlgorithm {
    Md5,
    Sha256,
}

impl ChecksumAlgorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            ChecksumAlgorithm::Md5 => "md5",
            ChecksumAlgorithm::Sha256 => "sha256",
        }
    }

    /// Length of a digest in hex characters.
    pub fn hex_len(self) -> usize {
        match self {
            ChecksumAlgorithm::Md5 => 32,
            ChecksumAlgorithm::Sha256 => 64,
        }
    }

    /// Digest of an in-memory byte string.
    pub fn digest(self, bytes: &[u8]) -> String {
        let mut hasher = Hasher::new(self);
        hasher.update(bytes);
        hasher.finish()
    }
}

impl fmt::Display for ChecksumAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChecksumAlgorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "md5" => Ok(ChecksumAlgorithm::Md5),
            "sha256" => Ok(ChecksumAlgorithm::Sha256),
            other => Err(format!("unsupported checksum algorithm {other:?}")),
        }
    }
}

/// Incremental digest over either supported algorithm.
pub(crate) enum Hasher {
    Md5(Md5),
    Sha256(Sha256),
}

impl Hasher {
    pub(crate) fn new(algorithm: ChecksumAlgorithm) -> Self {
        match algorithm {
            ChecksumAlgorithm::Md5 => Hasher::Md5(Md5::new()),
            ChecksumAlgorithm::Sha256 => Hasher::Sha256(Sha256::new()),
        }
    }

    pub(crate) fn update(&mut self, bytes: &[u8]) {
        match self {
            Hasher::Md5(h) => h.update(bytes),
            Hasher::Sha256(h) => h.update(bytes),
        }
    }

    pub(crate) fn finish(self) -> String {
        match self {
            Hasher::Md5(h) => to_hex(&h.finalize()),
            Hasher::Sha256(h) => to_hex(&h.finalize()),
        }
    }
}

fn to_hex(bytes: &[u8]) -> String {
    const DIGITS: &[u8; 16] = b"0123456789abcdef";
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push(DIGITS[usize::from(b >> 4)] as char);
        out.push(DIGITS[usize::from(b & 0xf)] as char);
    }
    out
}

pub(crate) fn digest_reader(mut reader: impl Read, algorithm: ChecksumAlgorithm) -> std::io::Result<String> {
    let mut hasher = Hasher::new(algorithm);
    let mut buf = vec![0u8; 64 * 1024];
    loop {
        let n = match reader.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        };
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finish())
}

/// Streams the file through the digest and returns it as lowercase hex.
pub fn compute_checksum(path: &Path, algorithm: ChecksumAlgorithm) -> Result<String> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    digest_reader(file, algorithm).map_err(|e| Error::io(path, e))
}

/// Checks the relative path rules shared by index entries and remote
/// destinations: `/`-separated, relative, no empty, `.` or `..` segments.
pub(crate) fn check_relative_path(path: &str) -> std::result::Result<(), String> {
    if path.is_empty() {
        return Err("empty path".into());
    }
    if path.starts_with('/') {
        return Err(format!("absolute path {path:?}"));
    }
    if path.contains('\\') || path.contains('\0') {
        return Err(format!("path {path:?} contains a backslash or NUL"));
    }
    for segment in path.split('/') {
        match segment {
            "" => return Err(format!("path {path:?} has an empty segment")),
            "." | ".." => return Err(format!("path {path:?} has a `{segment}` segment")),
            _ => {}
        }
    }
    Ok(())
}

fn is_lower_hex(s: &str) -> bool {
    s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

pub(crate) fn check_checksum(checksum: &str, algorithm: ChecksumAlgorithm) -> std::result::Result<(), String> {
    if !is_lower_hex(checksum) {
        return Err(format!("checksum {checksum:?} is not lowercase hex"));
    }
    if checksum.len() != algorithm.hex_len() {
        return Err(format!(
            "checksum has {} hex digits, {} needs {}",
            checksum.len(),
            algorithm,
            algorithm.hex_len()
        ));
    }
    Ok(())
}

/// Relative location and expected digest of one file.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FileRef {
    path: String,
    checksum: String,
}

impl FileRef {
    /// Validates the path rules and that `checksum` is lowercase hex of a
    /// supported digest length. The length is checked against the index's
    /// algorithm when the ref is placed in a [`DatasetIndex`].
    pub fn new(path: impl Into<String>, checksum: impl Into<String>) -> Result<Self> {
        let path = path.into();
        let checksum = checksum.into();
        check_relative_path(&path).map_err(|m| Error::schema("path", m))?;
        if !is_lower_hex(&checksum) || ![32, 64].contains(&checksum.len()) {
            return Err(Error::schema(
                "checksum",
                format!("{checksum:?} is not a lowercase md5 or sha256 hex digest"),
            ));
        }
        Ok(FileRef { path, checksum })
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    pub fn checksum(&self) -> &str {
        &self.checksum
    }

    /// Joins the relative path under `root`.
    pub fn resolve(&self, root: &Path) -> PathBuf {
        let mut out = root.to_path_buf();
        out.extend(self.path.split('/'));
        out
    }
}

/// Files of one clip. `None` marks an asset the clip lacks by design.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexEntry {
    fields: BTreeMap<String, Option<FileRef>>,
}

impl IndexEntry {
    pub fn new(fields: BTreeMap<String, Option<FileRef>>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::schema("fields", "a clip needs at least one field"));
        }
        if fields.keys().any(String::is_empty) {
            return Err(Error::schema("fields", "empty field name"));
        }
        Ok(IndexEntry { fields })
    }

    pub fn fields(&self) -> &BTreeMap<String, Option<FileRef>> {
        &self.fields
    }

    pub fn get(&self, field: &str) -> Option<&Option<FileRef>> {
        self.fields.get(field)
    }
}

/// The canonical version of a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetIndex {
    checksum_algorithm: ChecksumAlgorithm,
    clips: BTreeMap<ClipId, IndexEntry>,
    metadata: BTreeMap<String, FileRef>,
}

impl DatasetIndex {
    pub fn new(
        checksum_algorithm: ChecksumAlgorithm,
        clips: BTreeMap<ClipId, IndexEntry>,
        metadata: BTreeMap<String, FileRef>,
    ) -> Result<Self> {
        for (id, entry) in &clips {
            for (field, file) in &entry.fields {
                if let Some(file) = file {
                    check_checksum(&file.checksum, checksum_algorithm).map_err(|m| {
                        Error::schema(format!("clips.{id}.{field}"), m)
                    })?;
                }
            }
        }
        for (name, file) in &metadata {
            if name.is_empty() {
                return Err(Error::schema("metadata", "empty metadata name"));
            }
            check_checksum(&file.checksum, checksum_algorithm)
                .map_err(|m| Error::schema(format!("metadata.{name}"), m))?;
        }
        Ok(DatasetIndex {
            checksum_algorithm,
            clips,
            metadata,
        })
    }

    pub fn empty(checksum_algorithm: ChecksumAlgorithm) -> Self {
        DatasetIndex {
            checksum_algorithm,
            clips: BTreeMap::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn schema_version(&self) -> &'static str {
        SCHEMA_VERSION
    }

    pub fn checksum_algorithm(&self) -> ChecksumAlgorithm {
        self.checksum_algorithm
    }

    pub fn clips(&self) -> &BTreeMap<ClipId, IndexEntry> {
        &self.clips
    }

    pub fn clip(&self, id: &str) -> Option<&IndexEntry> {
        self.clips.get(id)
    }

    pub fn metadata(&self) -> &BTreeMap<String, FileRef> {
        &self.metadata
    }

    /// Number of non-null file references.
    pub fn file_count(&self) -> usize {
        self.clips
            .values()
            .flat_map(|e| e.fields.values())
            .filter(|f| f.is_some())
            .count()
            + self.metadata.len()
    }

    pub fn to_json(&self) -> Value {
        let file = |f: &FileRef| json!([f.path, f.checksum]);
        let clips: Map<String, Value> = self
            .clips
            .iter()
            .map(|(id, entry)| {
                let fields: Map<String, Value> = entry
                    .fields
                    .iter()
                    .map(|(name, f)| {
                        let v = f.as_ref().map_or_else(|| json!([null, null]), file);
                        (name.clone(), v)
                    })
                    .collect();
                (id.to_string(), Value::Object(fields))
            })
            .collect();
        let metadata: Map<String, Value> = self
            .metadata
            .iter()
            .map(|(name, f)| (name.clone(), file(f)))
            .collect();
        json!({
            "checksum_algorithm": self.checksum_algorithm.as_str(),
            "clips": clips,
            "metadata": metadata,
            "schema_version": SCHEMA_VERSION,
        })
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let mut top = Fields::new(value, "$")?;
        let version = top.string("schema_version")?;
        if version != SCHEMA_VERSION {
            return Err(Error::schema(
                "schema_version",
                format!("unsupported schema version {version:?}"),
            ));
        }
        let algorithm: ChecksumAlgorithm = top
            .string("checksum_algorithm")?
            .parse()
            .map_err(|m| Error::schema("checksum_algorithm", m))?;

        let mut clips = BTreeMap::new();
        for (id, entry) in top.object("clips")? {
            let path = child_path("clips", id);
            let clip_id = ClipId::new(id.as_str()).map_err(|e| Error::schema(&path, e.to_string()))?;
            let mut fields = BTreeMap::new();
            for (field, value) in expect_object(entry, &path)? {
                let field_path = child_path(&path, field);
                let file = parse_file_pair(value, &field_path, algorithm, true)?;
                fields.insert(field.clone(), file);
            }
            let entry = IndexEntry::new(fields).map_err(|e| match e {
                Error::Schema { message, .. } => Error::schema(&path, message),
                other => other,
            })?;
            clips.insert(clip_id, entry);
        }

        let mut metadata = BTreeMap::new();
        for (name, value) in top.object("metadata")? {
            let path = child_path("metadata", name);
            if name.is_empty() {
                return Err(Error::schema(path, "empty metadata name"));
            }
            let file = parse_file_pair(value, &path, algorithm, false)?
                .expect("null pairs rejected for metadata");
            metadata.insert(name.clone(), file);
        }
        top.finish()?;

        DatasetIndex::new(algorithm, clips, metadata)
    }
}

fn parse_file_pair(
    value: &Value,
    path: &str,
    algorithm: ChecksumAlgorithm,
    allow_null: bool,
) -> Result<Option<FileRef>> {
    let pair = match value.as_array() {
        Some(items) if items.len() == 2 => items,
        _ => return Err(Error::schema(path, "expected a [path, checksum] pair")),
    };
    if pair[0].is_null() && pair[1].is_null() {
        if allow_null {
            return Ok(None);
        }
        return Err(Error::schema(path, "null pair not allowed here"));
    }
    let rel = expect_str(&pair[0], path)?;
    let checksum = expect_str(&pair[1], path)?;
    check_relative_path(rel).map_err(|m| Error::schema(path, m))?;
    check_checksum(checksum, algorithm).map_err(|m| Error::schema(path, m))?;
    Ok(Some(FileRef {
        path: rel.to_owned(),
        checksum: checksum.to_owned(),
    }))
}

/// Parses and validates an index document.
pub fn parse_index(bytes: &[u8]) -> Result<DatasetIndex> {
    DatasetIndex::from_json(&canonical::parse(bytes)?)
}

/// Canonical bytes of an index.
pub fn serialize_index(index: &DatasetIndex) -> Vec<u8> {
    canonical::to_bytes(&index.to_json())
}

/// How [`build_index`] turns a file's root-relative path into a clip field.
///
/// Files under a top-level directory `dir/rest.ext` become field `dir` of
/// clip `rest` (extension of the last segment stripped, inner separators
/// kept), unless `dir` is listed in `metadata_dirs`. Metadata files, and
/// files directly under the root, become dataset metadata named by their
/// file stem.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FieldRule {
    pub metadata_dirs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Placement {
    Clip { id: String, field: String },
    Metadata { name: String },
}

fn strip_extension(segment: &str) -> &str {
    match segment.rfind('.') {
        Some(0) | None => segment,
        Some(i) => &segment[..i],
    }
}

impl FieldRule {
    pub fn place(&self, relative: &str) -> Placement {
        match relative.split_once('/') {
            Some((dir, rest)) if !self.metadata_dirs.iter().any(|d| d == dir) => {
                let (parent, file) = match rest.rsplit_once('/') {
                    Some((parent, file)) => (Some(parent), file),
                    None => (None, rest),
                };
                let stem = strip_extension(file);
                let id = match parent {
                    Some(parent) => format!("{parent}/{stem}"),
                    None => stem.to_owned(),
                };
                Placement::Clip {
                    id,
                    field: dir.to_owned(),
                }
            }
            _ => {
                let file = relative.rsplit('/').next().unwrap_or(relative);
                Placement::Metadata {
                    name: strip_extension(file).to_owned(),
                }
            }
        }
    }
}

/// Walks `root` (symlinks are skipped, never followed), places every regular
/// file with `rule`, and checksums them. Output does not depend on `workers`.
pub fn build_index(root: &Path, algorithm: ChecksumAlgorithm, rule: &FieldRule) -> Result<DatasetIndex> {
    build_index_with_workers(root, algorithm, rule, None)
}

pub fn build_index_with_workers(
    root: &Path,
    algorithm: ChecksumAlgorithm,
    rule: &FieldRule,
    workers: Option<usize>,
) -> Result<DatasetIndex> {
    let meta = std::fs::metadata(root).map_err(|e| Error::io(root, e))?;
    if !meta.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotADirectory, "not a directory"),
        ));
    }

    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(root).follow_links(false) {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            Error::io(path, e.into_io_error().unwrap_or_else(|| std::io::Error::other("walk error")))
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(root)
            .expect("walkdir yields paths under root");
        let rel = rel
            .components()
            .map(|c| c.as_os_str().to_str())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Rule(format!("non UTF-8 path {}", entry.path().display())))?
            .join("/");
        check_relative_path(&rel).map_err(Error::Rule)?;
        files.push(rel);
    }
    files.sort_unstable_by(|a, b| a.as_bytes().cmp(b.as_bytes()));

    let mut clip_files: BTreeMap<ClipId, BTreeMap<String, String>> = BTreeMap::new();
    let mut meta_files: BTreeMap<String, String> = BTreeMap::new();
    for rel in &files {
        match rule.place(rel) {
            Placement::Clip { id, field } => {
                let clip_id = ClipId::new(id).map_err(|e| Error::Rule(format!("{rel}: {e}")))?;
                let slot = clip_files.entry(clip_id.clone()).or_default();
                if let Some(prev) = slot.insert(field.clone(), rel.clone()) {
                    return Err(Error::Rule(format!(
                        "{prev} and {rel} both map to clip {clip_id:?}, field {field:?}"
                    )));
                }
            }
            Placement::Metadata { name } => {
                if let Some(prev) = meta_files.insert(name.clone(), rel.clone()) {
                    return Err(Error::Rule(format!(
                        "{prev} and {rel} both map to metadata {name:?}"
                    )));
                }
            }
        }
    }

    let digests = checksum_all(root, &files, algorithm, workers)?;
    let file_ref = |rel: &String| FileRef {
        path: rel.clone(),
        checksum: digests[rel].clone(),
    };
    let clips = clip_files
        .into_iter()
        .map(|(id, fields)| {
            let fields = fields.iter().map(|(f, rel)| (f.clone(), Some(file_ref(rel)))).collect();
            (id, IndexEntry { fields })
        })
        .collect();
    let metadata = meta_files.iter().map(|(n, rel)| (n.clone(), file_ref(rel))).collect();
    DatasetIndex::new(algorithm, clips, metadata)
}

/// Runs `f` on a rayon pool of `workers` threads, or the global pool.
pub(crate) fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}

fn checksum_all(
    root: &Path,
    files: &[String],
    algorithm: ChecksumAlgorithm,
    workers: Option<usize>,
) -> Result<BTreeMap<String, String>> {
    with_workers(workers, || {
        files
            .par_iter()
            .map(|rel| {
                let mut path = root.to_path_buf();
                path.extend(rel.split('/'));
                compute_checksum(&path, algorithm).map(|d| (rel.clone(), d))
            })
            .collect::<Result<Vec<_>>>()
    })
    .map(|pairs| pairs.into_iter().collect())
}
