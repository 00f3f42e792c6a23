//! Dataset manifests, the manifest registry and the [`Dataset`] handle.
//!
//! A dataset is pure data: a manifest naming its remotes, its canonical
//! index and the parser for each clip field. Adding a dataset means adding a
//! manifest file and its index; no code is involved.
//!
//! Manifests are discovered as `*.json` files in registry directories. The
//! built-in directory ships with the crate (`datasets/`); user manifests live
//! in `$SOUNDKIT_DATA_HOME/manifests/` (or `~/sound_datasets/manifests/`) and
//! shadow built-ins with the same id. A manifest's `index_ref` is resolved
//! against the directory the manifest was loaded from.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde_json::{json, Map, Value};

use crate::canonical::{self, child_path, Fields};
use crate::error::{Error, Result};
use crate::fetch::RemoteFile;
use crate::index::{check_relative_path, parse_index, DatasetIndex};
use crate::model::{AudioBuffer, Clip, ClipId, EventList, TagList};
use crate::parsers::{self, Delimiter, EventFormatSpec, MetadataTable};

/// Parser selected for a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldBinding {
    AudioWav,
    Tags { delimiter: Delimiter },
    Events(EventFormatSpec),
    MetadataTable,
    Raw,
}

impl FieldBinding {
    pub fn kind(&self) -> &'static str {
        match self {
            FieldBinding::AudioWav => "audio_wav",
            FieldBinding::Tags { .. } => "tags",
            FieldBinding::Events(_) => "events",
            FieldBinding::MetadataTable => "metadata_table",
            FieldBinding::Raw => "raw",
        }
    }

    fn to_json(self) -> Value {
        match self {
            FieldBinding::Tags { delimiter } => {
                json!({"delimiter": delimiter.as_str(), "kind": "tags"})
            }
            FieldBinding::Events(spec) => json!({
                "delimiter": spec.delimiter.as_str(),
                "has_confidence": spec.has_confidence,
                "header_rows": spec.header_rows,
                "kind": "events",
            }),
            other => json!({"kind": other.kind()}),
        }
    }

    fn from_json(value: &Value, path: &str) -> Result<Self> {
        let mut f = Fields::new(value, path)?;
        let delimiter = |f: &mut Fields<'_>| -> Result<Delimiter> {
            let p = f.path_of("delimiter");
            f.string("delimiter")?.parse().map_err(|m| Error::schema(p, m))
        };
        let binding = match f.string("kind")? {
            "audio_wav" => FieldBinding::AudioWav,
            "metadata_table" => FieldBinding::MetadataTable,
            "raw" => FieldBinding::Raw,
            "tags" => FieldBinding::Tags {
                delimiter: delimiter(&mut f)?,
            },
            "events" => {
                let delimiter = delimiter(&mut f)?;
                let has_confidence = f.boolean("has_confidence")?;
                let header_rows = f.count("header_rows")?;
                FieldBinding::Events(EventFormatSpec {
                    delimiter,
                    has_confidence,
                    header_rows: usize::try_from(header_rows)
                        .map_err(|_| Error::schema(f.path_of("header_rows"), "too large"))?,
                })
            }
            other => {
                return Err(Error::schema(
                    f.path_of("kind"),
                    format!("unknown field kind {other:?}"),
                ))
            }
        };
        f.finish()?;
        Ok(binding)
    }
}

/// Declarative description of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub id: String,
    pub name: String,
    pub version: String,
    pub license: String,
    /// BibTeX entry.
    pub citation: String,
    /// Index document, relative to the manifest's directory.
    pub index_ref: String,
    pub remotes: BTreeMap<String, RemoteFile>,
    /// Parser per clip field or metadata name. Unbound fields load as raw bytes.
    pub field_bindings: BTreeMap<String, FieldBinding>,
    /// Directory the manifest was loaded from; not part of the document.
    pub base_dir: Option<PathBuf>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'-')
}

impl DatasetManifest {
    pub fn to_json(&self) -> Value {
        let remotes: Map<String, Value> = self
            .remotes
            .iter()
            .map(|(k, r)| (k.clone(), r.to_json()))
            .collect();
        let bindings: Map<String, Value> = self
            .field_bindings
            .iter()
            .map(|(k, b)| (k.clone(), b.to_json()))
            .collect();
        json!({
            "citation": self.citation,
            "field_bindings": bindings,
            "id": self.id,
            "index_ref": self.index_ref,
            "license": self.license,
            "name": self.name,
            "remotes": remotes,
            "version": self.version,
        })
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let mut f = Fields::new(value, "$")?;
        let id = f.string("id")?.to_owned();
        if !valid_id(&id) {
            return Err(Error::schema("id", format!("{id:?} must match [a-z0-9_-]+")));
        }
        let index_ref = f.string("index_ref")?.to_owned();
        check_relative_path(&index_ref).map_err(|m| Error::schema("index_ref", m))?;

        let mut remotes = BTreeMap::new();
        for (name, v) in f.object("remotes")? {
            let path = child_path("remotes", name);
            let remote = RemoteFile::from_json(v, &path)?;
            if &remote.name != name {
                return Err(Error::schema(
                    child_path(&path, "name"),
                    format!("{:?} does not match its key", remote.name),
                ));
            }
            remotes.insert(name.clone(), remote);
        }

        let mut field_bindings = BTreeMap::new();
        for (field, v) in f.object("field_bindings")? {
            let path = child_path("field_bindings", field);
            if field.is_empty() {
                return Err(Error::schema(path, "empty field name"));
            }
            field_bindings.insert(field.clone(), FieldBinding::from_json(v, &path)?);
        }

        let manifest = DatasetManifest {
            id,
            name: f.string("name")?.to_owned(),
            version: f.string("version")?.to_owned(),
            license: f.string("license")?.to_owned(),
            citation: f.string("citation")?.to_owned(),
            index_ref,
            remotes,
            field_bindings,
            base_dir: None,
        };
        f.finish()?;
        Ok(manifest)
    }

    /// Where the index document lives: under `base_dir` when the manifest came
    /// from a file, otherwise under `data_home`.
    pub fn index_path(&self, data_home: &Path) -> PathBuf {
        let mut p = self.base_dir.clone().unwrap_or_else(|| data_home.to_path_buf());
        p.extend(self.index_ref.split('/'));
        p
    }

    pub fn binding(&self, field: &str) -> FieldBinding {
        self.field_bindings.get(field).copied().unwrap_or(FieldBinding::Raw)
    }
}

pub fn load_manifest(bytes: &[u8]) -> Result<DatasetManifest> {
    DatasetManifest::from_json(&canonical::parse(bytes)?)
}

/// Loads a manifest file, remembering its directory for index resolution.
pub fn load_manifest_file(path: &Path) -> Result<DatasetManifest> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut manifest = load_manifest(&bytes).map_err(|e| match e {
        Error::Schema { path: key, message } => {
            Error::schema(key, format!("{message} (in {})", path.display()))
        }
        other => other,
    })?;
    manifest.base_dir = path.parent().map(Path::to_path_buf);
    Ok(manifest)
}

pub fn serialize_manifest(manifest: &DatasetManifest) -> Vec<u8> {
    canonical::to_bytes(&manifest.to_json())
}

/// Directory of the manifests shipped with this crate.
pub fn builtin_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("datasets")
}

/// Manifests collected from an ordered list of directories; later
/// directories shadow earlier ones.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    manifests: BTreeMap<String, DatasetManifest>,
}

impl Registry {
    pub fn from_dirs<P: AsRef<Path>>(dirs: &[P]) -> Result<Self> {
        let mut manifests = BTreeMap::new();
        for dir in dirs {
            let dir = dir.as_ref();
            let entries = match fs::read_dir(dir) {
                Ok(entries) => entries,
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => continue,
                Err(e) => return Err(Error::io(dir, e)),
            };
            let mut paths: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json") && p.is_file())
                .collect();
            paths.sort();
            for path in paths {
                let manifest = load_manifest_file(&path)?;
                manifests.insert(manifest.id.clone(), manifest);
            }
        }
        Ok(Registry { manifests })
    }

    /// Built-in manifests plus the user directory under `user_root`.
    pub fn with_user_root(user_root: &Path) -> Result<Self> {
        Registry::from_dirs(&[builtin_dir(), user_root.join("manifests")])
    }

    pub fn get(&self, id: &str) -> Result<&DatasetManifest> {
        self.manifests
            .get(id)
            .ok_or_else(|| Error::UnknownDataset(id.to_owned()))
    }

    /// Manifests sorted by id.
    pub fn manifests(&self) -> impl Iterator<Item = &DatasetManifest> {
        self.manifests.values()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.manifests.keys().map(String::as_str).collect()
    }
}

/// Where clip files are read from. Tests substitute a tracing source.
pub trait FileSource: Send + Sync {
    fn read(&self, path: &Path) -> std::io::Result<Vec<u8>>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct LocalFiles;

impl FileSource for LocalFiles {
    fn read(&self, path: &Path) -> std::io::Result<Vec<u8>> {
        fs::read(path)
    }
}

/// A parsed clip asset.
#[derive(Debug, Clone, PartialEq)]
pub enum Annotation {
    Audio(AudioBuffer),
    Tags(TagList),
    Events(EventList),
    Table(MetadataTable),
    Raw(Vec<u8>),
}

impl Annotation {
    pub fn as_audio(&self) -> Option<&AudioBuffer> {
        match self {
            Annotation::Audio(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_tags(&self) -> Option<&TagList> {
        match self {
            Annotation::Tags(t) => Some(t),
            _ => None,
        }
    }

    pub fn as_events(&self) -> Option<&EventList> {
        match self {
            Annotation::Events(e) => Some(e),
            _ => None,
        }
    }

    pub fn as_table(&self) -> Option<&MetadataTable> {
        match self {
            Annotation::Table(t) => Some(t),
            _ => None,
        }
    }

    pub fn as_raw(&self) -> Option<&[u8]> {
        match self {
            Annotation::Raw(b) => Some(b),
            _ => None,
        }
    }
}

fn parse_with(binding: FieldBinding, bytes: Vec<u8>) -> Result<Annotation> {
    Ok(match binding {
        FieldBinding::AudioWav => Annotation::Audio(parsers::load_audio(&bytes)?),
        FieldBinding::Tags { delimiter } => Annotation::Tags(parsers::parse_tags(&bytes, delimiter)?),
        FieldBinding::Events(spec) => Annotation::Events(parsers::parse_events(&bytes, spec)?),
        FieldBinding::MetadataTable => Annotation::Table(parsers::parse_metadata_table(&bytes)?),
        FieldBinding::Raw => Annotation::Raw(bytes),
    })
}

type Slot = Arc<Mutex<Option<Arc<Annotation>>>>;

/// An opened dataset. Cheap to share across threads; parsed annotations are
/// cached for the lifetime of the handle.
pub struct Dataset {
    manifest: DatasetManifest,
    index: DatasetIndex,
    data_home: PathBuf,
    source: Arc<dyn FileSource>,
    cache: Mutex<HashMap<(String, String), Slot>>,
}

impl std::fmt::Debug for Dataset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dataset")
            .field("id", &self.manifest.id)
            .field("data_home", &self.data_home)
            .field("clips", &self.index.clips().len())
            .finish_non_exhaustive()
    }
}

/// Opens a dataset: reads and validates its index, nothing else.
pub fn open_dataset(manifest: &DatasetManifest, data_home: &Path) -> Result<Dataset> {
    Dataset::open_with_source(manifest, data_home, Arc::new(LocalFiles))
}

impl Dataset {
    pub fn open(manifest: &DatasetManifest, data_home: &Path) -> Result<Self> {
        open_dataset(manifest, data_home)
    }

    pub fn open_with_source(
        manifest: &DatasetManifest,
        data_home: &Path,
        source: Arc<dyn FileSource>,
    ) -> Result<Self> {
        let index_path = manifest.index_path(data_home);
        let bytes = source.read(&index_path).map_err(|e| Error::io(&index_path, e))?;
        let index = parse_index(&bytes)?;
        Ok(Dataset {
            manifest: manifest.clone(),
            index,
            data_home: data_home.to_path_buf(),
            source,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    pub fn index(&self) -> &DatasetIndex {
        &self.index
    }

    pub fn data_home(&self) -> &Path {
        &self.data_home
    }

    /// All clip ids, sorted bytewise.
    pub fn clip_ids(&self) -> Vec<ClipId> {
        self.index.clips().keys().cloned().collect()
    }

    /// Resolves the clip's paths without touching the disk.
    pub fn clip(&self, id: &str) -> Result<Clip> {
        let (id, entry) = self
            .index
            .clips()
            .get_key_value(id)
            .ok_or_else(|| Error::UnknownClip(id.to_owned()))?;
        let fields = entry
            .fields()
            .iter()
            .map(|(name, file)| (name.clone(), file.as_ref().map(|f| f.resolve(&self.data_home))))
            .collect();
        Ok(Clip::new(id.clone(), fields))
    }

    /// Like [`Dataset::clip`], with `extras` filled from every index metadata
    /// file bound as `metadata_table` that has a row for this clip. Reads
    /// (and caches) those tables.
    pub fn clip_with_extras(&self, id: &str) -> Result<Clip> {
        let clip = self.clip(id)?;
        let mut extras = BTreeMap::new();
        for (name, binding) in &self.manifest.field_bindings {
            if *binding != FieldBinding::MetadataTable || !self.index.metadata().contains_key(name) {
                continue;
            }
            let table = self.metadata(name)?;
            let table = table.as_table().expect("metadata_table binding yields a table");
            if let Some(row) = table.row(id) {
                let key_column = &table.header()[0];
                extras.extend(
                    row.iter()
                        .filter(|(column, _)| *column != key_column)
                        .map(|(k, v)| (k.clone(), v.clone())),
                );
            }
        }
        Ok(clip.with_extras(extras))
    }

    fn cached(&self, key: (String, String), path: &Path, binding: FieldBinding) -> Result<Arc<Annotation>> {
        let slot = {
            let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
            cache.entry(key).or_default().clone()
        };
        let mut slot = slot.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(value) = slot.as_ref() {
            return Ok(value.clone());
        }
        let bytes = self.source.read(path).map_err(|e| Error::io(path, e))?;
        let value = Arc::new(parse_with(binding, bytes)?);
        *slot = Some(value.clone());
        Ok(value)
    }

    /// Reads and parses one field of a clip with the parser its manifest
    /// binding selects. Results are cached per (clip, field).
    pub fn clip_annotation(&self, clip: &Clip, field: &str) -> Result<Arc<Annotation>> {
        let wrap = |source: Error| Error::Annotation {
            clip: clip.id().to_string(),
            field: field.to_owned(),
            source: Box::new(source),
        };
        let path = match clip.fields().get(field) {
            None => {
                return Err(Error::UnknownField {
                    clip: clip.id().to_string(),
                    field: field.to_owned(),
                })
            }
            Some(None) => {
                return Err(Error::AbsentField {
                    clip: clip.id().to_string(),
                    field: field.to_owned(),
                })
            }
            Some(Some(path)) => path,
        };
        let key = (clip.id().to_string(), field.to_owned());
        self.cached(key, path, self.manifest.binding(field)).map_err(wrap)
    }

    /// Convenience for `clip_annotation(clip(id), field)`.
    pub fn annotation(&self, id: &str, field: &str) -> Result<Arc<Annotation>> {
        self.clip_annotation(&self.clip(id)?, field)
    }

    /// Parses a dataset-level metadata file with its binding.
    pub fn metadata(&self, name: &str) -> Result<Arc<Annotation>> {
        let file = self
            .index
            .metadata()
            .get(name)
            .ok_or_else(|| Error::schema(name, format!("no metadata named {name:?}")))?;
        let path = file.resolve(&self.data_home);
        // metadata keys cannot collide with clip keys: clip ids are non-empty
        self.cached((String::new(), name.to_owned()), &path, self.manifest.binding(name))
    }

    pub fn cite(&self) -> &str {
        &self.manifest.citation
    }

    pub fn license(&self) -> &str {
        &self.manifest.license
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const EXEMPLAR: &str = r#"{
  "citation": "@inproceedings{exemplar2022, title={Exemplar Mini}, year={2022}}",
  "field_bindings": {
    "audio": {"kind": "audio_wav"},
    "events": {"delimiter": "tab", "has_confidence": false, "header_rows": 0, "kind": "events"},
    "tags": {"delimiter": "comma", "kind": "tags"}
  },
  "id": "exemplar-mini",
  "index_ref": "indexes/exemplar-mini_1.0.json",
  "license": "CC-BY-4.0",
  "name": "Exemplar Mini Sound Dataset",
  "remotes": {
    "annotations": {"checksum": "900150983cd24fb0d6963f7d28e17f72", "checksum_algorithm": "md5", "destination": ".", "name": "annotations", "unpack": "zip", "url": "http://127.0.0.1:8000/annotations.zip"},
    "audio": {"checksum": "900150983cd24fb0d6963f7d28e17f72", "checksum_algorithm": "md5", "destination": ".", "name": "audio", "unpack": "zip", "url": "http://127.0.0.1:8000/audio.zip"}
  },
  "version": "1.0"
}"#;

    #[test]
    fn exemplar_manifest_loads() {
        let m = load_manifest(EXEMPLAR.as_bytes()).unwrap();
        assert_eq!(m.remotes.len(), 2);
        assert_eq!(m.field_bindings.len(), 3);
        assert_eq!(m.license, "CC-BY-4.0");
        assert_eq!(
            m.binding("events"),
            FieldBinding::Events(EventFormatSpec::new(Delimiter::Tab))
        );
        assert_eq!(m.binding("unbound"), FieldBinding::Raw);
        assert_eq!(load_manifest(&serialize_manifest(&m)).unwrap(), m);
    }

    fn schema_path(doc: &str) -> String {
        match load_manifest(doc.as_bytes()) {
            Err(Error::Schema { path, .. }) => path,
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_id() {
        assert_eq!(schema_path(&EXEMPLAR.replace("\"exemplar-mini\"", "\"Bad ID\"")), "id");
    }

    #[test]
    fn rejects_unknown_kind() {
        let doc = EXEMPLAR.replace(
            r#""events": {"delimiter": "tab", "has_confidence": false, "header_rows": 0, "kind": "events"}"#,
            r#""events": {"kind": "melody"}"#,
        );
        assert_eq!(schema_path(&doc), "field_bindings.events.kind");
    }

    #[test]
    fn rejects_unknown_keys_with_path() {
        let doc = EXEMPLAR.replace(r#""name": "audio","#, r#""name": "audio", "mirror": "x","#);
        assert_eq!(schema_path(&doc), "remotes.audio.mirror");
        let doc = EXEMPLAR.replace(r#""version": "1.0""#, r#""version": "1.0", "extra": 1"#);
        assert_eq!(schema_path(&doc), "extra");
        let doc = EXEMPLAR.replace(r#""kind": "audio_wav""#, r#""kind": "audio_wav", "delimiter": "tab""#);
        assert_eq!(schema_path(&doc), "field_bindings.audio.delimiter");
    }

    #[test]
    fn rejects_mismatched_remote_name_and_bad_index_ref() {
        let doc = EXEMPLAR.replace(r#""name": "audio","#, r#""name": "sound","#);
        assert_eq!(schema_path(&doc), "remotes.audio.name");
        let doc = EXEMPLAR.replace("indexes/exemplar-mini_1.0.json", "../index.json");
        assert_eq!(schema_path(&doc), "index_ref");
        let doc = EXEMPLAR.replace(r#""license": "CC-BY-4.0","#, "");
        assert_eq!(schema_path(&doc), "license");
    }

    #[test]
    fn missing_index_names_resolved_path() {
        let m = load_manifest(EXEMPLAR.as_bytes()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        match open_dataset(&m, dir.path()) {
            Err(Error::Io { path, .. }) => {
                assert_eq!(path, dir.path().join("indexes/exemplar-mini_1.0.json"))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn registry_shadows_and_sorts() {
        let builtin = tempfile::tempdir().unwrap();
        let user = tempfile::tempdir().unwrap();
        fs::write(builtin.path().join("mini.json"), EXEMPLAR).unwrap();
        fs::write(
            builtin.path().join("other.json"),
            EXEMPLAR.replace("\"exemplar-mini\"", "\"aaa\""),
        )
        .unwrap();
        fs::write(
            user.path().join("mini.json"),
            EXEMPLAR.replace("CC-BY-4.0", "CC0-1.0"),
        )
        .unwrap();
        fs::write(user.path().join("notes.txt"), "ignored").unwrap();
        let reg = Registry::from_dirs(&[builtin.path(), user.path(), Path::new("/nonexistent")]).unwrap();
        assert_eq!(reg.ids(), ["aaa", "exemplar-mini"]);
        let m = reg.get("exemplar-mini").unwrap();
        assert_eq!(m.license, "CC0-1.0");
        assert_eq!(m.base_dir.as_deref(), Some(user.path()));
        assert!(matches!(reg.get("nope"), Err(Error::UnknownDataset(_))));
    }
}
