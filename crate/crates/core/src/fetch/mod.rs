//! Downloading dataset remotes.
//!
//! Each remote is streamed to a temporary file next to its destination,
//! checked against its declared digest, and only then renamed into place; a
//! file whose digest does not match is never installed. Archives are
//! unpacked with [`extract_archive`], and a small receipt under
//! `<data_home>/.soundkit/receipts/` records what each archive installed so
//! later runs can skip it without the archive being kept around.

mod archive;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde_json::{json, Value};

pub use archive::{extract_archive, ArchiveKind};

use crate::canonical::{self, Fields};
use crate::error::{Error, Result};
use crate::index::{check_checksum, check_relative_path, ChecksumAlgorithm, Hasher};
use crate::registry::DatasetManifest;

const MAX_REDIRECTS: u32 = 5;
const RECEIPT_DIR: &str = ".soundkit/receipts";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Unpack {
    None,
    Zip,
    TarGz,
}

impl Unpack {
    pub fn as_str(self) -> &'static str {
        match self {
            Unpack::None => "none",
            Unpack::Zip => "zip",
            Unpack::TarGz => "tar_gz",
        }
    }

    pub fn archive_kind(self) -> Option<ArchiveKind> {
        match self {
            Unpack::None => None,
            Unpack::Zip => Some(ArchiveKind::Zip),
            Unpack::TarGz => Some(ArchiveKind::TarGz),
        }
    }
}

impl FromStr for Unpack {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(Unpack::None),
            "zip" => Ok(Unpack::Zip),
            "tar_gz" => Ok(Unpack::TarGz),
            other => Err(format!("unknown unpack kind {other:?}")),
        }
    }
}

/// One downloadable file of a dataset.
///
/// `destination` is a directory relative to the data home (`.` for the data
/// home itself). The download is stored there under the last segment of the
/// URL path, and archives are unpacked into the same directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteFile {
    pub name: String,
    pub url: String,
    pub checksum: String,
    pub checksum_algorithm: ChecksumAlgorithm,
    pub destination: String,
    pub unpack: Unpack,
}

impl RemoteFile {
    pub fn validate(&self, path: &str) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::schema(path, "empty remote name"));
        }
        if !(self.url.starts_with("http://") || self.url.starts_with("https://")) {
            return Err(Error::schema(
                canonical::child_path(path, "url"),
                format!("{:?} is not an http(s) URL", self.url),
            ));
        }
        check_checksum(&self.checksum, self.checksum_algorithm)
            .map_err(|m| Error::schema(canonical::child_path(path, "checksum"), m))?;
        if self.destination != "." {
            check_relative_path(&self.destination)
                .map_err(|m| Error::schema(canonical::child_path(path, "destination"), m))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "checksum": self.checksum,
            "checksum_algorithm": self.checksum_algorithm.as_str(),
            "destination": self.destination,
            "name": self.name,
            "unpack": self.unpack.as_str(),
            "url": self.url,
        })
    }

    pub fn from_json(value: &Value, path: &str) -> Result<Self> {
        let mut f = Fields::new(value, path)?;
        let algorithm_path = f.path_of("checksum_algorithm");
        let unpack_path = f.path_of("unpack");
        let remote = RemoteFile {
            name: f.string("name")?.to_owned(),
            url: f.string("url")?.to_owned(),
            checksum: f.string("checksum")?.to_owned(),
            checksum_algorithm: f
                .string("checksum_algorithm")?
                .parse()
                .map_err(|m| Error::schema(algorithm_path, m))?,
            destination: f.string("destination")?.to_owned(),
            unpack: f
                .string("unpack")?
                .parse()
                .map_err(|m| Error::schema(unpack_path, m))?,
        };
        f.finish()?;
        remote.validate(path)?;
        Ok(remote)
    }

    pub fn destination_dir(&self, data_home: &Path) -> PathBuf {
        let mut dir = data_home.to_path_buf();
        if self.destination != "." {
            dir.extend(self.destination.split('/'));
        }
        dir
    }

    /// File name the download is stored under.
    pub fn file_name(&self) -> String {
        let rest = self.url.split_once("://").map_or("", |(_, r)| r);
        let path = rest.split(['?', '#']).next().unwrap_or("");
        let last = path.split_once('/').map_or("", |(_, p)| p).rsplit('/').next().unwrap_or("");
        match check_relative_path(last) {
            Ok(()) if !last.contains('%') => last.to_owned(),
            _ => self.name.clone(),
        }
    }

    pub fn local_path(&self, data_home: &Path) -> PathBuf {
        self.destination_dir(data_home).join(self.file_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Downloaded,
    AlreadyPresent,
    Skipped,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Downloaded => "downloaded",
            Outcome::AlreadyPresent => "already_present",
            Outcome::Skipped => "skipped",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FetchSummary {
    pub outcomes: BTreeMap<String, Outcome>,
    pub bytes_transferred: u64,
    pub extracted_files: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchedRemote {
    pub path: PathBuf,
    pub outcome: Outcome,
    pub bytes_transferred: u64,
}

fn agent() -> ureq::Agent {
    ureq::AgentBuilder::new()
        .redirects(MAX_REDIRECTS)
        .timeout_connect(Duration::from_secs(30))
        .timeout_read(Duration::from_secs(120))
        .build()
}

enum Attempt {
    /// Worth one more try: the connection dropped.
    Transport(String),
    Fatal(Error),
}

fn network(url: &str, message: impl Into<String>) -> Error {
    Error::Network {
        url: url.to_owned(),
        message: message.into(),
    }
}

/// Streams `url` into `out`, returning the digest and byte count.
fn download_once(
    agent: &ureq::Agent,
    url: &str,
    algorithm: ChecksumAlgorithm,
    out: &mut fs::File,
    out_path: &Path,
) -> std::result::Result<(String, u64), (Attempt, u64)> {
    let response = match agent.get(url).call() {
        Ok(r) => r,
        Err(ureq::Error::Status(code, _)) => {
            return Err((Attempt::Fatal(network(url, format!("HTTP status {code}"))), 0))
        }
        Err(ureq::Error::Transport(t)) => return Err((Attempt::Transport(t.to_string()), 0)),
    };
    let mut reader = response.into_reader();
    let mut hasher = Hasher::new(algorithm);
    let mut buf = vec![0u8; 64 * 1024];
    let mut total = 0u64;
    loop {
        let n = match reader.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err((Attempt::Transport(e.to_string()), total)),
        };
        hasher.update(&buf[..n]);
        if let Err(e) = out.write_all(&buf[..n]) {
            return Err((Attempt::Fatal(Error::io(out_path, e)), total));
        }
        total += n as u64;
    }
    Ok((hasher.finish(), total))
}

fn matches_checksum(path: &Path, remote: &RemoteFile) -> bool {
    crate::index::compute_checksum(path, remote.checksum_algorithm)
        .is_ok_and(|d| d == remote.checksum)
}

/// Makes `remote` available under `data_home`, downloading it unless a file
/// with the declared digest is already in place (or `force` is set).
pub fn fetch_remote(remote: &RemoteFile, data_home: &Path, force: bool) -> Result<FetchedRemote> {
    let dir = remote.destination_dir(data_home);
    let target = remote.local_path(data_home);
    if !force && target.is_file() && matches_checksum(&target, remote) {
        return Ok(FetchedRemote {
            path: target,
            outcome: Outcome::AlreadyPresent,
            bytes_transferred: 0,
        });
    }
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    let agent = agent();
    let mut transferred = 0u64;
    let mut retried = false;
    loop {
        let mut tmp = tempfile::Builder::new()
            .prefix(".soundkit-download-")
            .tempfile_in(&dir)
            .map_err(|e| Error::io(&dir, e))?;
        let tmp_path = tmp.path().to_path_buf();
        match download_once(&agent, &remote.url, remote.checksum_algorithm, tmp.as_file_mut(), &tmp_path) {
            Ok((digest, n)) => {
                transferred += n;
                if digest != remote.checksum {
                    return Err(Error::ChecksumMismatch {
                        name: remote.name.clone(),
                        expected: remote.checksum.clone(),
                        actual: digest,
                    });
                }
                tmp.as_file().sync_all().map_err(|e| Error::io(&tmp_path, e))?;
                tmp.persist(&target).map_err(|e| Error::io(&target, e.error))?;
                return Ok(FetchedRemote {
                    path: target,
                    outcome: Outcome::Downloaded,
                    bytes_transferred: transferred,
                });
            }
            Err((Attempt::Transport(message), n)) => {
                transferred += n;
                if retried {
                    return Err(network(&remote.url, message));
                }
                retried = true;
            }
            Err((Attempt::Fatal(e), _)) => return Err(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DownloadOptions {
    /// Remote names to fetch; `None` fetches all of them.
    pub partial: Option<BTreeSet<String>>,
    pub force: bool,
    /// Delete archives once they have been unpacked.
    pub cleanup: bool,
}

impl Default for DownloadOptions {
    fn default() -> Self {
        DownloadOptions {
            partial: None,
            force: false,
            cleanup: true,
        }
    }
}

fn receipt_path(data_home: &Path, remote: &RemoteFile) -> PathBuf {
    let mut p = data_home.to_path_buf();
    p.extend(RECEIPT_DIR.split('/'));
    p.join(format!("{}.json", remote.name))
}

fn read_receipt(data_home: &Path, remote: &RemoteFile) -> Option<Vec<String>> {
    let bytes = fs::read(receipt_path(data_home, remote)).ok()?;
    let value = canonical::parse(&bytes).ok()?;
    if value["checksum"].as_str()? != remote.checksum || value["url"].as_str()? != remote.url {
        return None;
    }
    value["files"]
        .as_array()?
        .iter()
        .map(|v| v.as_str().map(str::to_owned))
        .collect()
}

/// True when a previous run unpacked this exact archive and every file it
/// installed is still there.
fn receipt_is_current(data_home: &Path, remote: &RemoteFile) -> bool {
    let dir = remote.destination_dir(data_home);
    read_receipt(data_home, remote).is_some_and(|files| {
        files
            .iter()
            .all(|rel| check_relative_path(rel).is_ok() && dir.join(rel).is_file())
    })
}

fn write_receipt(data_home: &Path, remote: &RemoteFile, files: &[String]) -> Result<()> {
    let path = receipt_path(data_home, remote);
    let parent = path.parent().expect("receipt has a parent");
    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let doc = json!({"checksum": remote.checksum, "files": files, "url": remote.url});
    let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(|e| Error::io(parent, e))?;
    tmp.write_all(&canonical::to_bytes(&doc))
        .map_err(|e| Error::io(&path, e))?;
    tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
    Ok(())
}

fn install_remote(
    remote: &RemoteFile,
    data_home: &Path,
    options: &DownloadOptions,
    summary: &mut FetchSummary,
) -> Result<Outcome> {
    let Some(kind) = remote.unpack.archive_kind() else {
        let fetched = fetch_remote(remote, data_home, options.force)?;
        summary.bytes_transferred += fetched.bytes_transferred;
        return Ok(fetched.outcome);
    };
    if !options.force && receipt_is_current(data_home, remote) {
        return Ok(Outcome::AlreadyPresent);
    }
    let fetched = fetch_remote(remote, data_home, options.force)?;
    summary.bytes_transferred += fetched.bytes_transferred;
    let files = extract_archive(&fetched.path, kind, &remote.destination_dir(data_home))?;
    summary.extracted_files += files.len() as u64;
    write_receipt(data_home, remote, &files)?;
    if options.cleanup {
        fs::remove_file(&fetched.path).map_err(|e| Error::io(&fetched.path, e))?;
    }
    Ok(fetched.outcome)
}

/// Fetches (and unpacks) the selected remotes of `manifest`, in name order.
///
/// On failure the returned [`Error::Remote`] names the failing remote and
/// carries the outcomes of those handled before it; their files stay
/// installed.
pub fn download_dataset(
    manifest: &DatasetManifest,
    data_home: &Path,
    options: &DownloadOptions,
) -> Result<FetchSummary> {
    if let Some(partial) = &options.partial {
        if let Some(unknown) = partial.iter().find(|n| !manifest.remotes.contains_key(*n)) {
            return Err(Error::UnknownRemote(unknown.clone()));
        }
    }
    let mut summary = FetchSummary::default();
    for (name, remote) in &manifest.remotes {
        let selected = options.partial.as_ref().is_none_or(|p| p.contains(name));
        if !selected {
            summary.outcomes.insert(name.clone(), Outcome::Skipped);
            continue;
        }
        match install_remote(remote, data_home, options, &mut summary) {
            Ok(outcome) => {
                summary.outcomes.insert(name.clone(), outcome);
            }
            Err(source) => {
                return Err(Error::Remote {
                    remote: name.clone(),
                    completed: Box::new(summary),
                    source: Box::new(source),
                })
            }
        }
    }
    Ok(summary)
}
