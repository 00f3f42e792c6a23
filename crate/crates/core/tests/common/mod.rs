//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Cursor, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use soundkit::fetch::extract_archive;
use soundkit::model::AudioBuffer;
use soundkit::parsers::encode_wav_pcm16;
use soundkit::registry::{builtin_dir, serialize_manifest, FileSource, LocalFiles};
use soundkit::{ChecksumAlgorithm, DatasetManifest, Registry};

pub const EXEMPLAR_BASE_URL: &str = "http://127.0.0.1:8000";

#[derive(Default)]
struct ServerState {
    routes: Mutex<HashMap<String, Vec<u8>>>,
    bytes: AtomicU64,
    requests: AtomicUsize,
    stop: AtomicBool,
}

/// Minimal HTTP/1.1 server for GET requests on 127.0.0.1. Every response
/// closes its connection. Counts body bytes served.
pub struct FixtureServer {
    port: u16,
    state: Arc<ServerState>,
    accept: Option<JoinHandle<()>>,
}

impl FixtureServer {
    pub fn start() -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let port = listener.local_addr().unwrap().port();
        let state = Arc::new(ServerState::default());
        let shared = state.clone();
        let accept = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if shared.stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let state = shared.clone();
                std::thread::spawn(move || {
                    let _ = handle(stream, &state);
                });
            }
        });
        FixtureServer {
            port,
            state,
            accept: Some(accept),
        }
    }

    pub fn base_url(&self) -> String {
        format!("http://127.0.0.1:{}", self.port)
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}/{}", self.base_url(), path.trim_start_matches('/'))
    }

    pub fn set(&self, path: &str, body: Vec<u8>) {
        let key = format!("/{}", path.trim_start_matches('/'));
        self.state.routes.lock().unwrap().insert(key, body);
    }

    pub fn get(&self, path: &str) -> Option<Vec<u8>> {
        let key = format!("/{}", path.trim_start_matches('/'));
        self.state.routes.lock().unwrap().get(&key).cloned()
    }

    pub fn bytes_served(&self) -> u64 {
        self.state.bytes.load(Ordering::SeqCst)
    }

    pub fn requests(&self) -> usize {
        self.state.requests.load(Ordering::SeqCst)
    }

    /// Serves every file of a shipped exemplar under `/<id>/<file>`.
    pub fn serve_exemplar(&self, id: &str) {
        let dir = builtin_dir().join("remotes").join(id);
        for entry in fs::read_dir(&dir).unwrap() {
            let entry = entry.unwrap();
            let name = entry.file_name().into_string().unwrap();
            self.set(&format!("{id}/{name}"), fs::read(entry.path()).unwrap());
        }
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.state.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(("127.0.0.1", self.port));
        if let Some(handle) = self.accept.take() {
            let _ = handle.join();
        }
    }
}

fn handle(stream: TcpStream, state: &ServerState) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" || line == "\n" {
            break;
        }
    }
    state.requests.fetch_add(1, Ordering::SeqCst);
    let mut parts = request_line.split_whitespace();
    let method = parts.next().unwrap_or("");
    let path = parts.next().unwrap_or("");
    let body = state.routes.lock().unwrap().get(path).cloned();
    let mut stream = stream;
    match (method, body) {
        ("GET", Some(body)) => {
            write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Length: {}\r\nContent-Type: application/octet-stream\r\nConnection: close\r\n\r\n",
                body.len()
            )?;
            stream.write_all(&body)?;
            state.bytes.fetch_add(body.len() as u64, Ordering::SeqCst);
        }
        _ => {
            stream.write_all(b"HTTP/1.1 404 Not Found\r\nContent-Length: 0\r\nConnection: close\r\n\r\n")?;
        }
    }
    stream.flush()
}

/// File source that records every path it reads.
#[derive(Default)]
pub struct TracingFiles {
    reads: Mutex<Vec<PathBuf>>,
}

impl TracingFiles {
    pub fn reads(&self) -> Vec<PathBuf> {
        self.reads.lock().unwrap().clone()
    }

    pub fn count(&self, path: &Path) -> usize {
        self.reads.lock().unwrap().iter().filter(|p| *p == path).count()
    }
}

impl FileSource for TracingFiles {
    fn read(&self, path: &Path) -> std::io::Result<Vec<u8>> {
        self.reads.lock().unwrap().push(path.to_path_buf());
        LocalFiles.read(path)
    }
}

pub fn exemplar(id: &str) -> DatasetManifest {
    Registry::from_dirs(&[builtin_dir()]).unwrap().get(id).unwrap().clone()
}

/// The exemplar manifest with its remotes pointed at `server`.
pub fn served_exemplar(id: &str, server: &FixtureServer) -> DatasetManifest {
    let mut manifest = exemplar(id);
    for remote in manifest.remotes.values_mut() {
        remote.url = remote.url.replace(EXEMPLAR_BASE_URL, &server.base_url());
    }
    manifest
}

/// Writes `manifest` and its index into `<user_root>/manifests`, where the
/// CLI registry picks it up ahead of the built-ins.
pub fn install_user_manifest(user_root: &Path, manifest: &DatasetManifest) {
    let dir = user_root.join("manifests");
    let index_src = manifest.base_dir.as_ref().map(|b| b.join(&manifest.index_ref));
    let index_dst = dir.join(&manifest.index_ref);
    fs::create_dir_all(index_dst.parent().unwrap()).unwrap();
    if let Some(src) = index_src {
        fs::copy(src, &index_dst).unwrap();
    }
    let mut manifest = manifest.clone();
    manifest.base_dir = None;
    fs::write(dir.join(format!("{}.json", manifest.id)), serialize_manifest(&manifest)).unwrap();
}

/// Unpacks the shipped exemplar archives straight into `data_home`.
pub fn install_exemplar_offline(id: &str, data_home: &Path) {
    let manifest = exemplar(id);
    for remote in manifest.remotes.values() {
        let src = builtin_dir().join("remotes").join(id).join(remote.file_name());
        let dest = remote.destination_dir(data_home);
        fs::create_dir_all(&dest).unwrap();
        match remote.unpack.archive_kind() {
            Some(kind) => {
                extract_archive(&src, kind, &dest).unwrap();
            }
            None => {
                fs::copy(&src, dest.join(remote.file_name())).unwrap();
            }
        }
    }
}

pub fn tiny_wav(seed: usize) -> Vec<u8> {
    let samples = (0..400).map(|i| (((i * (seed + 3)) % 200) as f32 - 100.0) / 128.0).collect();
    encode_wav_pcm16(&AudioBuffer::new(8000, vec![samples]).unwrap())
}

/// Four clips, each with `audio` and `events`, the first three also with
/// `tags`. Returns the number of files written.
pub fn write_fixture_tree(root: &Path) -> usize {
    let mut count = 0;
    let mut put = |rel: String, bytes: Vec<u8>| {
        let path = root.join(rel);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, bytes).unwrap();
        count += 1;
    };
    for i in 0..4 {
        let clip = format!("clip-{:04}", i + 1);
        put(format!("audio/{clip}.wav"), tiny_wav(i));
        put(
            format!("events/{clip}.txt"),
            format!("0.{i}00000\t0.{}00000\tlabel_{i}\n", i + 5).into_bytes(),
        );
        if i < 3 {
            put(format!("tags/{clip}.txt"), format!("label_{i}\nurban,0.5\n").into_bytes());
        }
    }
    count
}

pub fn soundkit(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_soundkit"));
    cmd.args(args).env_remove("SOUNDKIT_DATA_HOME");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

/// Digest computed by the coreutils tool for `algorithm`.
pub fn reference_digest(algorithm: ChecksumAlgorithm, bytes: &[u8]) -> String {
    let tool = match algorithm {
        ChecksumAlgorithm::Md5 => "md5sum",
        ChecksumAlgorithm::Sha256 => "sha256sum",
    };
    let mut child = Command::new(tool)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdin = child.stdin.take().unwrap();
    let owned = bytes.to_vec();
    let writer = std::thread::spawn(move || stdin.write_all(&owned));
    let out = child.wait_with_output().unwrap();
    writer.join().unwrap().unwrap();
    String::from_utf8(out.stdout).unwrap().split_whitespace().next().unwrap().to_owned()
}

pub fn scan_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let entry = entry.unwrap();
            let path = entry.path();
            let kind = entry.file_type().unwrap();
            let rel = path.strip_prefix(root).unwrap().to_path_buf();
            if kind.is_dir() {
                out.insert(rel, b"<dir>".to_vec());
                stack.push(path);
            } else if kind.is_symlink() {
                out.insert(rel, b"<link>".to_vec());
            } else {
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

pub fn zip_with(entries: &[(&str, &[u8])], symlinks: &[(&str, &str)]) -> Vec<u8> {
    let mut zip = zip::ZipWriter::new(Cursor::new(Vec::new()));
    let options = zip::write::SimpleFileOptions::default().compression_method(zip::CompressionMethod::Stored);
    for (name, bytes) in entries {
        zip.start_file(*name, options).unwrap();
        zip.write_all(bytes).unwrap();
    }
    for (name, target) in symlinks {
        zip.add_symlink(*name, *target, options).unwrap();
    }
    zip.finish().unwrap().into_inner()
}

pub enum Member<'a> {
    File(&'a str, &'a [u8]),
    Symlink(&'a str, &'a str),
    HardLink(&'a str, &'a str),
}

/// Writes raw ustar headers so hostile names survive the tar crate's own
/// path checks.
pub fn tar_gz_with(members: &[Member<'_>]) -> Vec<u8> {
    let gz = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::fast());
    let mut builder = tar::Builder::new(gz);
    for member in members {
        let mut header = tar::Header::new_old();
        let (name, data, kind, link): (&str, &[u8], _, Option<&str>) = match member {
            Member::File(n, d) => (n, d, tar::EntryType::Regular, None),
            Member::Symlink(n, t) => (n, b"", tar::EntryType::Symlink, Some(t)),
            Member::HardLink(n, t) => (n, b"", tar::EntryType::Link, Some(t)),
        };
        let raw = header.as_old_mut();
        raw.name[..name.len()].copy_from_slice(name.as_bytes());
        if let Some(link) = link {
            raw.linkname[..link.len()].copy_from_slice(link.as_bytes());
        }
        header.set_entry_type(kind);
        header.set_size(data.len() as u64);
        header.set_mode(0o644);
        header.set_cksum();
        builder.append(&header, data).unwrap();
    }
    builder.into_inner().unwrap().finish().unwrap()
}
