//! Archive extraction that never writes outside the destination.
//!
//! Every member is checked before anything is written: absolute names,
//! `..` segments, symlinks and hard links reject the whole archive. Files are
//! then unpacked into a staging directory inside `dest` and moved into place,
//! so a corrupt archive leaves `dest` as it was.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArchiveKind {
    Zip,
    TarGz,
}

impl ArchiveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ArchiveKind::Zip => "zip",
            ArchiveKind::TarGz => "tar_gz",
        }
    }
}

impl FromStr for ArchiveKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "zip" => Ok(ArchiveKind::Zip),
            "tar_gz" => Ok(ArchiveKind::TarGz),
            other => Err(format!("unknown archive kind {other:?}")),
        }
    }
}

/// Normalizes a member name to a `/`-separated path relative to the
/// destination. `Ok(None)` for names that denote the destination itself.
pub(crate) fn safe_member_path(name: &str) -> Result<Option<String>> {
    let traversal = || Error::PathTraversal(name.to_owned());
    if name.contains('\0') {
        return Err(traversal());
    }
    let name_slashed = name.replace('\\', "/");
    if name_slashed.starts_with('/') {
        return Err(traversal());
    }
    let mut parts = Vec::new();
    for (i, segment) in name_slashed.split('/').enumerate() {
        match segment {
            "" | "." => {}
            ".." => return Err(traversal()),
            // drive letters such as `C:`
            s if i == 0 && s.contains(':') => return Err(traversal()),
            s => parts.push(s),
        }
    }
    Ok((!parts.is_empty()).then(|| parts.join("/")))
}

fn join(root: &Path, rel: &str) -> PathBuf {
    let mut out = root.to_path_buf();
    out.extend(rel.split('/'));
    out
}

fn archive_err(archive: &Path, e: impl std::fmt::Display) -> Error {
    Error::Archive(format!("{}: {e}", archive.display()))
}

#[derive(Debug, Default)]
struct Plan {
    files: BTreeSet<String>,
    dirs: BTreeSet<String>,
}

fn plan_zip(archive: &Path) -> Result<Plan> {
    let file = File::open(archive).map_err(|e| Error::io(archive, e))?;
    let mut zip = zip::ZipArchive::new(file).map_err(|e| archive_err(archive, e))?;
    let mut plan = Plan::default();
    for i in 0..zip.len() {
        let member = zip.by_index_raw(i).map_err(|e| archive_err(archive, e))?;
        let name = member.name().to_owned();
        if member
            .unix_mode()
            .is_some_and(|m| m & 0o170000 == 0o120000)
        {
            return Err(Error::PathTraversal(format!("{name} (symlink member)")));
        }
        let Some(rel) = safe_member_path(&name)? else {
            continue;
        };
        if member.is_dir() {
            plan.dirs.insert(rel);
        } else {
            plan.files.insert(rel);
        }
    }
    Ok(plan)
}

fn extract_zip(archive: &Path, staging: &Path) -> Result<()> {
    let file = File::open(archive).map_err(|e| Error::io(archive, e))?;
    let mut zip = zip::ZipArchive::new(file).map_err(|e| archive_err(archive, e))?;
    for i in 0..zip.len() {
        let mut member = zip.by_index(i).map_err(|e| archive_err(archive, e))?;
        let Some(rel) = safe_member_path(member.name())? else {
            continue;
        };
        if member.is_dir() {
            continue;
        }
        write_member(&mut member, &join(staging, &rel), archive)?;
    }
    Ok(())
}

fn tar_entries(archive: &Path) -> Result<tar::Archive<flate2::read::GzDecoder<File>>> {
    let file = File::open(archive).map_err(|e| Error::io(archive, e))?;
    Ok(tar::Archive::new(flate2::read::GzDecoder::new(file)))
}

fn tar_member_path(entry: &tar::Entry<'_, impl io::Read>, archive: &Path) -> Result<Option<String>> {
    let raw = entry.path_bytes();
    let name = std::str::from_utf8(&raw)
        .map_err(|_| archive_err(archive, "member name is not UTF-8"))?;
    safe_member_path(name)
}

fn plan_tar(archive: &Path) -> Result<Plan> {
    let mut tar = tar_entries(archive)?;
    let mut plan = Plan::default();
    for entry in tar.entries().map_err(|e| archive_err(archive, e))? {
        let entry = entry.map_err(|e| archive_err(archive, e))?;
        let kind = entry.header().entry_type();
        let name = String::from_utf8_lossy(&entry.path_bytes()).into_owned();
        if kind.is_symlink() || kind.is_hard_link() {
            return Err(Error::PathTraversal(format!("{name} (link member)")));
        }
        let rel = tar_member_path(&entry, archive)?;
        match (kind, rel) {
            (k, Some(rel)) if k.is_file() => {
                plan.files.insert(rel);
            }
            (k, Some(rel)) if k.is_dir() => {
                plan.dirs.insert(rel);
            }
            (k, _) if k.is_dir() => {}
            (k, _) if k.is_pax_global_extensions() => {}
            (k, _) => {
                return Err(archive_err(archive, format!("unsupported member type {k:?} for {name}")))
            }
        }
    }
    Ok(plan)
}

fn extract_tar(archive: &Path, staging: &Path) -> Result<()> {
    let mut tar = tar_entries(archive)?;
    for entry in tar.entries().map_err(|e| archive_err(archive, e))? {
        let mut entry = entry.map_err(|e| archive_err(archive, e))?;
        if !entry.header().entry_type().is_file() {
            continue;
        }
        if let Some(rel) = tar_member_path(&entry, archive)? {
            write_member(&mut entry, &join(staging, &rel), archive)?;
        }
    }
    Ok(())
}

fn write_member(reader: &mut impl io::Read, target: &Path, archive: &Path) -> Result<()> {
    if let Some(parent) = target.parent() {
        fs::create_dir_all(parent).map_err(|e| archive_err(archive, e))?;
    }
    let mut out = File::create(target).map_err(|e| archive_err(archive, e))?;
    io::copy(reader, &mut out).map_err(|e| archive_err(archive, e))?;
    Ok(())
}

/// Refuses to write through symlinks that already exist inside `dest`.
fn check_existing(dest: &Path, rel: &str) -> Result<()> {
    let mut path = dest.to_path_buf();
    for segment in rel.split('/') {
        path.push(segment);
        match fs::symlink_metadata(&path) {
            Ok(m) if m.file_type().is_symlink() => {
                return Err(Error::PathTraversal(format!(
                    "{rel} (passes through symlink {})",
                    path.display()
                )))
            }
            Ok(_) => {}
            Err(_) => break,
        }
    }
    Ok(())
}

/// Extracts `archive` into `dest` and returns the extracted file paths,
/// relative to `dest` and sorted bytewise.
pub fn extract_archive(archive: &Path, kind: ArchiveKind, dest: &Path) -> Result<Vec<String>> {
    let plan = match kind {
        ArchiveKind::Zip => plan_zip(archive)?,
        ArchiveKind::TarGz => plan_tar(archive)?,
    };
    for rel in plan.files.iter().chain(&plan.dirs) {
        check_existing(dest, rel)?;
    }

    fs::create_dir_all(dest).map_err(|e| Error::io(dest, e))?;
    let staging = tempfile::Builder::new()
        .prefix(".soundkit-extract-")
        .tempdir_in(dest)
        .map_err(|e| Error::io(dest, e))?;
    match kind {
        ArchiveKind::Zip => extract_zip(archive, staging.path())?,
        ArchiveKind::TarGz => extract_tar(archive, staging.path())?,
    }

    for dir in &plan.dirs {
        let path = join(dest, dir);
        fs::create_dir_all(&path).map_err(|e| Error::io(path, e))?;
    }
    for rel in &plan.files {
        let target = join(dest, rel);
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::rename(join(staging.path(), rel), &target).map_err(|e| Error::io(&target, e))?;
    }
    Ok(plan.files.into_iter().collect())
}
