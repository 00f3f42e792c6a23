//! The `soundkit` command line.
//!
//! Exit codes: 0 on success (and a clean validation), 1 when validation finds
//! problems, 2 for usage errors, unknown datasets and operational failures.
//! Human-readable output goes to stdout, progress and diagnostics to stderr.
//! With `--json`, stdout holds exactly one canonical document.

use std::collections::{BTreeSet, HashMap};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::canonical;
use crate::error::{Error, Result};
use crate::fetch::{download_dataset, DownloadOptions, FetchSummary};
use crate::index::{build_index, serialize_index, ChecksumAlgorithm, FieldRule};
use crate::registry::{open_dataset, DatasetManifest, Registry};
use crate::validate::{report_to_document, validate, ValidationMode, ValidationReport};

pub const DATA_HOME_VAR: &str = "SOUNDKIT_DATA_HOME";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "soundkit", version, about = "Download, validate and load audio datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Download and unpack a dataset's remotes
    Download {
        id: String,
        #[arg(long, value_name = "PATH")]
        data_home: Option<PathBuf>,
        /// Only fetch these remotes
        #[arg(long, value_name = "NAME[,NAME...]", value_delimiter = ',')]
        partial: Option<Vec<String>>,
        /// Download even when files are already present
        #[arg(long)]
        force: bool,
        /// Keep archives after unpacking
        #[arg(long)]
        no_cleanup: bool,
    },
    /// Check a local copy against the dataset index
    Validate {
        id: String,
        #[arg(long, value_name = "PATH")]
        data_home: Option<PathBuf>,
        /// Check existence only, skip checksums
        #[arg(long)]
        fast: bool,
        #[arg(long)]
        json: bool,
    },
    /// Describe a dataset
    Info { id: String },
    /// Print a dataset's citation
    Cite { id: String },
    /// Print a dataset's license
    License { id: String },
    /// Index tools
    Index {
        #[command(subcommand)]
        command: IndexCommand,
    },
    /// Registry tools
    Registry {
        #[command(subcommand)]
        command: RegistryCommand,
    },
}

#[derive(Debug, Subcommand)]
enum IndexCommand {
    /// Build a canonical index from a directory tree
    Build {
        root: PathBuf,
        #[arg(long, value_name = "PATH")]
        output: PathBuf,
        #[arg(long, default_value = "sha256", value_parser = ["md5", "sha256"])]
        algo: String,
    },
}

#[derive(Debug, Subcommand)]
enum RegistryCommand {
    /// List known datasets
    List {
        #[arg(long)]
        json: bool,
    },
}

/// Process environment seen by the CLI.
#[derive(Debug, Clone, Default)]
pub struct Environment {
    pub vars: HashMap<String, String>,
    pub current_dir: Option<PathBuf>,
}

impl Environment {
    pub fn from_process() -> Self {
        Environment {
            vars: std::env::vars().collect(),
            current_dir: std::env::current_dir().ok(),
        }
    }

    fn var(&self, key: &str) -> Option<&str> {
        self.vars.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    fn absolute(&self, path: &Path) -> PathBuf {
        match &self.current_dir {
            Some(cwd) if path.is_relative() => cwd.join(path),
            _ => path.to_path_buf(),
        }
    }

    /// Root holding per-dataset data homes and the user manifest directory.
    pub fn user_root(&self) -> Result<PathBuf> {
        if let Some(root) = self.var(DATA_HOME_VAR) {
            return Ok(self.absolute(Path::new(root)));
        }
        match self.var("HOME") {
            Some(home) => Ok(Path::new(home).join("sound_datasets")),
            None => Err(Error::Usage(
                "cannot locate a data home: set --data-home, SOUNDKIT_DATA_HOME or HOME".into(),
            )),
        }
    }

    /// `--data-home`, else `$SOUNDKIT_DATA_HOME/<id>`, else
    /// `~/sound_datasets/<id>`.
    pub fn data_home(&self, flag: Option<&Path>, id: &str) -> Result<PathBuf> {
        match flag {
            Some(path) => Ok(self.absolute(path)),
            None => Ok(self.user_root()?.join(id)),
        }
    }

    pub fn registry(&self) -> Result<Registry> {
        Registry::with_user_root(&self.user_root()?)
    }
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

/// Runs one invocation; `args` excludes the program name.
pub fn run<I, T>(args: I, env: &Environment, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv = std::iter::once(OsString::from("soundkit")).chain(args.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_FAILURE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let mut io = Io { out, err };
    match dispatch(cli.command, env, &mut io) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(io.err, "error: {e}");
            EXIT_FAILURE
        }
    }
}

fn write_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn dispatch(command: Command, env: &Environment, io: &mut Io<'_>) -> Result<i32> {
    match command {
        Command::Download {
            id,
            data_home,
            partial,
            force,
            no_cleanup,
        } => {
            let registry = env.registry()?;
            let manifest = registry.get(&id)?;
            let data_home = env.data_home(data_home.as_deref(), &id)?;
            let options = DownloadOptions {
                partial: partial.map(|p| p.into_iter().collect::<BTreeSet<_>>()),
                force,
                cleanup: !no_cleanup,
            };
            download(manifest, &data_home, &options, io)
        }
        Command::Validate {
            id,
            data_home,
            fast,
            json,
        } => {
            let registry = env.registry()?;
            let manifest = registry.get(&id)?;
            let data_home = env.data_home(data_home.as_deref(), &id)?;
            let dataset = open_dataset(manifest, &data_home)?;
            let mode = if fast { ValidationMode::Fast } else { ValidationMode::Full };
            writeln!(io.err, "validating {id} in {} ({mode} mode)", data_home.display()).map_err(write_err)?;
            let report = validate(dataset.index(), &data_home, mode);
            if json {
                io.out.write_all(&report_to_document(&report)).map_err(write_err)?;
            } else {
                print_report(&id, &report, io.out).map_err(write_err)?;
            }
            Ok(if report.is_clean() { EXIT_OK } else { EXIT_INVALID })
        }
        Command::Info { id } => {
            let registry = env.registry()?;
            let manifest = registry.get(&id)?;
            let data_home = env.data_home(None, &id)?;
            print_info(manifest, &data_home, io.out)?;
            Ok(EXIT_OK)
        }
        Command::Cite { id } => {
            let manifest = env.registry()?.get(&id)?.clone();
            writeln!(io.out, "{}", manifest.citation).map_err(write_err)?;
            Ok(EXIT_OK)
        }
        Command::License { id } => {
            let manifest = env.registry()?.get(&id)?.clone();
            writeln!(io.out, "{}", manifest.license).map_err(write_err)?;
            Ok(EXIT_OK)
        }
        Command::Index {
            command: IndexCommand::Build { root, output, algo },
        } => {
            let algorithm: ChecksumAlgorithm = algo.parse().map_err(Error::Usage)?;
            let root = env.absolute(&root);
            let output = env.absolute(&output);
            let index = build_index(&root, algorithm, &FieldRule::default())?;
            std::fs::write(&output, serialize_index(&index)).map_err(|e| Error::io(&output, e))?;
            writeln!(
                io.out,
                "wrote {} ({} clips, {} files, {algorithm})",
                output.display(),
                index.clips().len(),
                index.file_count()
            )
            .map_err(write_err)?;
            Ok(EXIT_OK)
        }
        Command::Registry {
            command: RegistryCommand::List { json },
        } => {
            let registry = env.registry()?;
            if json {
                let datasets: Vec<_> = registry
                    .manifests()
                    .map(|m| json!({"id": m.id, "license": m.license, "name": m.name, "version": m.version}))
                    .collect();
                io.out
                    .write_all(&canonical::to_bytes(&json!({"datasets": datasets})))
                    .map_err(write_err)?;
            } else {
                for m in registry.manifests() {
                    writeln!(io.out, "{}\t{}\t{}", m.id, m.version, m.name).map_err(write_err)?;
                }
            }
            Ok(EXIT_OK)
        }
    }
}

fn print_summary(summary: &FetchSummary, out: &mut dyn Write) -> std::io::Result<()> {
    for (name, outcome) in &summary.outcomes {
        writeln!(out, "{name}: {outcome}")?;
    }
    writeln!(
        out,
        "{} bytes transferred, {} files extracted",
        summary.bytes_transferred, summary.extracted_files
    )
}

fn download(
    manifest: &DatasetManifest,
    data_home: &Path,
    options: &DownloadOptions,
    io: &mut Io<'_>,
) -> Result<i32> {
    writeln!(io.err, "{}: license {}", manifest.id, manifest.license).map_err(write_err)?;
    writeln!(io.err, "downloading into {}", data_home.display()).map_err(write_err)?;
    match download_dataset(manifest, data_home, options) {
        Ok(summary) => {
            print_summary(&summary, io.out).map_err(write_err)?;
            Ok(EXIT_OK)
        }
        Err(Error::Remote {
            remote,
            completed,
            source,
        }) => {
            print_summary(&completed, io.out).map_err(write_err)?;
            Err(Error::Remote {
                remote,
                completed,
                source,
            })
        }
        Err(e) => Err(e),
    }
}

fn print_report(id: &str, report: &ValidationReport, out: &mut dyn Write) -> std::io::Result<()> {
    let problems = report.missing.len() + report.invalid.len();
    let status = if report.is_clean() {
        "clean".to_owned()
    } else {
        format!("{problems} problem(s)")
    };
    writeln!(
        out,
        "{id}: {status} ({} files checked, {} mode)",
        report.files_checked, report.mode
    )?;
    for (label, findings) in [("missing", &report.missing), ("invalid", &report.invalid)] {
        for (clip, fields) in &findings.clips {
            for field in fields {
                let note = if report.unreadable.contains(clip.as_str(), field) {
                    " (unreadable)"
                } else {
                    ""
                };
                writeln!(out, "{label}\tclip {clip}\t{field}{note}")?;
            }
        }
        for name in &findings.metadata {
            writeln!(out, "{label}\tmetadata\t{name}")?;
        }
    }
    Ok(())
}

fn print_info(manifest: &DatasetManifest, data_home: &Path, out: &mut dyn Write) -> Result<()> {
    let index_path = manifest.index_path(data_home);
    let index = crate::index::parse_index(
        &std::fs::read(&index_path).map_err(|e| Error::io(&index_path, e))?,
    )?;
    let mut text = String::new();
    text.push_str(&format!("{} ({})\n", manifest.name, manifest.id));
    text.push_str(&format!("version: {}\n", manifest.version));
    text.push_str(&format!("license: {}\n", manifest.license));
    text.push_str(&format!("index: {}\n", index_path.display()));
    text.push_str(&format!(
        "clips: {} ({} files, {})\n",
        index.clips().len(),
        index.file_count(),
        index.checksum_algorithm()
    ));
    text.push_str("fields:\n");
    for (field, binding) in &manifest.field_bindings {
        text.push_str(&format!("  {field}: {}\n", binding.kind()));
    }
    text.push_str("remotes:\n");
    for remote in manifest.remotes.values() {
        text.push_str(&format!(
            "  {}: {} ({}, unpack {})\n",
            remote.name,
            remote.url,
            remote.checksum_algorithm,
            remote.unpack.as_str()
        ));
    }
    text.push_str(&format!("default data home: {}\n", data_home.display()));
    out.write_all(text.as_bytes()).map_err(write_err)
}
