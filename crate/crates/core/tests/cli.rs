mod common;

use std::fs;
use std::path::Path;

use common::{install_exemplar_offline, install_user_manifest, served_exemplar, soundkit, write_fixture_tree, FixtureServer};
use soundkit::canonical;
use soundkit::validate::parse_report;

fn stdout(out: &std::process::Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &std::process::Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

/// One canonical document and nothing else.
fn assert_single_document(bytes: &[u8]) -> serde_json::Value {
    let value = canonical::parse(bytes).unwrap();
    assert_eq!(canonical::to_bytes(&value), bytes);
    value
}

#[test]
fn validate_json_on_clean_exemplar() {
    let root = tempfile::tempdir().unwrap();
    install_exemplar_offline("exemplar-mini", &root.path().join("exemplar-mini"));
    let env = [("SOUNDKIT_DATA_HOME", root.path())];
    let out = soundkit(&["validate", "exemplar-mini", "--json"], &env);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc = assert_single_document(&out.stdout);
    assert_eq!(doc["clean"], true);
    assert_eq!(doc["files_checked"], 11);
    assert_eq!(doc["mode"], "full");
}

#[test]
fn validate_flags_corruption_with_exit_one() {
    let home = tempfile::tempdir().unwrap();
    install_exemplar_offline("exemplar-mini", home.path());
    let tags = home.path().join("tags/clip-0002.txt");
    let mut bytes = fs::read(&tags).unwrap();
    bytes[0] ^= 0x20;
    fs::write(&tags, bytes).unwrap();
    let data_home = home.path().to_str().unwrap();

    let out = soundkit(&["validate", "exemplar-mini", "--data-home", data_home], &[]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("clip-0002") && text.contains("tags"), "{text}");

    let out = soundkit(&["validate", "exemplar-mini", "--data-home", data_home, "--json"], &[]);
    assert_eq!(out.status.code(), Some(1));
    let report = parse_report(&out.stdout).unwrap();
    assert!(report.invalid.contains("clip-0002", "tags"));
    assert_eq!(report.invalid.len(), 1);
    assert!(report.missing.is_empty());

    let out = soundkit(&["validate", "exemplar-mini", "--data-home", data_home, "--fast", "--json"], &[]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(assert_single_document(&out.stdout)["mode"], "fast");
}

#[test]
fn validate_reports_missing_files() {
    let home = tempfile::tempdir().unwrap();
    install_exemplar_offline("exemplar-mini", home.path());
    fs::remove_file(home.path().join("audio/clip-0003.wav")).unwrap();
    let out = soundkit(
        &["validate", "exemplar-mini", "--data-home", home.path().to_str().unwrap(), "--fast", "--json"],
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
    let report = parse_report(&out.stdout).unwrap();
    assert!(report.missing.contains("clip-0003", "audio"));
}

#[test]
fn unknown_dataset_exits_two() {
    let root = tempfile::tempdir().unwrap();
    let env = [("SOUNDKIT_DATA_HOME", root.path())];
    for cmd in ["download", "validate", "info", "cite", "license"] {
        let out = soundkit(&[cmd, "nonexistent-id"], &env);
        assert_eq!(out.status.code(), Some(2), "{cmd}");
        assert!(stderr(&out).contains("nonexistent-id"), "{cmd}: {}", stderr(&out));
        assert!(out.stdout.is_empty(), "{cmd}");
    }
    assert!(fs::read_dir(root.path()).unwrap().next().is_none());
}

#[test]
fn usage_errors_exit_two() {
    for args in [&["download"][..], &["validate"], &["frobnicate"], &["index", "build", "x"], &[]] {
        let out = soundkit(args, &[]);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty());
    }
    assert_eq!(soundkit(&["--help"], &[]).status.code(), Some(0));
}

#[test]
fn download_then_validate_through_the_cli() {
    let server = FixtureServer::start();
    server.serve_exemplar("exemplar-mini");
    let root = tempfile::tempdir().unwrap();
    install_user_manifest(root.path(), &served_exemplar("exemplar-mini", &server));
    let env = [("SOUNDKIT_DATA_HOME", root.path())];

    let out = soundkit(&["download", "exemplar-mini"], &env);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stderr(&out).contains("CC-BY-4.0"));
    assert!(stdout(&out).contains("audio: downloaded"));

    let out = soundkit(&["validate", "exemplar-mini", "--json"], &env);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(assert_single_document(&out.stdout)["clean"], true);

    let served = server.bytes_served();
    let out = soundkit(&["download", "exemplar-mini"], &env);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("0 bytes transferred"));
    assert_eq!(server.bytes_served(), served);
}

#[test]
fn download_partial_and_failures() {
    let server = FixtureServer::start();
    server.serve_exemplar("exemplar-mini");
    server.set("exemplar-mini/annotations.zip", b"tampered".to_vec());
    let root = tempfile::tempdir().unwrap();
    install_user_manifest(root.path(), &served_exemplar("exemplar-mini", &server));
    let env = [("SOUNDKIT_DATA_HOME", root.path())];

    let out = soundkit(&["download", "exemplar-mini", "--partial", "audio", "--no-cleanup"], &env);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(root.path().join("exemplar-mini/audio.zip").exists());
    assert!(stdout(&out).contains("annotations: skipped"));

    let out = soundkit(&["download", "exemplar-mini"], &env);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("checksum"), "{}", stderr(&out));
    assert!(!root.path().join("exemplar-mini/events").exists());

    let out = soundkit(&["download", "exemplar-mini", "--partial", "nope"], &env);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nope"));
}

#[test]
fn index_build_writes_a_canonical_index() {
    let work = tempfile::tempdir().unwrap();
    let tree = work.path().join("tree");
    let files = write_fixture_tree(&tree);
    let output = work.path().join("index.json");
    let out = soundkit(
        &["index", "build", tree.to_str().unwrap(), "--output", output.to_str().unwrap(), "--algo", "md5"],
        &[],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let bytes = fs::read(&output).unwrap();
    let index = soundkit::index::parse_index(&bytes).unwrap();
    assert_eq!(index.file_count(), files);
    assert_eq!(index.checksum_algorithm(), soundkit::ChecksumAlgorithm::Md5);
    assert_single_document(&bytes);

    let default = work.path().join("default.json");
    let out = soundkit(&["index", "build", tree.to_str().unwrap(), "--output", default.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(0));
    let index = soundkit::index::parse_index(&fs::read(&default).unwrap()).unwrap();
    assert_eq!(index.checksum_algorithm(), soundkit::ChecksumAlgorithm::Sha256);

    let out = soundkit(&["index", "build", "/no/such/dir", "--output", default.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
    let out = soundkit(&["index", "build", ".", "--output", "x", "--algo", "crc32"], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn registry_list_json_is_one_document() {
    let root = tempfile::tempdir().unwrap();
    let out = soundkit(&["registry", "list", "--json"], &[("SOUNDKIT_DATA_HOME", root.path())]);
    assert_eq!(out.status.code(), Some(0));
    let doc = assert_single_document(&out.stdout);
    let ids: Vec<&str> = doc["datasets"].as_array().unwrap().iter().map(|d| d["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["exemplar-birds", "exemplar-mini"]);

    let out = soundkit(&["registry", "list"], &[("SOUNDKIT_DATA_HOME", root.path())]);
    assert!(stdout(&out).lines().any(|l| l.starts_with("exemplar-mini\t1.0\t")));
}

#[test]
fn info_cite_license_work_without_local_data() {
    let root = tempfile::tempdir().unwrap();
    let env = [("SOUNDKIT_DATA_HOME", root.path())];
    let out = soundkit(&["cite", "exemplar-mini"], &env);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "@inproceedings{exemplar2022, title={Exemplar Mini}, year={2022}}\n");
    let out = soundkit(&["license", "exemplar-birds"], &env);
    assert_eq!(stdout(&out), "CC0-1.0\n");
    let out = soundkit(&["info", "exemplar-mini"], &env);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("Exemplar Mini Sound Dataset") && text.contains("annotations"), "{text}");
    assert!(fs::read_dir(root.path()).unwrap().next().is_none());
}

#[test]
fn data_home_flag_beats_environment() {
    let root = tempfile::tempdir().unwrap();
    let other = tempfile::tempdir().unwrap();
    install_exemplar_offline("exemplar-mini", other.path());
    let env: [(&str, &Path); 1] = [("SOUNDKIT_DATA_HOME", root.path())];
    let out = soundkit(&["validate", "exemplar-mini", "--json"], &env);
    assert_eq!(out.status.code(), Some(1));
    let out = soundkit(
        &["validate", "exemplar-mini", "--json", "--data-home", other.path().to_str().unwrap()],
        &env,
    );
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn home_fallback_is_sound_datasets() {
    let home = tempfile::tempdir().unwrap();
    install_exemplar_offline("exemplar-mini", &home.path().join("sound_datasets/exemplar-mini"));
    let out = soundkit(&["validate", "exemplar-mini"], &[("HOME", home.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}
