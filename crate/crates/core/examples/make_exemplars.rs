//! Regenerates the synthetic exemplar datasets under `datasets/`:
//! manifests, canonical indexes and the remote archives they point at.
//!
//! ```text
//! cargo run -p soundkit --example make_exemplars
//! ```
//!
//! Output is deterministic; rerunning on an unchanged tree changes nothing.

use std::collections::BTreeMap;
use std::f32::consts::TAU;
use std::fs;
use std::io::{Cursor, Write};
use std::path::Path;

use soundkit::fetch::{RemoteFile, Unpack};
use soundkit::index::{build_index, serialize_index, ChecksumAlgorithm, FieldRule};
use soundkit::model::AudioBuffer;
use soundkit::parsers::{encode_wav_pcm16, Delimiter, EventFormatSpec};
use soundkit::registry::{serialize_manifest, DatasetManifest, FieldBinding};
use soundkit::{ClipId, IndexEntry};

const BASE_URL: &str = "http://127.0.0.1:8000";

fn sine(rate: u32, secs: f32, freq: f32, gain: f32) -> Vec<f32> {
    let n = (rate as f32 * secs) as usize;
    (0..n)
        .map(|i| gain * (TAU * freq * i as f32 / rate as f32).sin())
        .collect()
}

fn zip_bytes(files: &BTreeMap<String, Vec<u8>>) -> Vec<u8> {
    let mut zip = zip::ZipWriter::new(Cursor::new(Vec::new()));
    let options = zip::write::SimpleFileOptions::default()
        .compression_method(zip::CompressionMethod::Deflated)
        .last_modified_time(zip::DateTime::default())
        .unix_permissions(0o644);
    for (name, bytes) in files {
        zip.start_file(name.as_str(), options).unwrap();
        zip.write_all(bytes).unwrap();
    }
    zip.finish().unwrap().into_inner()
}

fn tar_gz_bytes(files: &BTreeMap<String, Vec<u8>>) -> Vec<u8> {
    let gz = flate2::GzBuilder::new().mtime(0).write(Vec::new(), flate2::Compression::default());
    let mut tar = tar::Builder::new(gz);
    for (name, bytes) in files {
        let mut header = tar::Header::new_ustar();
        header.set_size(bytes.len() as u64);
        header.set_mode(0o644);
        header.set_mtime(0);
        header.set_entry_type(tar::EntryType::Regular);
        tar.append_data(&mut header, name, bytes.as_slice()).unwrap();
    }
    tar.into_inner().unwrap().finish().unwrap()
}

fn write_tree(root: &Path, files: &BTreeMap<String, Vec<u8>>) {
    for (rel, bytes) in files {
        let path = root.join(rel);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, bytes).unwrap();
    }
}

fn subset(files: &BTreeMap<String, Vec<u8>>, prefixes: &[&str]) -> BTreeMap<String, Vec<u8>> {
    files
        .iter()
        .filter(|(k, _)| prefixes.iter().any(|p| k.starts_with(p)))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}

fn remote(id: &str, name: &str, file: &str, bytes: &[u8], algorithm: ChecksumAlgorithm, unpack: Unpack) -> RemoteFile {
    RemoteFile {
        name: name.into(),
        url: format!("{BASE_URL}/{id}/{file}"),
        checksum: algorithm.digest(bytes),
        checksum_algorithm: algorithm,
        destination: ".".into(),
        unpack,
    }
}

struct Output<'a> {
    datasets: &'a Path,
    manifest: DatasetManifest,
    index_bytes: Vec<u8>,
    remotes: Vec<(String, Vec<u8>)>,
}

fn write_output(out: Output<'_>) {
    let id = &out.manifest.id;
    let index_path = out.datasets.join(&out.manifest.index_ref);
    fs::create_dir_all(index_path.parent().unwrap()).unwrap();
    fs::write(&index_path, &out.index_bytes).unwrap();
    fs::write(out.datasets.join(format!("{id}.json")), serialize_manifest(&out.manifest)).unwrap();
    let remote_dir = out.datasets.join("remotes").join(id);
    fs::create_dir_all(&remote_dir).unwrap();
    for (file, bytes) in out.remotes {
        fs::write(remote_dir.join(file), bytes).unwrap();
    }
    println!("wrote {id}");
}

fn exemplar_mini(datasets: &Path) {
    let id = "exemplar-mini";
    let labels = ["dog_bark", "siren", "car_horn", "children_playing"];
    let mut files = BTreeMap::new();
    for (i, label) in labels.iter().enumerate() {
        let clip = format!("clip-{:04}", i + 1);
        let audio = AudioBuffer::new(8000, vec![sine(8000, 0.5, 220.0 * (i + 1) as f32, 0.5)]).unwrap();
        files.insert(format!("audio/{clip}.wav"), encode_wav_pcm16(&audio));
        let events = match i {
            0 => "0.500000\t1.250000\tdog_bark\n1.500000\t2.000000\tdog_bark\n".to_owned(),
            _ => format!("0.{i}00000\t0.{}00000\t{label}\n", i + 2),
        };
        files.insert(format!("events/{clip}.txt"), events.into_bytes());
        if i < 3 {
            files.insert(format!("tags/{clip}.txt"), format!("{label}\noutdoor,0.75\n").into_bytes());
        }
    }

    let stage = tempfile::tempdir().unwrap();
    write_tree(stage.path(), &files);
    let built = build_index(stage.path(), ChecksumAlgorithm::Md5, &FieldRule::default()).unwrap();
    let mut clips = built.clips().clone();
    let first = ClipId::new("clip-0001").unwrap();
    let mut fields = clips[&first].fields().clone();
    fields.insert("spectrogram".into(), None);
    clips.insert(first, IndexEntry::new(fields).unwrap());
    let index = soundkit::DatasetIndex::new(ChecksumAlgorithm::Md5, clips, built.metadata().clone()).unwrap();

    let audio_zip = zip_bytes(&subset(&files, &["audio/"]));
    let annotations_zip = zip_bytes(&subset(&files, &["events/", "tags/"]));
    let remotes = [
        remote(id, "annotations", "annotations.zip", &annotations_zip, ChecksumAlgorithm::Md5, Unpack::Zip),
        remote(id, "audio", "audio.zip", &audio_zip, ChecksumAlgorithm::Md5, Unpack::Zip),
    ];
    let manifest = DatasetManifest {
        id: id.into(),
        name: "Exemplar Mini Sound Dataset".into(),
        version: "1.0".into(),
        license: "CC-BY-4.0".into(),
        citation: "@inproceedings{exemplar2022, title={Exemplar Mini}, year={2022}}".into(),
        index_ref: format!("indexes/{id}_1.0.json"),
        remotes: remotes.into_iter().map(|r| (r.name.clone(), r)).collect(),
        field_bindings: [
            ("audio", FieldBinding::AudioWav),
            ("events", FieldBinding::Events(EventFormatSpec::new(Delimiter::Tab))),
            ("tags", FieldBinding::Tags { delimiter: Delimiter::Comma }),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_owned(), v))
        .collect(),
        base_dir: None,
    };
    write_output(Output {
        datasets,
        manifest,
        index_bytes: serialize_index(&index),
        remotes: vec![("audio.zip".into(), audio_zip), ("annotations.zip".into(), annotations_zip)],
    });
}

fn wav24_stereo(rate: u32, left: &[f32], right: &[f32]) -> Vec<u8> {
    let spec = hound::WavSpec {
        channels: 2,
        sample_rate: rate,
        bits_per_sample: 24,
        sample_format: hound::SampleFormat::Int,
    };
    let mut cursor = Cursor::new(Vec::new());
    let mut writer = hound::WavWriter::new(&mut cursor, spec).unwrap();
    for (l, r) in left.iter().zip(right) {
        writer.write_sample((l * 8_388_607.0).round() as i32).unwrap();
        writer.write_sample((r * 8_388_607.0).round() as i32).unwrap();
    }
    writer.finalize().unwrap();
    cursor.into_inner()
}

fn exemplar_birds(datasets: &Path) {
    let id = "exemplar-birds";
    let species = [("wren", "robin"), ("owl", "nightjar"), ("robin", "wren")];
    let sites = [("north-marsh", "AM-01", "wetland"), ("oak-ridge", "AM-02", "woodland"), ("oak-ridge", "AM-03", "woodland")];
    let mut files = BTreeMap::new();
    let mut info = String::from("clip_id,site,recorder,habitat\n");
    for (i, (a, b)) in species.iter().enumerate() {
        let clip = format!("rec-{:02}", i + 1);
        let left = sine(16_000, 0.25, 1000.0 + 500.0 * i as f32, 0.4);
        let right = sine(16_000, 0.25, 3000.0 + 250.0 * i as f32, 0.2);
        files.insert(format!("recordings/{clip}.wav"), wav24_stereo(16_000, &left, &right));
        files.insert(
            format!("detections/{clip}.csv"),
            format!("onset,offset,label,confidence\n0.010000,0.080000,{a},0.92\n0.100000,0.240000,{b},0.41\n").into_bytes(),
        );
        files.insert(format!("species/{clip}.tsv"), format!("{a}\t0.92\n{b}\t0.41\n").into_bytes());
        let (site, recorder, habitat) = sites[i];
        info.push_str(&format!("{clip},{site},{recorder},{habitat}\n"));
    }
    files.insert("clip_info.csv".into(), info.clone().into_bytes());

    let stage = tempfile::tempdir().unwrap();
    write_tree(stage.path(), &files);
    let index = build_index(stage.path(), ChecksumAlgorithm::Sha256, &FieldRule::default()).unwrap();

    let recordings = tar_gz_bytes(&subset(&files, &["recordings/", "detections/", "species/"]));
    let remotes = [
        remote(id, "clip_info", "clip_info.csv", info.as_bytes(), ChecksumAlgorithm::Sha256, Unpack::None),
        remote(id, "recordings", "recordings.tar.gz", &recordings, ChecksumAlgorithm::Sha256, Unpack::TarGz),
    ];
    let manifest = DatasetManifest {
        id: id.into(),
        name: "Exemplar Bird Detections".into(),
        version: "1.0".into(),
        license: "CC0-1.0".into(),
        citation: "@misc{exemplarbirds2023, title={Exemplar Bird Detections}, year={2023}}".into(),
        index_ref: format!("indexes/{id}_1.0.json"),
        remotes: remotes.into_iter().map(|r| (r.name.clone(), r)).collect(),
        field_bindings: [
            ("clip_info", FieldBinding::MetadataTable),
            (
                "detections",
                FieldBinding::Events(EventFormatSpec {
                    delimiter: Delimiter::Comma,
                    has_confidence: true,
                    header_rows: 1,
                }),
            ),
            ("recordings", FieldBinding::AudioWav),
            ("species", FieldBinding::Tags { delimiter: Delimiter::Tab }),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_owned(), v))
        .collect(),
        base_dir: None,
    };
    write_output(Output {
        datasets,
        manifest,
        index_bytes: serialize_index(&index),
        remotes: vec![("recordings.tar.gz".into(), recordings), ("clip_info.csv".into(), info.into_bytes())],
    });
}

fn main() {
    let datasets = Path::new(env!("CARGO_MANIFEST_DIR")).join("datasets");
    exemplar_mini(&datasets);
    exemplar_birds(&datasets);
}
