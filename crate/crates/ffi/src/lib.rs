//! C ABI over `soundkit`.
//!
//! Every fallible function returns a [`SoundkitStatus`]; on failure the
//! message is available from [`soundkit_last_error_message`] on the same
//! thread. Handles are opaque and must be released with their `_free`
//! function. Strings returned through `char **` out-parameters are owned by
//! the caller and released with [`soundkit_string_free`]; `const char *`
//! results are borrowed from the handle that produced them.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;
use std::sync::Arc;

use soundkit::cli::Environment;
use soundkit::fetch::{download_dataset, DownloadOptions};
use soundkit::registry::load_manifest_file;
use soundkit::validate::report_to_document;
use soundkit::{Annotation, AudioBuffer, Dataset, Error, EventList, TagList, ValidationMode};

/// Result codes. `SOUNDKIT_STATUS_OK` is zero; everything else is a failure.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SoundkitStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Schema = 4,
    Parse = 5,
    Media = 6,
    InvalidAnnotation = 7,
    UnknownDataset = 8,
    UnknownClip = 9,
    UnknownField = 10,
    AbsentField = 11,
    WrongKind = 12,
    OutOfRange = 13,
    Network = 14,
    ChecksumMismatch = 15,
    Archive = 16,
    PathTraversal = 17,
    UnknownRemote = 18,
    Usage = 19,
    Panic = 20,
    Other = 21,
}

fn status_of(err: &Error) -> SoundkitStatus {
    match err.root() {
        Error::Io { .. } => SoundkitStatus::Io,
        Error::Schema { .. } => SoundkitStatus::Schema,
        Error::Parse { .. } => SoundkitStatus::Parse,
        Error::Media(_) => SoundkitStatus::Media,
        Error::InvalidAnnotation(_) | Error::InvalidClipId { .. } => SoundkitStatus::InvalidAnnotation,
        Error::UnknownDataset(_) => SoundkitStatus::UnknownDataset,
        Error::UnknownClip(_) => SoundkitStatus::UnknownClip,
        Error::UnknownField { .. } => SoundkitStatus::UnknownField,
        Error::AbsentField { .. } => SoundkitStatus::AbsentField,
        Error::Network { .. } => SoundkitStatus::Network,
        Error::ChecksumMismatch { .. } => SoundkitStatus::ChecksumMismatch,
        Error::Archive(_) => SoundkitStatus::Archive,
        Error::PathTraversal(_) => SoundkitStatus::PathTraversal,
        Error::UnknownRemote(_) => SoundkitStatus::UnknownRemote,
        Error::Usage(_) | Error::Rule(_) => SoundkitStatus::Usage,
        _ => SoundkitStatus::Other,
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', "\\0")).expect("nul bytes replaced");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

struct Failure(SoundkitStatus, String);

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure(status_of(&err), err.to_string())
    }
}

type FfiResult<T = ()> = Result<T, Failure>;

fn guard(body: impl FnOnce() -> FfiResult) -> SoundkitStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            SoundkitStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            SoundkitStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(SoundkitStatus::NullArgument, format!("{what} is null"))
}

unsafe fn text<'a>(ptr: *const c_char, what: &str) -> FfiResult<&'a str> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure(SoundkitStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn optional_text<'a>(ptr: *const c_char, what: &str) -> FfiResult<Option<&'a str>> {
    if ptr.is_null() {
        Ok(None)
    } else {
        text(ptr, what).map(Some)
    }
}

unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> FfiResult<&'a T> {
    ptr.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> FfiResult {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn owned_string(value: &str) -> *mut c_char {
    CString::new(value.replace('\0', "\\0")).expect("nul bytes replaced").into_raw()
}

/// Message of the last failure on this thread, or NULL after a success.
/// Valid until the next soundkit call on the same thread.
#[no_mangle]
pub extern "C" fn soundkit_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn soundkit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned through a `char **` out-parameter.
///
/// # Safety
/// `s` must come from this library and not have been freed; NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn soundkit_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// An open dataset.
pub struct SoundkitDataset {
    dataset: Dataset,
    ids: Vec<CString>,
}

impl SoundkitDataset {
    fn new(dataset: Dataset) -> Box<Self> {
        let ids = dataset
            .clip_ids()
            .iter()
            .map(|id| CString::new(id.as_str()).expect("clip ids come from JSON strings without nul"))
            .collect();
        Box::new(SoundkitDataset { dataset, ids })
    }
}

/// Opens a registered dataset by id. `data_home` may be NULL, in which case
/// it resolves like the command line: `$SOUNDKIT_DATA_HOME/<id>`, else
/// `~/sound_datasets/<id>`.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn soundkit_dataset_open(
    id: *const c_char,
    data_home: *const c_char,
    out: *mut *mut SoundkitDataset,
) -> SoundkitStatus {
    guard(|| {
        let id = text(id, "id")?;
        let flag = optional_text(data_home, "data_home")?.map(PathBuf::from);
        if out.is_null() {
            return Err(null("out"));
        }
        let env = Environment::from_process();
        let registry = env.registry()?;
        let manifest = registry.get(id)?;
        let home = env.data_home(flag.as_deref(), id)?;
        let dataset = Dataset::open(manifest, &home)?;
        write_out(out, Box::into_raw(SoundkitDataset::new(dataset)), "out")
    })
}

/// Opens the dataset described by the manifest file at `manifest_path`,
/// with its files under `data_home`.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn soundkit_dataset_open_manifest(
    manifest_path: *const c_char,
    data_home: *const c_char,
    out: *mut *mut SoundkitDataset,
) -> SoundkitStatus {
    guard(|| {
        let manifest_path = text(manifest_path, "manifest_path")?;
        let data_home = text(data_home, "data_home")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let manifest = load_manifest_file(Path::new(manifest_path))?;
        let dataset = Dataset::open(&manifest, Path::new(data_home))?;
        write_out(out, Box::into_raw(SoundkitDataset::new(dataset)), "out")
    })
}

/// # Safety
/// `dataset` must come from an open function and not have been freed; NULL
/// is ignored.
#[no_mangle]
pub unsafe extern "C" fn soundkit_dataset_free(dataset: *mut SoundkitDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// # Safety
/// `dataset` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn soundkit_dataset_clip_count(dataset: *const SoundkitDataset, out: *mut usize) -> SoundkitStatus {
    guard(|| {
        let ds = handle(dataset, "dataset")?;
        write_out(out, ds.ids.len(), "out")
    })
}

/// Clip id at `index` in bytewise-sorted order. The string is borrowed from
/// the dataset handle.
///
/// # Safety
/// `dataset` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn soundkit_dataset_clip_id(
    dataset: *const SoundkitDataset,
    index: usize,
    out: *mut *const c_char,
) -> SoundkitStatus {
    guard(|| {
        let ds = handle(dataset, "dataset")?;
        let id = ds.ids.get(index).ok_or_else(|| {
            Failure(SoundkitStatus::OutOfRange, format!("clip index {index} out of range ({} clips)", ds.ids.len()))
        })?;
        write_out(out, id.as_ptr(), "out")
    })
}

/// Absolute path of a clip field. Fails with `SOUNDKIT_STATUS_ABSENT_FIELD`
/// for a null-pair field.
///
/// # Safety
/// `dataset` must be a live handle; strings NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn soundkit_dataset_clip_path(
    dataset: *const SoundkitDataset,
    clip: *const c_char,
    field: *const c_char,
    out: *mut *mut c_char,
) -> SoundkitStatus {
    guard(|| {
        let ds = handle(dataset, "dataset")?;
        let clip_id = text(clip, "clip")?;
        let field = text(field, "field")?;
        let clip = ds.dataset.clip(clip_id)?;
        let path = match clip.fields().get(field) {
            None => {
                return Err(Error::UnknownField {
                    clip: clip_id.into(),
                    field: field.into(),
                }
                .into())
            }
            Some(None) => {
                return Err(Error::AbsentField {
                    clip: clip_id.into(),
                    field: field.into(),
                }
                .into())
            }
            Some(Some(path)) => path,
        };
        write_out(out, owned_string(&path.to_string_lossy()), "out")
    })
}

/// Validates the local copy. Writes the canonical report document to
/// `out_json` and 1 or 0 to `out_clean`. `fast` non-zero checks existence
/// only.
///
/// # Safety
/// `dataset` must be a live handle; out-parameters writable.
#[no_mangle]
pub unsafe extern "C" fn soundkit_dataset_validate(
    dataset: *const SoundkitDataset,
    fast: c_int,
    out_json: *mut *mut c_char,
    out_clean: *mut c_int,
) -> SoundkitStatus {
    guard(|| {
        let ds = handle(dataset, "dataset")?;
        if out_json.is_null() || out_clean.is_null() {
            return Err(null("out"));
        }
        let mode = if fast != 0 { ValidationMode::Fast } else { ValidationMode::Full };
        let report = soundkit::validate(ds.dataset.index(), ds.dataset.data_home(), mode);
        let doc = String::from_utf8(report_to_document(&report)).expect("canonical documents are UTF-8");
        write_out(out_clean, c_int::from(report.is_clean()), "out_clean")?;
        write_out(out_json, owned_string(&doc), "out_json")
    })
}

/// Downloads the dataset's remotes into its data home. `partial` is NULL for
/// all remotes or a comma-separated list of remote names. Bytes fetched are
/// written to `out_bytes` when it is not NULL.
///
/// # Safety
/// `dataset` must be a live handle; `partial` NULL or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn soundkit_dataset_download(
    dataset: *const SoundkitDataset,
    partial: *const c_char,
    force: c_int,
    out_bytes: *mut u64,
) -> SoundkitStatus {
    guard(|| {
        let ds = handle(dataset, "dataset")?;
        let partial = optional_text(partial, "partial")?
            .map(|p| p.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_owned).collect::<BTreeSet<_>>());
        let options = DownloadOptions {
            partial,
            force: force != 0,
            ..DownloadOptions::default()
        };
        let summary = download_dataset(ds.dataset.manifest(), ds.dataset.data_home(), &options)?;
        if !out_bytes.is_null() {
            out_bytes.write(summary.bytes_transferred);
        }
        Ok(())
    })
}

/// Citation text.
///
/// # Safety
/// `dataset` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn soundkit_dataset_cite(dataset: *const SoundkitDataset, out: *mut *mut c_char) -> SoundkitStatus {
    guard(|| {
        let ds = handle(dataset, "dataset")?;
        write_out(out, owned_string(ds.dataset.cite()), "out")
    })
}

/// # Safety
/// `dataset` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn soundkit_dataset_license(dataset: *const SoundkitDataset, out: *mut *mut c_char) -> SoundkitStatus {
    guard(|| {
        let ds = handle(dataset, "dataset")?;
        write_out(out, owned_string(ds.dataset.license()), "out")
    })
}

unsafe fn annotation(dataset: *const SoundkitDataset, clip: *const c_char, field: *const c_char) -> FfiResult<Arc<Annotation>> {
    let ds = handle(dataset, "dataset")?;
    let clip = text(clip, "clip")?;
    let field = text(field, "field")?;
    Ok(ds.dataset.annotation(clip, field)?)
}

fn wrong_kind(field: &str, wanted: &str) -> Failure {
    Failure(SoundkitStatus::WrongKind, format!("field {field:?} is not bound as {wanted}"))
}

/// Timed events of one clip field.
pub struct SoundkitEvents {
    events: EventList,
    labels: Vec<CString>,
}

/// Parses a field bound as `events`.
///
/// # Safety
/// `dataset` must be a live handle; strings NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn soundkit_dataset_events(
    dataset: *const SoundkitDataset,
    clip: *const c_char,
    field: *const c_char,
    out: *mut *mut SoundkitEvents,
) -> SoundkitStatus {
    guard(|| {
        let value = annotation(dataset, clip, field)?;
        let events = value.as_events().ok_or_else(|| wrong_kind(&CStr::from_ptr(field).to_string_lossy(), "events"))?;
        let labels = events.iter().map(|e| CString::new(e.label().replace('\0', "\\0")).expect("nul replaced")).collect();
        let boxed = Box::new(SoundkitEvents {
            events: events.clone(),
            labels,
        });
        write_out(out, Box::into_raw(boxed), "out")
    })
}

/// Number of events; 0 for NULL.
///
/// # Safety
/// `events` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn soundkit_events_len(events: *const SoundkitEvents) -> usize {
    events.as_ref().map_or(0, |e| e.events.len())
}

/// Event at `index`. `label` is borrowed from the handle. `confidence` is
/// set only when `has_confidence` comes back 1. Any out-pointer may be NULL.
///
/// # Safety
/// `events` must be a live handle; non-NULL out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn soundkit_events_get(
    events: *const SoundkitEvents,
    index: usize,
    onset: *mut f64,
    offset: *mut f64,
    label: *mut *const c_char,
    confidence: *mut f64,
    has_confidence: *mut c_int,
) -> SoundkitStatus {
    guard(|| {
        let ev = handle(events, "events")?;
        let event = ev.events.events().get(index).ok_or_else(|| {
            Failure(SoundkitStatus::OutOfRange, format!("event index {index} out of range ({} events)", ev.events.len()))
        })?;
        if !onset.is_null() {
            onset.write(event.onset());
        }
        if !offset.is_null() {
            offset.write(event.offset());
        }
        if !label.is_null() {
            label.write(ev.labels[index].as_ptr());
        }
        if !has_confidence.is_null() {
            has_confidence.write(c_int::from(event.confidence().is_some()));
        }
        if let (Some(c), false) = (event.confidence(), confidence.is_null()) {
            confidence.write(c);
        }
        Ok(())
    })
}

/// # Safety
/// `events` must come from `soundkit_dataset_events`; NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn soundkit_events_free(events: *mut SoundkitEvents) {
    if !events.is_null() {
        drop(Box::from_raw(events));
    }
}

/// Clip-level tags of one clip field.
pub struct SoundkitTags {
    tags: TagList,
    labels: Vec<CString>,
}

/// Parses a field bound as `tags`.
///
/// # Safety
/// `dataset` must be a live handle; strings NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn soundkit_dataset_tags(
    dataset: *const SoundkitDataset,
    clip: *const c_char,
    field: *const c_char,
    out: *mut *mut SoundkitTags,
) -> SoundkitStatus {
    guard(|| {
        let value = annotation(dataset, clip, field)?;
        let tags = value.as_tags().ok_or_else(|| wrong_kind(&CStr::from_ptr(field).to_string_lossy(), "tags"))?;
        let labels = tags.iter().map(|t| CString::new(t.label().replace('\0', "\\0")).expect("nul replaced")).collect();
        let boxed = Box::new(SoundkitTags {
            tags: tags.clone(),
            labels,
        });
        write_out(out, Box::into_raw(boxed), "out")
    })
}

/// Number of tags; 0 for NULL.
///
/// # Safety
/// `tags` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn soundkit_tags_len(tags: *const SoundkitTags) -> usize {
    tags.as_ref().map_or(0, |t| t.tags.len())
}

/// Tag at `index`; see `soundkit_events_get` for the out-parameter rules.
///
/// # Safety
/// `tags` must be a live handle; non-NULL out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn soundkit_tags_get(
    tags: *const SoundkitTags,
    index: usize,
    label: *mut *const c_char,
    confidence: *mut f64,
    has_confidence: *mut c_int,
) -> SoundkitStatus {
    guard(|| {
        let t = handle(tags, "tags")?;
        let tag = t.tags.tags().get(index).ok_or_else(|| {
            Failure(SoundkitStatus::OutOfRange, format!("tag index {index} out of range ({} tags)", t.tags.len()))
        })?;
        if !label.is_null() {
            label.write(t.labels[index].as_ptr());
        }
        if !has_confidence.is_null() {
            has_confidence.write(c_int::from(tag.confidence().is_some()));
        }
        if let (Some(c), false) = (tag.confidence(), confidence.is_null()) {
            confidence.write(c);
        }
        Ok(())
    })
}

/// # Safety
/// `tags` must come from `soundkit_dataset_tags`; NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn soundkit_tags_free(tags: *mut SoundkitTags) {
    if !tags.is_null() {
        drop(Box::from_raw(tags));
    }
}

/// Decoded audio of one clip field.
pub struct SoundkitAudio {
    audio: Arc<Annotation>,
}

impl SoundkitAudio {
    fn buffer(&self) -> &AudioBuffer {
        self.audio.as_audio().expect("checked at construction")
    }
}

/// Decodes a field bound as `audio_wav`.
///
/// # Safety
/// `dataset` must be a live handle; strings NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn soundkit_dataset_audio(
    dataset: *const SoundkitDataset,
    clip: *const c_char,
    field: *const c_char,
    out: *mut *mut SoundkitAudio,
) -> SoundkitStatus {
    guard(|| {
        let value = annotation(dataset, clip, field)?;
        if value.as_audio().is_none() {
            return Err(wrong_kind(&CStr::from_ptr(field).to_string_lossy(), "audio_wav"));
        }
        write_out(out, Box::into_raw(Box::new(SoundkitAudio { audio: value })), "out")
    })
}

/// Sample rate in Hz, channel count and frames per channel. Any out-pointer
/// may be NULL.
///
/// # Safety
/// `audio` must be a live handle; non-NULL out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn soundkit_audio_info(
    audio: *const SoundkitAudio,
    sample_rate: *mut u32,
    channels: *mut usize,
    frames: *mut usize,
) -> SoundkitStatus {
    guard(|| {
        let buffer = handle(audio, "audio")?.buffer();
        if !sample_rate.is_null() {
            sample_rate.write(buffer.sample_rate());
        }
        if !channels.is_null() {
            channels.write(buffer.num_channels());
        }
        if !frames.is_null() {
            frames.write(buffer.num_frames());
        }
        Ok(())
    })
}

/// Samples of one channel in [-1, 1], borrowed from the handle; the slice
/// has as many elements as `frames` from `soundkit_audio_info`.
///
/// # Safety
/// `audio` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn soundkit_audio_channel(
    audio: *const SoundkitAudio,
    channel: usize,
    out: *mut *const f32,
) -> SoundkitStatus {
    guard(|| {
        let buffer = handle(audio, "audio")?.buffer();
        let samples = buffer.channel(channel).ok_or_else(|| {
            Failure(
                SoundkitStatus::OutOfRange,
                format!("channel {channel} out of range ({} channels)", buffer.num_channels()),
            )
        })?;
        write_out(out, samples.as_ptr(), "out")
    })
}

/// # Safety
/// `audio` must come from `soundkit_dataset_audio`; NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn soundkit_audio_free(audio: *mut SoundkitAudio) {
    if !audio.is_null() {
        drop(Box::from_raw(audio));
    }
}
