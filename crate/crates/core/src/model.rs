//! Standard in-memory types shared by every dataset: clip identifiers, tags,
//! timed events, decoded audio and resolved clips.
//!
//! All constructors validate their invariants, so a value of any of these
//! types obtained through the public API is always well formed. Times are
//! seconds. A missing confidence means the source did not state one; it is
//! never defaulted to 1.0.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Identifier of a clip, unique within one dataset.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClipId(String);

impl ClipId {
    pub fn new(value: impl Into<String>) -> Result<Self> {
        let value = value.into();
        if value.is_empty() {
            return Err(Error::InvalidClipId {
                id: value,
                reason: "empty",
            });
        }
        if value.split('/').any(|segment| segment == "..") {
            return Err(Error::InvalidClipId {
                id: value,
                reason: "contains a `..` segment",
            });
        }
        Ok(ClipId(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ClipId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for ClipId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl std::borrow::Borrow<str> for ClipId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

fn check_confidence(confidence: Option<f64>) -> Result<()> {
    match confidence {
        Some(c) if !(0.0..=1.0).contains(&c) => Err(Error::InvalidAnnotation(format!(
            "confidence {c} outside [0, 1]"
        ))),
        _ => Ok(()),
    }
}

/// A clip-level label.
#[derive(Debug, Clone, PartialEq)]
pub struct Tag {
    label: String,
    confidence: Option<f64>,
}

impl Tag {
    pub fn new(label: impl Into<String>, confidence: Option<f64>) -> Result<Self> {
        let label = label.into();
        if label.is_empty() {
            return Err(Error::InvalidAnnotation("empty tag label".into()));
        }
        check_confidence(confidence)?;
        Ok(Tag { label, confidence })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn confidence(&self) -> Option<f64> {
        self.confidence
    }
}

/// Tags in source-file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TagList(Vec<Tag>);

impl TagList {
    pub fn new(tags: Vec<Tag>) -> Self {
        TagList(tags)
    }

    pub fn tags(&self) -> &[Tag] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Tag> {
        self.0.iter()
    }
}

impl<'a> IntoIterator for &'a TagList {
    type Item = &'a Tag;
    type IntoIter = std::slice::Iter<'a, Tag>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// A labelled time interval. Zero-length events are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    onset: f64,
    offset: f64,
    label: String,
    confidence: Option<f64>,
}

impl Event {
    pub fn new(
        onset: f64,
        offset: f64,
        label: impl Into<String>,
        confidence: Option<f64>,
    ) -> Result<Self> {
        let label = label.into();
        if !onset.is_finite() || !offset.is_finite() {
            return Err(Error::InvalidAnnotation(format!(
                "non-finite event time ({onset}, {offset})"
            )));
        }
        if onset < 0.0 {
            return Err(Error::InvalidAnnotation(format!("negative onset {onset}")));
        }
        if offset < onset {
            return Err(Error::InvalidAnnotation(format!(
                "offset {offset} precedes onset {onset}"
            )));
        }
        if label.is_empty() {
            return Err(Error::InvalidAnnotation("empty event label".into()));
        }
        check_confidence(confidence)?;
        // -0.0 would otherwise render as "-0.000000"
        Ok(Event {
            onset: onset + 0.0,
            offset: offset + 0.0,
            label,
            confidence,
        })
    }

    pub fn onset(&self) -> f64 {
        self.onset
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn duration(&self) -> f64 {
        self.offset - self.onset
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn confidence(&self) -> Option<f64> {
        self.confidence
    }
}

/// Shorthand for [`Event::new`].
pub fn make_event(
    onset: f64,
    offset: f64,
    label: &str,
    confidence: Option<f64>,
) -> Result<Event> {
    Event::new(onset, offset, label, confidence)
}

/// Events in source-file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventList(Vec<Event>);

impl EventList {
    pub fn new(events: Vec<Event>) -> Self {
        EventList(events)
    }

    pub fn events(&self) -> &[Event] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Event> {
        self.0.iter()
    }

    /// Latest offset over all events, 0 for an empty list.
    pub fn duration_bound(&self) -> f64 {
        self.0.iter().map(Event::offset).fold(0.0, f64::max)
    }
}

impl<'a> IntoIterator for &'a EventList {
    type Item = &'a Event;
    type IntoIter = std::slice::Iter<'a, Event>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

pub fn clip_duration_bound(events: &EventList) -> f64 {
    events.duration_bound()
}

/// Decoded audio, one sample vector per channel, samples in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    sample_rate: u32,
    channels: Vec<Vec<f32>>,
}

impl AudioBuffer {
    pub fn new(sample_rate: u32, channels: Vec<Vec<f32>>) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Media("sample rate must be positive".into()));
        }
        let Some(first) = channels.first() else {
            return Err(Error::Media("audio needs at least one channel".into()));
        };
        let frames = first.len();
        if channels.iter().any(|c| c.len() != frames) {
            return Err(Error::Media("channels differ in length".into()));
        }
        if channels
            .iter()
            .flatten()
            .any(|s| !(-1.0..=1.0).contains(s))
        {
            return Err(Error::Media("sample outside [-1, 1]".into()));
        }
        Ok(AudioBuffer {
            sample_rate,
            channels,
        })
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel.
    pub fn num_frames(&self) -> usize {
        self.channels[0].len()
    }

    pub fn channel(&self, index: usize) -> Option<&[f32]> {
        self.channels.get(index).map(Vec::as_slice)
    }

    pub fn channels(&self) -> &[Vec<f32>] {
        &self.channels
    }

    pub fn duration_secs(&self) -> f64 {
        self.num_frames() as f64 / f64::from(self.sample_rate)
    }
}

/// One recording of a dataset with the absolute paths of its assets.
///
/// Building a clip never touches the disk; annotations are parsed on demand
/// through [`crate::Dataset::clip_annotation`].
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    id: ClipId,
    fields: BTreeMap<String, Option<PathBuf>>,
    extras: BTreeMap<String, String>,
}

impl Clip {
    pub fn new(id: ClipId, fields: BTreeMap<String, Option<PathBuf>>) -> Self {
        Clip {
            id,
            fields,
            extras: BTreeMap::new(),
        }
    }

    pub fn with_extras(mut self, extras: BTreeMap<String, String>) -> Self {
        self.extras = extras;
        self
    }

    pub fn id(&self) -> &ClipId {
        &self.id
    }

    pub fn fields(&self) -> &BTreeMap<String, Option<PathBuf>> {
        &self.fields
    }

    /// Path of a field; `None` both for unknown fields and for assets the
    /// clip lacks by design. Use [`Clip::has_field`] to tell them apart.
    pub fn path(&self, field: &str) -> Option<&Path> {
        self.fields.get(field).and_then(|p| p.as_deref())
    }

    pub fn has_field(&self, field: &str) -> bool {
        self.fields.contains_key(field)
    }

    /// Non-standard attributes, keyed by attribute name.
    pub fn extras(&self) -> &BTreeMap<String, String> {
        &self.extras
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_event_examples() {
        let e = make_event(0.0, 0.0, "dog_bark", None).unwrap();
        assert_eq!((e.onset(), e.offset(), e.label(), e.confidence()), (0.0, 0.0, "dog_bark", None));

        let e = make_event(0.5, 1.25, "siren", Some(0.9)).unwrap();
        assert_eq!((e.onset(), e.offset(), e.label(), e.confidence()), (0.5, 1.25, "siren", Some(0.9)));

        assert!(matches!(
            make_event(2.0, 1.0, "car_horn", None),
            Err(Error::InvalidAnnotation(_))
        ));
    }

    #[test]
    fn event_rejects_bad_fields() {
        assert!(make_event(0.0, 1.0, "", None).is_err());
        assert!(make_event(0.0, 1.0, "a", Some(1.01)).is_err());
        assert!(make_event(0.0, 1.0, "a", Some(-0.1)).is_err());
        assert!(make_event(0.0, 1.0, "a", Some(f64::NAN)).is_err());
        assert!(make_event(-1.0, 1.0, "a", None).is_err());
        assert!(make_event(0.0, f64::INFINITY, "a", None).is_err());
        assert!(make_event(0.0, 1.0, "a", Some(1.0)).is_ok());
        assert!(make_event(0.0, 1.0, "a", Some(0.0)).is_ok());
    }

    #[test]
    fn negative_zero_onset_is_normalized() {
        let e = make_event(-0.0, -0.0, "a", None).unwrap();
        assert!(e.onset().is_sign_positive());
    }

    #[test]
    fn duration_bound_examples() {
        assert_eq!(clip_duration_bound(&EventList::default()), 0.0);
        let events = EventList::new(vec![
            make_event(0.5, 1.25, "a", None).unwrap(),
            make_event(0.0, 0.75, "b", None).unwrap(),
        ]);
        assert_eq!(clip_duration_bound(&events), 1.25);
    }

    #[test]
    fn duration_bound_matches_brute_force_max() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut events = Vec::new();
        for _ in 0..100 {
            let onset = rng.gen_range(0.0..50.0);
            let offset = onset + rng.gen_range(0.0..10.0);
            events.push(make_event(onset, offset, "x", None).unwrap());
        }
        let mut expected = 0.0;
        for e in &events {
            if e.offset() > expected {
                expected = e.offset();
            }
        }
        assert_eq!(clip_duration_bound(&EventList::new(events)), expected);
    }

    #[test]
    fn clip_id_invariants() {
        assert!(ClipId::new("").is_err());
        assert!(ClipId::new("..").is_err());
        assert!(ClipId::new("a/../b").is_err());
        assert!(ClipId::new("a/..b").is_ok());
        assert!(ClipId::new("fold1/clip-0001").is_ok());
    }

    #[test]
    fn tag_invariants() {
        assert!(Tag::new("", None).is_err());
        assert!(Tag::new("dog", Some(2.0)).is_err());
        assert_eq!(Tag::new("dog", None).unwrap().confidence(), None);
    }

    #[test]
    fn audio_buffer_invariants() {
        assert!(AudioBuffer::new(0, vec![vec![0.0]]).is_err());
        assert!(AudioBuffer::new(8000, vec![]).is_err());
        assert!(AudioBuffer::new(8000, vec![vec![0.0], vec![]]).is_err());
        assert!(AudioBuffer::new(8000, vec![vec![1.5]]).is_err());
        assert!(AudioBuffer::new(8000, vec![vec![f32::NAN]]).is_err());
        let b = AudioBuffer::new(8000, vec![vec![0.0, -1.0], vec![1.0, 0.5]]).unwrap();
        assert_eq!((b.num_channels(), b.num_frames()), (2, 2));
    }

    #[test]
    fn clip_path_distinguishes_absent_by_design() {
        let mut fields = BTreeMap::new();
        fields.insert("audio".to_string(), Some(PathBuf::from("/d/a.wav")));
        fields.insert("spectrogram".to_string(), None);
        let clip = Clip::new(ClipId::new("a").unwrap(), fields);
        assert_eq!(clip.path("audio"), Some(Path::new("/d/a.wav")));
        assert_eq!(clip.path("spectrogram"), None);
        assert!(clip.has_field("spectrogram"));
        assert!(!clip.has_field("tags"));
    }
}
