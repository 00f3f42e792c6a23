//! Reproducible access to audio datasets.
//!
//! A dataset is described by a declarative [`registry::DatasetManifest`] and a
//! canonical [`index::DatasetIndex`] mapping every clip to its files and their
//! checksums. The crate downloads the declared remotes ([`fetch`]), checks a
//! local copy against the index ([`validate`]), and loads clips and their
//! annotations into the standard types of [`model`] ([`parsers`],
//! [`registry`]).

pub mod canonical;
pub mod cli;
mod error;
pub mod fetch;
pub mod index;
pub mod model;
pub mod parsers;
pub mod registry;
pub mod validate;

pub use error::{Error, Result};
pub use index::{ChecksumAlgorithm, DatasetIndex, FieldRule, FileRef, IndexEntry};
pub use model::{AudioBuffer, Clip, ClipId, Event, EventList, Tag, TagList};
pub use registry::{open_dataset, Annotation, Dataset, DatasetManifest, Registry};
pub use validate::{validate, ValidationMode, ValidationReport};
