//! Parsers for the on-disk annotation and media formats.
//!
//! Every parser is total: arbitrary input yields either a value or an error
//! carrying a location, never a panic. Text formats must be UTF-8 (a leading
//! byte order mark is stripped). Parsers keep source order and never sort.

mod events;
mod metadata;
mod tags;
mod wav;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use events::{parse_events, render_events, EventFormatSpec};
pub use metadata::{parse_metadata_table, MetadataTable};
pub use tags::{parse_tags, render_tags};
pub use wav::{encode_wav_pcm16, load_audio};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Delimiter {
    #[default]
    Tab,
    Comma,
}

impl Delimiter {
    pub fn as_char(self) -> char {
        match self {
            Delimiter::Tab => '\t',
            Delimiter::Comma => ',',
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Delimiter::Tab => "tab",
            Delimiter::Comma => "comma",
        }
    }
}

impl fmt::Display for Delimiter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Delimiter {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "tab" => Ok(Delimiter::Tab),
            "comma" => Ok(Delimiter::Comma),
            other => Err(format!("unknown delimiter {other:?}")),
        }
    }
}

/// Decodes UTF-8 text, dropping a leading byte order mark.
pub(crate) fn decode_text(bytes: &[u8]) -> Result<&str> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    std::str::from_utf8(bytes).map_err(|e| {
        let line = 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count();
        Error::parse(line, "input is not valid UTF-8")
    })
}

/// Lines with their 1-based numbers, a trailing `\r` removed.
pub(crate) fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split('\n')
        .enumerate()
        .map(|(i, line)| (i + 1, line.strip_suffix('\r').unwrap_or(line)))
}

pub(crate) fn is_blank(line: &str) -> bool {
    line.trim().is_empty()
}

pub(crate) fn split_cells(line: &str, delimiter: Delimiter) -> Vec<&str> {
    line.split(delimiter.as_char()).map(str::trim).collect()
}

/// Parses a finite real in plain decimal or scientific notation.
pub(crate) fn parse_real(cell: &str, line: usize, what: &str) -> Result<f64> {
    let looks_numeric = !cell.is_empty()
        && cell
            .bytes()
            .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'e' | b'E' | b'+' | b'-'));
    match cell.parse::<f64>() {
        Ok(v) if looks_numeric && v.is_finite() => Ok(v),
        _ => Err(Error::parse(line, format!("{what} {cell:?} is not a finite number"))),
    }
}
