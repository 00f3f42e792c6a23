use crate::error::{Error, Result};
use crate::model::{Tag, TagList};

use super::{decode_text, is_blank, numbered_lines, parse_real, split_cells, Delimiter};

/// Parses a tag file: one `label` or `label<delim>confidence` per line.
pub fn parse_tags(bytes: &[u8], delimiter: Delimiter) -> Result<TagList> {
    let text = decode_text(bytes)?;
    let mut tags = Vec::new();
    for (line, raw) in numbered_lines(text) {
        if is_blank(raw) {
            continue;
        }
        let cells = split_cells(raw, delimiter);
        let (label, confidence) = match cells.as_slice() {
            [label] => (*label, None),
            [label, conf] => (*label, Some(parse_real(conf, line, "confidence")?)),
            _ => {
                return Err(Error::parse(
                    line,
                    format!("expected 1 or 2 cells, found {}", cells.len()),
                ))
            }
        };
        let tag = Tag::new(label, confidence).map_err(|e| Error::parse(line, e.to_string()))?;
        tags.push(tag);
    }
    Ok(TagList::new(tags))
}

/// Writes tags in the form [`parse_tags`] reads back unchanged.
pub fn render_tags(tags: &TagList, delimiter: Delimiter) -> Vec<u8> {
    let mut out = String::new();
    for tag in tags {
        out.push_str(tag.label());
        if let Some(c) = tag.confidence() {
            out.push(delimiter.as_char());
            out.push_str(&c.to_string());
        }
        out.push('\n');
    }
    out.into_bytes()
}
