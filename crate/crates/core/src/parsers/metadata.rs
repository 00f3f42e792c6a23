use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::ClipId;

use super::decode_text;

/// Clip-level metadata keyed by the first column. Cells are kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MetadataTable {
    header: Vec<String>,
    rows: BTreeMap<ClipId, BTreeMap<String, String>>,
}

impl MetadataTable {
    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &BTreeMap<ClipId, BTreeMap<String, String>> {
        &self.rows
    }

    pub fn row(&self, id: &str) -> Option<&BTreeMap<String, String>> {
        self.rows.get(id)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Parses comma-separated values with a header row (RFC 4180 quoting).
pub fn parse_metadata_table(bytes: &[u8]) -> Result<MetadataTable> {
    let text = decode_text(bytes)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut header: Option<Vec<String>> = None;
    let mut rows = BTreeMap::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = reader.read_record(&mut record).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(line, e.to_string())
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        let Some(columns) = &header else {
            let names: Vec<String> = record.iter().map(str::to_owned).collect();
            if let Some(i) = names.iter().position(|n| n.trim().is_empty()) {
                return Err(Error::parse(line, format!("header column {} is empty", i + 1)));
            }
            for (i, name) in names.iter().enumerate() {
                if names[..i].contains(name) {
                    return Err(Error::parse(line, format!("duplicate column {name:?}")));
                }
            }
            header = Some(names);
            continue;
        };
        if record.len() != columns.len() {
            return Err(Error::parse(
                line,
                format!("expected {} cells, found {}", columns.len(), record.len()),
            ));
        }
        let id = ClipId::new(&record[0]).map_err(|e| Error::parse(line, e.to_string()))?;
        if rows.contains_key(&id) {
            return Err(Error::parse(line, format!("duplicate id {id:?}")));
        }
        let cells = columns
            .iter()
            .cloned()
            .zip(record.iter().map(str::to_owned))
            .collect();
        rows.insert(id, cells);
    }
    let header = header.ok_or_else(|| Error::parse(1, "missing header row"))?;
    Ok(MetadataTable { header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_row() {
        let t = parse_metadata_table(b"clip_id,city\nc1,NYC\n").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.row("c1").unwrap()["city"], "NYC");
        assert_eq!(t.header(), ["clip_id", "city"]);
    }

    #[test]
    fn duplicate_id() {
        match parse_metadata_table(b"clip_id\nc1\nc1\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_only() {
        assert!(parse_metadata_table(b"clip_id,city\n").unwrap().is_empty());
    }

    #[test]
    fn errors() {
        assert!(parse_metadata_table(b"").is_err());
        assert!(parse_metadata_table(b"\n  \n").is_err());
        assert!(parse_metadata_table(b"a,b\nx\n").is_err());
        assert!(parse_metadata_table(b"a,,c\n").is_err());
        assert!(parse_metadata_table(b"a,a\n").is_err());
        assert!(parse_metadata_table(b"a,b\n,1\n").is_err());
        assert!(parse_metadata_table(b"a\n\xff\n").is_err());
    }

    #[test]
    fn quoting_and_verbatim_cells() {
        let t = parse_metadata_table(b"\xEF\xBB\xBFid,note,n\r\nc1,\"hello, \"\"world\"\"\", 007\r\n\r\n").unwrap();
        let row = t.row("c1").unwrap();
        assert_eq!(row["note"], "hello, \"world\"");
        assert_eq!(row["n"], " 007");
    }
}
