use crate::error::{Error, Result};
use crate::model::{Event, EventList};

use super::{decode_text, is_blank, numbered_lines, parse_real, split_cells, Delimiter};

/// Layout of a timed event file: `onset, offset, label[, confidence]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EventFormatSpec {
    pub delimiter: Delimiter,
    pub has_confidence: bool,
    /// Leading lines skipped before parsing.
    pub header_rows: usize,
}

impl EventFormatSpec {
    pub fn new(delimiter: Delimiter) -> Self {
        EventFormatSpec {
            delimiter,
            ..Default::default()
        }
    }

    fn columns(&self) -> usize {
        if self.has_confidence {
            4
        } else {
            3
        }
    }
}

pub fn parse_events(bytes: &[u8], spec: EventFormatSpec) -> Result<EventList> {
    let text = decode_text(bytes)?;
    let mut events = Vec::new();
    for (line, raw) in numbered_lines(text).skip(spec.header_rows) {
        if is_blank(raw) {
            continue;
        }
        let cells = split_cells(raw, spec.delimiter);
        if cells.len() != spec.columns() {
            return Err(Error::parse(
                line,
                format!("expected {} cells, found {}", spec.columns(), cells.len()),
            ));
        }
        let onset = parse_real(cells[0], line, "onset")?;
        let offset = parse_real(cells[1], line, "offset")?;
        let confidence = match spec.has_confidence {
            true => Some(parse_real(cells[3], line, "confidence")?),
            false => None,
        };
        let event = Event::new(onset, offset, cells[2], confidence)
            .map_err(|e| Error::parse(line, e.to_string()))?;
        events.push(event);
    }
    Ok(EventList::new(events))
}

/// Canonical rendering: times with six decimals, one event per line.
/// `spec.header_rows` is ignored; no header is written.
pub fn render_events(events: &EventList, spec: EventFormatSpec) -> Vec<u8> {
    let d = spec.delimiter.as_char();
    let mut out = String::new();
    for e in events {
        out.push_str(&format!("{:.6}{d}{:.6}{d}{}", e.onset(), e.offset(), e.label()));
        if spec.has_confidence {
            out.push(d);
            // an event without confidence cannot be expressed in a
            // confidence-bearing file; 1 is the only neutral value
            out.push_str(&e.confidence().unwrap_or(1.0).to_string());
        }
        out.push('\n');
    }
    out.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tab() -> EventFormatSpec {
        EventFormatSpec::new(Delimiter::Tab)
    }

    #[test]
    fn parses_tab_line() {
        let events = parse_events(b"0.500\t1.250\tdog_bark\n", tab()).unwrap();
        assert_eq!(events.len(), 1);
        let e = &events.events()[0];
        assert_eq!((e.onset(), e.offset(), e.label(), e.confidence()), (0.5, 1.25, "dog_bark", None));
    }

    #[test]
    fn empty_input() {
        assert!(parse_events(b"", tab()).unwrap().is_empty());
    }

    #[test]
    fn header_confidence_and_scientific_notation() {
        let spec = EventFormatSpec {
            delimiter: Delimiter::Comma,
            has_confidence: true,
            header_rows: 1,
        };
        let text = b"onset,offset,label,confidence\n1e-1,2.5E0,owl,0.5\n\n3,4,wren,1\n";
        let events = parse_events(text, spec).unwrap();
        let got: Vec<_> = events
            .iter()
            .map(|e| (e.onset(), e.offset(), e.label(), e.confidence()))
            .collect();
        assert_eq!(got, [(0.1, 2.5, "owl", Some(0.5)), (3.0, 4.0, "wren", Some(1.0))]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases: [(&[u8], usize); 5] = [
            (b"0\t1\ta\nx\t1\tb\n", 2),
            (b"2\t1\ta\n", 1),
            (b"0\t1\n", 1),
            (b"\n\n0\t1\ta\textra\n", 3),
            (b"0\t1\t\n", 1),
        ];
        for (input, expected) in cases {
            match parse_events(input, tab()) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, expected),
                other => panic!("{input:?}: unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn does_not_sort() {
        let events = parse_events(b"5\t6\tb\n0\t1\ta\n", tab()).unwrap();
        assert_eq!(events.events()[0].label(), "b");
    }

    #[test]
    fn render_format() {
        let events = EventList::new(vec![Event::new(0.5, 1.25, "a", None).unwrap()]);
        assert_eq!(render_events(&events, tab()), b"0.500000\t1.250000\ta\n");
        assert!(render_events(&EventList::default(), tab()).is_empty());
    }

    #[test]
    fn render_parse_round_trip_with_confidence() {
        let spec = EventFormatSpec {
            delimiter: Delimiter::Comma,
            has_confidence: true,
            header_rows: 0,
        };
        let events = EventList::new(vec![
            Event::new(0.000001, 2.5, "x y", Some(0.3)).unwrap(),
            Event::new(7.0, 7.0, "z", Some(0.0)).unwrap(),
        ]);
        assert_eq!(parse_events(&render_events(&events, spec), spec).unwrap(), events);
    }
}
