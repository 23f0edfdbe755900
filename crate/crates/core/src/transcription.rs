//! Tony-style note CSV import.
//!
//! Each data row is `onset_s,frequency_hz,duration_s`. A single header line is
//! tolerated when its first field is not a number. Rows are sorted by onset
//! and must be monophonic up to [`OVERLAP_TOLERANCE_S`].

use std::fmt::Write as _;
use std::path::Path;

/// Overlap allowed between consecutive notes before the file is rejected.
pub const OVERLAP_TOLERANCE_S: f64 = 0.010;

#[derive(Debug, Clone, PartialEq)]
pub struct TranscribedNote {
    /// XML id; empty until [`assign_ids`] runs.
    pub id: String,
    pub onset_s: f64,
    pub duration_s: f64,
    pub nominal_f0_hz: f64,
}

impl TranscribedNote {
    pub fn new(onset_s: f64, nominal_f0_hz: f64, duration_s: f64) -> Self {
        TranscribedNote {
            id: String::new(),
            onset_s,
            duration_s,
            nominal_f0_hz,
        }
    }

    pub fn offset_s(&self) -> f64 {
        self.onset_s + self.duration_s
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TranscriptionFile {
    pub notes: Vec<TranscribedNote>,
    pub source_path: String,
}

#[derive(Debug, thiserror::Error)]
pub enum TranscriptionError {
    #[error("line {line}: malformed row: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: invalid value: {message}")]
    Invalid { line: usize, message: String },
    #[error(
        "lines {first_line} and {second_line}: notes overlap by {:.1} ms (tolerance {:.0} ms)",
        overlap_s * 1000.0,
        OVERLAP_TOLERANCE_S * 1000.0
    )]
    Overlap {
        first_line: usize,
        second_line: usize,
        overlap_s: f64,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl TranscriptionError {
    /// True for errors about the file contents (as opposed to I/O).
    pub fn is_validation(&self) -> bool {
        !matches!(self, TranscriptionError::Io { .. })
    }
}

fn parse_field(raw: &str) -> Option<f64> {
    raw.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn parse_tony_csv(text: &str) -> Result<TranscriptionFile, TranscriptionError> {
    let mut rows: Vec<(usize, TranscribedNote)> = Vec::new();

    for (idx, raw_line) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if idx == 0 && parse_field(fields[0]).is_none() {
            // header
            continue;
        }
        if fields.len() != 3 {
            return Err(TranscriptionError::Malformed {
                line: line_no,
                message: format!("expected 3 columns, found {}", fields.len()),
            });
        }
        let mut values = [0.0; 3];
        for (slot, (raw, name)) in
            values
                .iter_mut()
                .zip(fields.iter().zip(["onset", "frequency", "duration"]))
        {
            *slot = parse_field(raw).ok_or_else(|| TranscriptionError::Malformed {
                line: line_no,
                message: format!("{name} field {:?} is not a number", raw.trim()),
            })?;
        }
        let [onset, freq, dur] = values;
        if onset < 0.0 {
            return Err(TranscriptionError::Invalid {
                line: line_no,
                message: format!("negative onset {onset}"),
            });
        }
        if freq <= 0.0 {
            return Err(TranscriptionError::Invalid {
                line: line_no,
                message: format!("non-positive frequency {freq}"),
            });
        }
        if dur <= 0.0 {
            return Err(TranscriptionError::Invalid {
                line: line_no,
                message: format!("non-positive duration {dur}"),
            });
        }
        rows.push((line_no, TranscribedNote::new(onset, freq, dur)));
    }

    rows.sort_by(|a, b| a.1.onset_s.total_cmp(&b.1.onset_s));

    for pair in rows.windows(2) {
        let (first_line, prev) = &pair[0];
        let (second_line, next) = &pair[1];
        let overlap = prev.offset_s() - next.onset_s;
        if overlap > OVERLAP_TOLERANCE_S {
            return Err(TranscriptionError::Overlap {
                first_line: *first_line,
                second_line: *second_line,
                overlap_s: overlap,
            });
        }
    }

    Ok(TranscriptionFile {
        notes: rows.into_iter().map(|(_, n)| n).collect(),
        source_path: String::new(),
    })
}

pub fn read_tony_csv(path: &Path) -> Result<TranscriptionFile, TranscriptionError> {
    let text = std::fs::read_to_string(path).map_err(|source| TranscriptionError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut file = parse_tony_csv(&text)?;
    file.source_path = path.display().to_string();
    Ok(file)
}

/// Inverse of [`parse_tony_csv`]: header-less rows with round-trip float formatting.
pub fn write_tony_csv(t: &TranscriptionFile) -> String {
    let mut out = String::new();
    for n in &t.notes {
        let _ = writeln!(out, "{},{},{}", n.onset_s, n.nominal_f0_hz, n.duration_s);
    }
    out
}

/// Gives every note an id `<prefix>NNNN` in onset order, starting at 1.
pub fn assign_ids(mut t: TranscriptionFile, prefix: &str) -> TranscriptionFile {
    for (i, note) in t.notes.iter_mut().enumerate() {
        note.id = format!("{prefix}{:04}", i + 1);
    }
    t
}

pub const DEFAULT_ID_PREFIX: &str = "note-";

/// Whether `id` matches `[A-Za-z_][A-Za-z0-9_.-]*`.
pub fn is_valid_id(id: &str) -> bool {
    let mut chars = id.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_row() {
        let t = parse_tony_csv("0.500,440.0,1.000\n").unwrap();
        assert_eq!(t.notes, vec![TranscribedNote::new(0.5, 440.0, 1.0)]);
        assert!(t.notes[0].id.is_empty());
    }

    #[test]
    fn header_is_skipped() {
        let t = parse_tony_csv("TIME,FREQ,DURATION\n0.0,220.0,0.5\n").unwrap();
        assert_eq!(t.notes.len(), 1);
        assert_eq!(t.notes[0].nominal_f0_hz, 220.0);
    }

    #[test]
    fn crlf_and_unsorted_rows() {
        let t = parse_tony_csv("1.0,330,0.5\r\n0.0,220,0.5\r\n").unwrap();
        assert_eq!(t.notes[0].onset_s, 0.0);
        assert_eq!(t.notes[1].onset_s, 1.0);
    }

    #[test]
    fn overlap_beyond_tolerance_names_both_lines() {
        let err = parse_tony_csv("0.0,440,1.0\n0.5,441,1.0\n").unwrap_err();
        match err {
            TranscriptionError::Overlap {
                first_line,
                second_line,
                ..
            } => assert_eq!((first_line, second_line), (1, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn small_overlap_is_tolerated() {
        assert!(parse_tony_csv("0.0,440,1.005\n1.0,441,1.0\n").is_ok());
    }

    #[test]
    fn malformed_rows_are_located() {
        let err = parse_tony_csv("0.0,440,1.0\n1.0,440\n").unwrap_err();
        assert!(matches!(err, TranscriptionError::Malformed { line: 2, .. }));
        let err = parse_tony_csv("0.0,440,1.0\n1.0,abc,1.0\n").unwrap_err();
        assert!(matches!(err, TranscriptionError::Malformed { line: 2, .. }));
        let err = parse_tony_csv("0.0,440,1.0\n1.0,nan,1.0\n").unwrap_err();
        assert!(matches!(err, TranscriptionError::Malformed { line: 2, .. }));
        assert!(err.to_string().starts_with("line 2:"));
    }

    #[test]
    fn invalid_values_are_located() {
        let err = parse_tony_csv("-0.1,440,1.0\n").unwrap_err();
        assert!(matches!(err, TranscriptionError::Invalid { line: 1, .. }));
        let err = parse_tony_csv("h,h,h\n0.0,0,1.0\n").unwrap_err();
        assert!(matches!(err, TranscriptionError::Invalid { line: 2, .. }));
        let err = parse_tony_csv("0.0,440,0\n").unwrap_err();
        assert!(matches!(err, TranscriptionError::Invalid { line: 1, .. }));
    }

    #[test]
    fn empty_input_has_no_notes() {
        assert!(parse_tony_csv("").unwrap().notes.is_empty());
    }

    #[test]
    fn ids_are_zero_padded() {
        let one = assign_ids(parse_tony_csv("0,440,1\n").unwrap(), DEFAULT_ID_PREFIX);
        assert_eq!(one.notes[0].id, "note-0001");

        let csv: String = (0..12).map(|i| format!("{i},440,0.5\n")).collect();
        let twelve = assign_ids(parse_tony_csv(&csv).unwrap(), DEFAULT_ID_PREFIX);
        assert_eq!(twelve.notes.last().unwrap().id, "note-0012");

        let prefixed = assign_ids(parse_tony_csv("0,440,1\n").unwrap(), "v1-");
        assert_eq!(prefixed.notes[0].id, "v1-0001");
        assert!(is_valid_id("v1-0001"));
    }

    #[test]
    fn id_pattern() {
        assert!(is_valid_id("note-0001"));
        assert!(is_valid_id("_x.y"));
        assert!(!is_valid_id("1abc"));
        assert!(!is_valid_id(""));
        assert!(!is_valid_id("a b"));
    }

    fn arb_transcription() -> impl Strategy<Value = TranscriptionFile> {
        prop::collection::vec((0.01f64..2.0, 50.0f64..2000.0, 0.01f64..2.0), 0..30).prop_map(
            |rows| {
                let mut t = 0.0;
                let notes = rows
                    .into_iter()
                    .map(|(gap, f, d)| {
                        let n = TranscribedNote::new(t + gap, f, d);
                        t = n.offset_s();
                        n
                    })
                    .collect();
                TranscriptionFile {
                    notes,
                    source_path: String::new(),
                }
            },
        )
    }

    proptest! {
        #[test]
        fn csv_round_trip(t in arb_transcription()) {
            let back = parse_tony_csv(&write_tony_csv(&t)).unwrap();
            prop_assert_eq!(back.notes.len(), t.notes.len());
            for (a, b) in back.notes.iter().zip(&t.notes) {
                prop_assert!((a.onset_s - b.onset_s).abs() <= 1e-9);
                prop_assert!((a.duration_s - b.duration_s).abs() <= 1e-9);
                prop_assert!((a.nominal_f0_hz - b.nominal_f0_hz).abs() <= 1e-9);
            }
        }

        #[test]
        fn parse_never_panics(text in "[0-9a-z.,\\-\r\n ]{0,80}") {
            let _ = parse_tony_csv(&text);
        }
    }
}
