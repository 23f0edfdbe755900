use std::collections::HashSet;
use std::fmt;

use super::MeiDocument;
use crate::transcription::is_valid_id;

/// Allowed disagreement between `when/@absolute` and the payload onset.
pub const ONSET_TOLERANCE_S: f64 = 0.001;

/// One failed check, optionally attributed to a note id.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub note_id: Option<String>,
    pub message: String,
}

impl Violation {
    fn note(id: &str, message: impl Into<String>) -> Self {
        Violation {
            note_id: Some(id.to_string()),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.note_id {
            Some(id) => write!(f, "{id}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

pub fn validate_document(doc: &MeiDocument) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut seen = HashSet::new();
    for n in &doc.notes {
        if !is_valid_id(&n.id) {
            out.push(Violation::note(&n.id, "invalid xml:id"));
        }
        if !seen.insert(n.id.as_str()) {
            out.push(Violation::note(&n.id, "duplicate xml:id"));
        }
    }

    let mut last_time = f64::NEG_INFINITY;
    for w in &doc.whens {
        let id = w.target_id.as_str();
        if !seen.contains(id) {
            out.push(Violation::note(id, "when references a missing note"));
        }
        if w.absolute_s < last_time {
            out.push(Violation::note(id, "absolute time decreases"));
        }
        last_time = last_time.max(w.absolute_s);

        let p = &w.payload;
        let mismatch = (p.onset_s - w.absolute_s).abs();
        if mismatch > ONSET_TOLERANCE_S + 1e-9 {
            out.push(Violation::note(
                id,
                format!("onset mismatch {:.0} ms", mismatch * 1000.0),
            ));
        }
        if !(p.onset_s >= 0.0) {
            out.push(Violation::note(id, format!("negative onset {}", p.onset_s)));
        }
        if !(p.duration_s > 0.0) {
            out.push(Violation::note(
                id,
                format!("non-positive duration {}", p.duration_s),
            ));
        }
        if !(p.frame.hop_s > 0.0) {
            out.push(Violation::note(
                id,
                format!("non-positive frame.hop_s {}", p.frame.hop_s),
            ));
        }
        for (key, track) in p.continuous.tracks() {
            if track.len() != p.frame.count {
                out.push(Violation::note(
                    id,
                    format!(
                        "continuous.{key} has {} entries, frame.count is {}",
                        track.len(),
                        p.frame.count
                    ),
                ));
            }
        }
        if p.continuous
            .spectral_flatness
            .iter()
            .flatten()
            .any(|v| !(0.0..=1.0).contains(v))
        {
            out.push(Violation::note(
                id,
                "continuous.spectral_flatness outside [0, 1]",
            ));
        }
        if p.continuous
            .spectral_flux
            .iter()
            .flatten()
            .any(|v| *v < 0.0)
        {
            out.push(Violation::note(id, "continuous.spectral_flux negative"));
        }
        if let Some(v) = p.summary.mean_spectral_flatness {
            if !(0.0..=1.0).contains(&v) {
                out.push(Violation::note(
                    id,
                    format!("summary.mean_spectral_flatness {v} outside [0, 1]"),
                ));
            }
        }
        for (key, v) in [("jitter", p.summary.jitter), ("shimmer", p.summary.shimmer)] {
            if let Some(v) = v.filter(|v| *v < 0.0) {
                out.push(Violation::note(
                    id,
                    format!("summary.{key} {v} is negative"),
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mei::{ExtDataPayload, FrameInfo, ScoreNote, When};
    use crate::note::note_name_from_midi;

    fn doc() -> MeiDocument {
        let when = |i: usize, t: f64| When {
            absolute_s: t,
            target_id: format!("note-{i:04}"),
            payload: ExtDataPayload {
                onset_s: t,
                duration_s: 0.2,
                frame: FrameInfo {
                    hop_s: 0.01,
                    count: 0,
                    extra: vec![],
                },
                ..Default::default()
            },
        };
        MeiDocument {
            notes: (1..=3)
                .map(|i| ScoreNote {
                    id: format!("note-{i:04}"),
                    name: note_name_from_midi(60).unwrap(),
                })
                .collect(),
            whens: vec![when(1, 0.1), when(2, 0.5), when(3, 0.9)],
            av_target: "a.wav".into(),
        }
    }

    #[test]
    fn clean_document() {
        assert!(validate_document(&doc()).is_empty());
    }

    #[test]
    fn onset_mismatch() {
        let mut d = doc();
        d.whens[1].absolute_s = 0.7;
        let v = validate_document(&d);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].message, "onset mismatch 200 ms");

        d.whens[1].absolute_s = 1.0;
        d.whens[1].payload.onset_s = 1.0;
        let v = validate_document(&d);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].message, "absolute time decreases");
    }

    #[test]
    fn onset_mismatch_alone() {
        let mut d = doc();
        d.whens[1].payload.onset_s = 0.3;
        let v = validate_document(&d);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].to_string(), "note-0002: onset mismatch 200 ms");
    }

    #[test]
    fn flatness_out_of_range() {
        let mut d = doc();
        d.whens[0].payload.summary.mean_spectral_flatness = Some(1.5);
        let v = validate_document(&d);
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("outside [0, 1]"));
    }

    #[test]
    fn broken_links_and_ids() {
        let mut d = doc();
        d.notes[2].id = "3bad".into();
        let v = validate_document(&d);
        assert_eq!(v.len(), 2, "{v:?}");

        let mut d = doc();
        d.notes[1].id = "note-0001".into();
        let v = validate_document(&d);
        assert!(v.iter().any(|x| x.message == "duplicate xml:id"));
        assert!(v
            .iter()
            .any(|x| x.message == "when references a missing note"));
    }

    #[test]
    fn track_length_mismatch() {
        let mut d = doc();
        d.whens[0].payload.continuous.f0_hz.push(None);
        assert_eq!(validate_document(&d).len(), 1);
    }
}
