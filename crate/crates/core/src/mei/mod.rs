//! MEI documents linking score notes to performance payloads.
//!
//! The score side is a single measure/staff/layer of notes carrying
//! `xml:id`, `pname`, `oct` and, for altered notes, `accid.ges`. The
//! performance side is one `<recording>` with an `<avFile>` and a `<when>`
//! per note: `@absolute` holds the note onset, `@data` points at the note,
//! and the child `<extData>` holds the JSON payload in a CDATA section.

mod payload;
mod validate;
mod xml;

pub use payload::{
    canonical_f64, format_number, json_decode_payload, json_encode_payload, ContinuousTracks,
    ExtDataPayload, ExtraFields, FrameInfo, ParseMode, PayloadError, SummaryFields,
    CONTINUOUS_KEYS, PAYLOAD_SCHEMA, SUMMARY_KEYS,
};
pub use validate::{validate_document, Violation, ONSET_TOLERANCE_S};
pub use xml::{format_absolute, parse_absolute, parse_mei, serialize_mei, MeiError, ParsedMei};

use crate::descriptors::DescriptorFrameSeries;
use crate::note::NoteName;
use crate::summary::NoteSummary;
use crate::transcription::{is_valid_id, TranscribedNote};

pub const MEI_NAMESPACE: &str = "http://www.music-encoding.org/ns/mei";
pub const MEI_VERSION: &str = "5.0";

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreNote {
    pub id: String,
    pub name: NoteName,
}

#[derive(Debug, Clone, PartialEq)]
pub struct When {
    pub absolute_s: f64,
    /// Id of the linked note, without the leading `#`.
    pub target_id: String,
    pub payload: ExtDataPayload,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeiDocument {
    pub notes: Vec<ScoreNote>,
    pub whens: Vec<When>,
    pub av_target: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BuildError {
    #[error("list lengths differ: {notes} notes, {names} names, {records} records")]
    LengthMismatch {
        notes: usize,
        names: usize,
        records: usize,
    },
    #[error("note {index} has invalid or missing id {id:?}")]
    BadId { index: usize, id: String },
}

pub fn build_document(
    notes: &[TranscribedNote],
    names: &[NoteName],
    records: &[(DescriptorFrameSeries, NoteSummary)],
    av_target: &str,
) -> Result<MeiDocument, BuildError> {
    if notes.len() != names.len() || notes.len() != records.len() {
        return Err(BuildError::LengthMismatch {
            notes: notes.len(),
            names: names.len(),
            records: records.len(),
        });
    }
    let mut doc = MeiDocument {
        av_target: av_target.to_string(),
        ..Default::default()
    };
    for (index, ((note, name), (series, summary))) in
        notes.iter().zip(names).zip(records).enumerate()
    {
        if !is_valid_id(&note.id) {
            return Err(BuildError::BadId {
                index,
                id: note.id.clone(),
            });
        }
        doc.notes.push(ScoreNote {
            id: note.id.clone(),
            name: *name,
        });
        doc.whens.push(When {
            absolute_s: note.onset_s,
            target_id: note.id.clone(),
            payload: ExtDataPayload::from_analysis(note, series, summary),
        });
    }
    Ok(doc)
}
