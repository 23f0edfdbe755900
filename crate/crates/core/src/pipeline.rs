//! Transcription + audio in, MEI document or payload list out.

use rayon::prelude::*;

use crate::audio::Audio;
use crate::config::AnalysisConfig;
use crate::descriptors::{AnalysisError, DescriptorFrameSeries, FrameAnalyzer};
use crate::mei::{build_document, json_encode_payload, BuildError, ExtDataPayload, MeiDocument};
use crate::note::{note_name_from_hz, NoteName, PitchError};
use crate::summary::{summarize_note, NoteSummary};
use crate::transcription::TranscribedNote;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("note {note_id}: {source}")]
    Pitch {
        note_id: String,
        #[source]
        source: PitchError,
    },
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Build(#[from] BuildError),
}

/// Continuous and summary descriptors for every note, in input order.
/// Notes are analysed in parallel.
pub fn analyze_notes(
    audio: &Audio,
    notes: &[TranscribedNote],
    cfg: &AnalysisConfig,
) -> Result<Vec<(DescriptorFrameSeries, NoteSummary)>, AnalysisError> {
    let analyzer = FrameAnalyzer::new(cfg)?;
    notes
        .par_iter()
        .map(|note| {
            let series = analyzer.analyze(audio, note)?;
            let summary = summarize_note(&series, cfg);
            Ok((series, summary))
        })
        .collect()
}

/// Nearest equal-tempered spelling of each note's nominal frequency.
pub fn note_names(notes: &[TranscribedNote]) -> Result<Vec<NoteName>, PipelineError> {
    notes
        .iter()
        .map(|n| {
            note_name_from_hz(n.nominal_f0_hz).map_err(|source| PipelineError::Pitch {
                note_id: n.id.clone(),
                source,
            })
        })
        .collect()
}

pub fn encode_document(
    audio: &Audio,
    notes: &[TranscribedNote],
    cfg: &AnalysisConfig,
    av_target: &str,
) -> Result<MeiDocument, PipelineError> {
    let names = note_names(notes)?;
    let records = analyze_notes(audio, notes, cfg)?;
    Ok(build_document(notes, &names, &records, av_target)?)
}

pub fn describe_notes(
    audio: &Audio,
    notes: &[TranscribedNote],
    cfg: &AnalysisConfig,
) -> Result<Vec<ExtDataPayload>, AnalysisError> {
    Ok(analyze_notes(audio, notes, cfg)?
        .iter()
        .zip(notes)
        .map(|((series, summary), note)| ExtDataPayload::from_analysis(note, series, summary))
        .collect())
}

/// JSON array of canonical payloads.
pub fn payloads_to_json(payloads: &[ExtDataPayload]) -> String {
    let mut out = String::from("[");
    for (i, p) in payloads.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&json_encode_payload(p));
    }
    out.push(']');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mei::{validate_document, ParseMode};
    use crate::transcription::{assign_ids, parse_tony_csv, DEFAULT_ID_PREFIX};

    fn two_tone() -> Audio {
        let sr = 44_100.0;
        Audio::new(
            (0..66_150)
                .map(|i| {
                    let t = i as f64 / sr;
                    let f = if t < 0.75 { 440.0 } else { 523.25 };
                    0.7 * (2.0 * std::f64::consts::PI * f * t).sin()
                })
                .collect(),
            44_100,
        )
    }

    #[test]
    fn parallel_order_matches_input() {
        let t = assign_ids(
            parse_tony_csv("0.05,440,0.6\n0.8,523.25,0.6\n").unwrap(),
            DEFAULT_ID_PREFIX,
        );
        let doc =
            encode_document(&two_tone(), &t.notes, &AnalysisConfig::default(), "x.wav").unwrap();
        assert_eq!(doc.notes[0].name.to_string(), "A4");
        assert_eq!(doc.notes[1].name.to_string(), "C5");
        let p0 = doc.whens[0].payload.summary.perceived_pitch_hz.unwrap();
        let p1 = doc.whens[1].payload.summary.perceived_pitch_hz.unwrap();
        assert!((p0 - 440.0).abs() < 1.0 && (p1 - 523.25).abs() < 1.0);
        assert!(validate_document(&doc).is_empty());
        let xml = crate::mei::serialize_mei(&doc);
        let back = crate::mei::parse_mei(&xml, ParseMode::Strict)
            .unwrap()
            .document;
        assert_eq!(crate::mei::serialize_mei(&back), xml);
    }

    #[test]
    fn empty_payload_array() {
        assert_eq!(payloads_to_json(&[]), "[]");
    }
}
