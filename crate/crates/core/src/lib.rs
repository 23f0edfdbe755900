//! Note-level performance descriptors extracted from audio under the guidance
//! of a note transcription, and their encoding as JSON payloads inside MEI
//! `<extData>` elements linked to score notes through `<when>`.
//!
//! The flow is: [`transcription::parse_tony_csv`] → [`descriptors::analyze_note`]
//! → [`summary::summarize_note`] → [`mei::build_document`] →
//! [`mei::serialize_mei`]. [`mei::parse_mei`] and [`mei::validate_document`]
//! go the other way.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio;
pub mod cli;
pub mod config;
pub mod descriptors;
pub mod mei;
pub mod note;
pub mod pipeline;
pub mod summary;
pub mod transcription;

pub use audio::Audio;
pub use config::AnalysisConfig;
pub use descriptors::{analyze_note, DescriptorFrameSeries, FrameGrid};
pub use mei::{ExtDataPayload, MeiDocument, ParseMode};
pub use note::NoteName;
pub use summary::{summarize_note, NoteSummary};
pub use transcription::{TranscribedNote, TranscriptionFile};
