//! The JSON object carried inside each `<extData>`.
//!
//! Encoding is canonical: keys in a fixed order, no insignificant whitespace,
//! numbers with at most 9 significant digits (positional for magnitudes in
//! `[1e-3, 1e9)`, exponent form otherwise). Values stored in a payload are
//! kept at that precision, so decoding an encoded payload gives back the same
//! numbers bit for bit.

use std::fmt::Write as _;

use serde_json::{Map, Value};

use crate::descriptors::DescriptorFrameSeries;
use crate::summary::NoteSummary;
use crate::transcription::TranscribedNote;

pub const PAYLOAD_SCHEMA: &str = "ampact-extdata/1.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Unknown keys and dangling links are errors.
    #[default]
    Strict,
    /// Unknown keys are preserved, dangling links dropped with a warning.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PayloadError {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("field `{field}`: {message}")]
    Schema { field: String, message: String },
}

impl PayloadError {
    fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        PayloadError::Schema {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Keys not defined by the schema, kept in lenient mode in encounter order.
pub type ExtraFields = Vec<(String, Value)>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameInfo {
    pub hop_s: f64,
    pub count: usize,
    pub extra: ExtraFields,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContinuousTracks {
    pub f0_hz: Vec<Option<f64>>,
    pub power_db: Vec<Option<f64>>,
    pub spectral_centroid_hz: Vec<Option<f64>>,
    pub spectral_flux: Vec<Option<f64>>,
    pub spectral_slope: Vec<Option<f64>>,
    pub spectral_flatness: Vec<Option<f64>>,
    pub extra: ExtraFields,
}

pub const CONTINUOUS_KEYS: [&str; 6] = [
    "f0_hz",
    "power_db",
    "spectral_centroid_hz",
    "spectral_flux",
    "spectral_slope",
    "spectral_flatness",
];

impl ContinuousTracks {
    pub fn tracks(&self) -> [(&'static str, &Vec<Option<f64>>); 6] {
        [
            (CONTINUOUS_KEYS[0], &self.f0_hz),
            (CONTINUOUS_KEYS[1], &self.power_db),
            (CONTINUOUS_KEYS[2], &self.spectral_centroid_hz),
            (CONTINUOUS_KEYS[3], &self.spectral_flux),
            (CONTINUOUS_KEYS[4], &self.spectral_slope),
            (CONTINUOUS_KEYS[5], &self.spectral_flatness),
        ]
    }

    fn tracks_mut(&mut self) -> [&mut Vec<Option<f64>>; 6] {
        [
            &mut self.f0_hz,
            &mut self.power_db,
            &mut self.spectral_centroid_hz,
            &mut self.spectral_flux,
            &mut self.spectral_slope,
            &mut self.spectral_flatness,
        ]
    }
}

/// Summary descriptors as stored in the payload; every field may be null.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SummaryFields {
    pub perceived_pitch_hz: Option<f64>,
    pub jitter: Option<f64>,
    pub vibrato_rate_hz: Option<f64>,
    pub vibrato_depth_cents: Option<f64>,
    pub mean_power_db: Option<f64>,
    pub shimmer: Option<f64>,
    pub mean_spectral_centroid_hz: Option<f64>,
    pub mean_spectral_flux: Option<f64>,
    pub mean_spectral_slope: Option<f64>,
    pub mean_spectral_flatness: Option<f64>,
    pub extra: ExtraFields,
}

pub const SUMMARY_KEYS: [&str; 10] = [
    "perceived_pitch_hz",
    "jitter",
    "vibrato_rate_hz",
    "vibrato_depth_cents",
    "mean_power_db",
    "shimmer",
    "mean_spectral_centroid_hz",
    "mean_spectral_flux",
    "mean_spectral_slope",
    "mean_spectral_flatness",
];

impl SummaryFields {
    pub fn values(&self) -> [(&'static str, Option<f64>); 10] {
        [
            (SUMMARY_KEYS[0], self.perceived_pitch_hz),
            (SUMMARY_KEYS[1], self.jitter),
            (SUMMARY_KEYS[2], self.vibrato_rate_hz),
            (SUMMARY_KEYS[3], self.vibrato_depth_cents),
            (SUMMARY_KEYS[4], self.mean_power_db),
            (SUMMARY_KEYS[5], self.shimmer),
            (SUMMARY_KEYS[6], self.mean_spectral_centroid_hz),
            (SUMMARY_KEYS[7], self.mean_spectral_flux),
            (SUMMARY_KEYS[8], self.mean_spectral_slope),
            (SUMMARY_KEYS[9], self.mean_spectral_flatness),
        ]
    }

    fn values_mut(&mut self) -> [&mut Option<f64>; 10] {
        [
            &mut self.perceived_pitch_hz,
            &mut self.jitter,
            &mut self.vibrato_rate_hz,
            &mut self.vibrato_depth_cents,
            &mut self.mean_power_db,
            &mut self.shimmer,
            &mut self.mean_spectral_centroid_hz,
            &mut self.mean_spectral_flux,
            &mut self.mean_spectral_slope,
            &mut self.mean_spectral_flatness,
        ]
    }
}

impl From<&NoteSummary> for SummaryFields {
    fn from(s: &NoteSummary) -> Self {
        SummaryFields {
            perceived_pitch_hz: s.perceived_pitch_hz,
            jitter: s.jitter,
            vibrato_rate_hz: s.vibrato_rate_hz,
            vibrato_depth_cents: s.vibrato_depth_cents,
            mean_power_db: Some(s.mean_power_db),
            shimmer: s.shimmer,
            mean_spectral_centroid_hz: s.mean_spectral_centroid_hz,
            mean_spectral_flux: s.mean_spectral_flux,
            mean_spectral_slope: s.mean_spectral_slope,
            mean_spectral_flatness: s.mean_spectral_flatness,
            extra: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExtDataPayload {
    pub onset_s: f64,
    pub duration_s: f64,
    pub frame: FrameInfo,
    pub continuous: ContinuousTracks,
    pub summary: SummaryFields,
    pub extra: ExtraFields,
}

impl ExtDataPayload {
    /// Assembles the payload for one analysed note, at canonical precision.
    pub fn from_analysis(
        note: &TranscribedNote,
        series: &DescriptorFrameSeries,
        summary: &NoteSummary,
    ) -> Self {
        let opt = |v: &[Option<f64>]| v.to_vec();
        let payload = ExtDataPayload {
            onset_s: note.onset_s,
            duration_s: note.duration_s,
            frame: FrameInfo {
                hop_s: series.grid.hop_s,
                count: series.grid.count,
                extra: Vec::new(),
            },
            continuous: ContinuousTracks {
                f0_hz: opt(&series.f0_hz),
                power_db: series.power_db.iter().map(|&p| Some(p)).collect(),
                spectral_centroid_hz: opt(&series.spectral_centroid_hz),
                spectral_flux: opt(&series.spectral_flux),
                spectral_slope: opt(&series.spectral_slope),
                spectral_flatness: opt(&series.spectral_flatness),
                extra: Vec::new(),
            },
            summary: summary.into(),
            extra: Vec::new(),
        };
        payload.canonicalized()
    }

    /// Rounds every number to the precision of its canonical rendering.
    /// Non-finite values become null (or 0 for required scalars).
    pub fn canonicalized(mut self) -> Self {
        let scalar = |x: f64| canonical_f64(x).unwrap_or(0.0);
        self.onset_s = scalar(self.onset_s);
        self.duration_s = scalar(self.duration_s);
        self.frame.hop_s = scalar(self.frame.hop_s);
        for track in self.continuous.tracks_mut() {
            for v in track.iter_mut() {
                *v = v.and_then(canonical_f64);
            }
        }
        for v in self.summary.values_mut() {
            *v = v.and_then(canonical_f64);
        }
        self
    }
}

/// Formats a finite number canonically; `None` for NaN and infinities.
pub fn format_number(x: f64) -> Option<String> {
    if !x.is_finite() {
        return None;
    }
    if x == 0.0 {
        return Some("0".to_string());
    }
    let sci = format!("{:.8e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };

    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if (-3..=8).contains(&exp) {
        if exp >= 0 {
            let int_len = exp as usize + 1;
            if digits.len() <= int_len {
                out.push_str(digits);
                out.extend(std::iter::repeat_n('0', int_len - digits.len()));
            } else {
                out.push_str(&digits[..int_len]);
                out.push('.');
                out.push_str(&digits[int_len..]);
            }
        } else {
            out.push_str("0.");
            out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
            out.push_str(digits);
        }
    } else {
        out.push_str(&digits[..1]);
        if digits.len() > 1 {
            out.push('.');
            out.push_str(&digits[1..]);
        }
        let _ = write!(out, "e{exp}");
    }
    Some(out)
}

/// The value a number takes after a canonical encode/decode cycle.
pub fn canonical_f64(x: f64) -> Option<f64> {
    format_number(x).map(|s| s.parse().expect("canonical numbers parse"))
}

fn push_number(out: &mut String, v: Option<f64>) {
    match v.and_then(format_number) {
        Some(s) => out.push_str(&s),
        None => out.push_str("null"),
    }
}

fn push_string(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            // keeps "]]>" and markup out of the CDATA section
            '<' | '>' | '&' => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

fn push_value(out: &mut String, v: &Value) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                push_number(out, n.as_f64());
            }
        }
        Value::String(s) => push_string(out, s),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                push_value(out, item);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (i, (k, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                push_string(out, k);
                out.push(':');
                push_value(out, item);
            }
            out.push('}');
        }
    }
}

fn push_key(out: &mut String, key: &str) {
    push_string(out, key);
    out.push(':');
}

fn push_extras(out: &mut String, extra: &ExtraFields) {
    for (k, v) in extra {
        out.push(',');
        push_key(out, k);
        push_value(out, v);
    }
}

pub fn json_encode_payload(p: &ExtDataPayload) -> String {
    let mut out = String::with_capacity(64 + 16 * 6 * p.frame.count);
    out.push('{');
    push_key(&mut out, "schema");
    push_string(&mut out, PAYLOAD_SCHEMA);
    out.push(',');
    push_key(&mut out, "onset_s");
    push_number(&mut out, Some(p.onset_s));
    out.push(',');
    push_key(&mut out, "duration_s");
    push_number(&mut out, Some(p.duration_s));

    out.push(',');
    push_key(&mut out, "frame");
    out.push('{');
    push_key(&mut out, "hop_s");
    push_number(&mut out, Some(p.frame.hop_s));
    out.push(',');
    push_key(&mut out, "count");
    let _ = write!(out, "{}", p.frame.count);
    push_extras(&mut out, &p.frame.extra);
    out.push('}');

    out.push(',');
    push_key(&mut out, "continuous");
    out.push('{');
    for (i, (key, track)) in p.continuous.tracks().into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        push_key(&mut out, key);
        out.push('[');
        for (j, v) in track.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            push_number(&mut out, *v);
        }
        out.push(']');
    }
    push_extras(&mut out, &p.continuous.extra);
    out.push('}');

    out.push(',');
    push_key(&mut out, "summary");
    out.push('{');
    for (i, (key, v)) in p.summary.values().into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        push_key(&mut out, key);
        push_number(&mut out, v);
    }
    push_extras(&mut out, &p.summary.extra);
    out.push('}');

    push_extras(&mut out, &p.extra);
    out.push('}');
    out
}

/// Splits an object into the known keys (in `known` order) and the rest.
fn take_object(
    value: Value,
    path: &str,
    known: &[&str],
    mode: ParseMode,
) -> Result<(Vec<Value>, ExtraFields), PayloadError> {
    let Value::Object(mut map) = value else {
        return Err(PayloadError::schema(path, "expected an object"));
    };
    let mut found = Vec::with_capacity(known.len());
    for key in known {
        let field = join(path, key);
        found.push(
            map.shift_remove(*key)
                .ok_or_else(|| PayloadError::schema(field, "missing"))?,
        );
    }
    let extra = leftovers(map, path, mode)?;
    Ok((found, extra))
}

fn leftovers(
    map: Map<String, Value>,
    path: &str,
    mode: ParseMode,
) -> Result<ExtraFields, PayloadError> {
    match mode {
        ParseMode::Strict => match map.keys().next() {
            Some(k) => Err(PayloadError::schema(join(path, k), "unknown key")),
            None => Ok(Vec::new()),
        },
        ParseMode::Lenient => Ok(map.into_iter().collect()),
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn number(v: &Value, field: &str) -> Result<f64, PayloadError> {
    v.as_f64()
        .ok_or_else(|| PayloadError::schema(field, "expected a number"))
}

fn nullable(v: &Value, field: &str) -> Result<Option<f64>, PayloadError> {
    match v {
        Value::Null => Ok(None),
        v => number(v, field).map(Some),
    }
}

pub fn json_decode_payload(json: &str, mode: ParseMode) -> Result<ExtDataPayload, PayloadError> {
    let root: Value = serde_json::from_str(json).map_err(|e| PayloadError::Json(e.to_string()))?;
    let (top, extra) = take_object(
        root,
        "",
        &[
            "schema",
            "onset_s",
            "duration_s",
            "frame",
            "continuous",
            "summary",
        ],
        mode,
    )?;
    let mut top = top.into_iter();
    let mut next = || top.next().expect("one value per known key");

    let schema = next();
    if schema.as_str() != Some(PAYLOAD_SCHEMA) {
        return Err(PayloadError::schema(
            "schema",
            format!("expected {PAYLOAD_SCHEMA:?}, found {schema}"),
        ));
    }
    let onset_s = number(&next(), "onset_s")?;
    let duration_s = number(&next(), "duration_s")?;

    let (frame_vals, frame_extra) = take_object(next(), "frame", &["hop_s", "count"], mode)?;
    let hop_s = number(&frame_vals[0], "frame.hop_s")?;
    let count = frame_vals[1]
        .as_u64()
        .ok_or_else(|| PayloadError::schema("frame.count", "expected a non-negative integer"))?
        as usize;

    let (tracks, cont_extra) = take_object(next(), "continuous", &CONTINUOUS_KEYS, mode)?;
    let mut continuous = ContinuousTracks {
        extra: cont_extra,
        ..Default::default()
    };
    for ((key, raw), slot) in CONTINUOUS_KEYS
        .iter()
        .zip(tracks)
        .zip(continuous.tracks_mut())
    {
        let field = format!("continuous.{key}");
        let Value::Array(items) = raw else {
            return Err(PayloadError::schema(field, "expected an array"));
        };
        if items.len() != count {
            return Err(PayloadError::schema(
                field,
                format!("length {} does not match frame.count {count}", items.len()),
            ));
        }
        *slot = items
            .iter()
            .map(|v| nullable(v, &field))
            .collect::<Result<_, _>>()?;
    }

    let (values, sum_extra) = take_object(next(), "summary", &SUMMARY_KEYS, mode)?;
    let mut summary = SummaryFields {
        extra: sum_extra,
        ..Default::default()
    };
    for ((key, raw), slot) in SUMMARY_KEYS.iter().zip(&values).zip(summary.values_mut()) {
        *slot = nullable(raw, &format!("summary.{key}"))?;
    }

    Ok(ExtDataPayload {
        onset_s,
        duration_s,
        frame: FrameInfo {
            hop_s,
            count,
            extra: frame_extra,
        },
        continuous,
        summary,
        extra,
    })
}
