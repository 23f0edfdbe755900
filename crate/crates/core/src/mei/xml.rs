use std::collections::HashSet;
use std::fmt::Write as _;

use roxmltree::{Document, Node};

use super::payload::{json_decode_payload, json_encode_payload, ParseMode, PayloadError};
use super::{MeiDocument, ScoreNote, When, MEI_NAMESPACE, MEI_VERSION};
use crate::note::{Accidental, NoteName, PitchName};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeiError {
    #[error("malformed XML at {line}:{column}: {message}")]
    Xml {
        line: u32,
        column: u32,
        message: String,
    },
    #[error("line {line}: {message}")]
    Structure { line: u32, message: String },
    #[error("line {line}: when references missing xml:id \"{id}\"")]
    Link { id: String, line: u32 },
    #[error("note {note_id}: payload is not valid JSON: {message}")]
    Payload { note_id: String, message: String },
    #[error("note {note_id}: payload field `{field}`: {message}")]
    Schema {
        note_id: String,
        field: String,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedMei {
    pub document: MeiDocument,
    /// Problems tolerated in lenient mode.
    pub warnings: Vec<String>,
}

/// `HH:MM:SS.mmm`, rounded to the nearest millisecond.
pub fn format_absolute(seconds: f64) -> String {
    let ms = (seconds.max(0.0) * 1000.0).round() as u64;
    format!(
        "{:02}:{:02}:{:02}.{:03}",
        ms / 3_600_000,
        ms / 60_000 % 60,
        ms / 1000 % 60,
        ms % 1000
    )
}

/// Parses `HH:MM:SS[.fff]`; lenient mode also takes plain decimal seconds.
pub fn parse_absolute(text: &str, mode: ParseMode) -> Option<f64> {
    let text = text.trim();
    let all_digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [h, m, s] => {
            if !all_digits(h) || m.len() != 2 || !all_digits(m) {
                return None;
            }
            let (whole, frac) = s.split_once('.').unwrap_or((s, ""));
            if whole.len() != 2 || !all_digits(whole) || !(frac.is_empty() || all_digits(frac)) {
                return None;
            }
            let (h, m, sec): (f64, f64, f64) = (h.parse().ok()?, m.parse().ok()?, s.parse().ok()?);
            if m >= 60.0 || sec >= 60.0 {
                return None;
            }
            Some(h * 3600.0 + m * 60.0 + sec)
        }
        [secs] if mode == ParseMode::Lenient => secs
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite() && *v >= 0.0),
        _ => None,
    }
}

fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
    out
}

/// Writes `]]>` safely by splitting the CDATA section around it.
fn cdata(s: &str) -> String {
    format!("<![CDATA[{}]]>", s.replace("]]>", "]]]]><![CDATA[>"))
}

pub fn serialize_mei(doc: &MeiDocument) -> String {
    let mut x = String::new();
    let mut line = |indent: usize, text: &str| {
        for _ in 0..indent {
            x.push_str("  ");
        }
        x.push_str(text);
        x.push('\n');
    };
    line(0, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    line(
        0,
        &format!(r#"<mei xmlns="{MEI_NAMESPACE}" meiversion="{MEI_VERSION}">"#),
    );
    line(1, "<meiHead>");
    line(2, "<fileDesc>");
    line(3, "<titleStmt>");
    line(4, "<title>Performance data</title>");
    line(3, "</titleStmt>");
    line(3, "<pubStmt/>");
    line(2, "</fileDesc>");
    line(1, "</meiHead>");
    line(1, "<music>");
    line(2, "<performance>");
    line(3, "<recording>");
    line(
        4,
        &format!(r#"<avFile target="{}"/>"#, escape_attr(&doc.av_target)),
    );
    for w in &doc.whens {
        line(
            4,
            &format!(
                r##"<when absolute="{}" data="#{}">"##,
                format_absolute(w.absolute_s),
                escape_attr(&w.target_id)
            ),
        );
        line(
            5,
            &format!(
                "<extData>{}</extData>",
                cdata(&json_encode_payload(&w.payload))
            ),
        );
        line(4, "</when>");
    }
    line(3, "</recording>");
    line(2, "</performance>");
    line(2, "<body>");
    line(3, "<mdiv>");
    line(4, "<score>");
    line(5, "<scoreDef>");
    line(6, "<staffGrp>");
    line(7, r#"<staffDef n="1" lines="5"/>"#);
    line(6, "</staffGrp>");
    line(5, "</scoreDef>");
    line(5, "<section>");
    line(6, r#"<measure n="1">"#);
    line(7, r#"<staff n="1">"#);
    if doc.notes.is_empty() {
        line(8, r#"<layer n="1"/>"#);
    } else {
        line(8, r#"<layer n="1">"#);
        for n in &doc.notes {
            let mut el = format!(
                r#"<note xml:id="{}" pname="{}" oct="{}""#,
                escape_attr(&n.id),
                n.name.pname.as_str(),
                n.name.octave
            );
            if let Some(code) = n.name.accidental.mei_code() {
                let _ = write!(el, r#" accid.ges="{code}""#);
            }
            el.push_str("/>");
            line(9, &el);
        }
        line(8, "</layer>");
    }
    line(7, "</staff>");
    line(6, "</measure>");
    line(5, "</section>");
    line(4, "</score>");
    line(3, "</mdiv>");
    line(2, "</body>");
    line(1, "</music>");
    line(0, "</mei>");
    x
}

struct Ctx<'a> {
    doc: &'a Document<'a>,
    mode: ParseMode,
    warnings: Vec<String>,
}

impl<'a> Ctx<'a> {
    fn line(&self, node: Node) -> u32 {
        self.doc.text_pos_at(node.range().start).row
    }

    /// Error in strict mode; warning (and `Ok(None)`) in lenient mode.
    fn tolerate<T>(&mut self, node: Node, message: String) -> Result<Option<T>, MeiError> {
        let line = self.line(node);
        match self.mode {
            ParseMode::Strict => Err(MeiError::Structure { line, message }),
            ParseMode::Lenient => {
                self.warnings.push(format!("line {line}: {message}"));
                Ok(None)
            }
        }
    }

    fn structure(&self, node: Node, message: String) -> MeiError {
        MeiError::Structure {
            line: self.line(node),
            message,
        }
    }
}

fn is(node: &Node, name: &str) -> bool {
    node.is_element() && node.tag_name().name() == name
}

fn parse_note(ctx: &mut Ctx, node: Node) -> Result<Option<ScoreNote>, MeiError> {
    let Some(id) = node.attribute((roxmltree::NS_XML_URI, "id")) else {
        return ctx.tolerate(node, "note without xml:id".into());
    };
    let pname = node
        .attribute("pname")
        .and_then(PitchName::parse)
        .ok_or_else(|| ctx.structure(node, format!("note {id}: missing or invalid pname")))?;
    let octave = node
        .attribute("oct")
        .and_then(|o| o.trim().parse::<i32>().ok())
        .ok_or_else(|| ctx.structure(node, format!("note {id}: missing or invalid oct")))?;
    let mut accid = node.attribute("accid.ges");
    if accid.is_none() && ctx.mode == ParseMode::Lenient {
        accid = node.attribute("accid");
    }
    let accidental = match accid {
        None => Accidental::Natural,
        Some(code) => Accidental::from_mei_code(code).ok_or_else(|| {
            ctx.structure(node, format!("note {id}: unsupported accidental {code:?}"))
        })?,
    };
    Ok(Some(ScoreNote {
        id: id.to_string(),
        name: NoteName::new(pname, accidental, octave),
    }))
}

fn parse_when(
    ctx: &mut Ctx,
    node: Node,
    note_ids: &HashSet<&str>,
) -> Result<Option<When>, MeiError> {
    let Some(data) = node.attribute("data") else {
        return ctx.tolerate(node, "when without @data".into());
    };
    let target = match (data.strip_prefix('#'), ctx.mode) {
        (Some(t), _) => t,
        (None, ParseMode::Lenient) => data,
        (None, ParseMode::Strict) => {
            return Err(ctx.structure(node, format!("when @data {data:?} is not a #reference")))
        }
    };
    if !note_ids.contains(target) {
        let line = ctx.line(node);
        return match ctx.mode {
            ParseMode::Strict => Err(MeiError::Link {
                id: target.to_string(),
                line,
            }),
            ParseMode::Lenient => {
                ctx.warnings.push(format!(
                    "line {line}: when references missing xml:id \"{target}\"; dropped"
                ));
                Ok(None)
            }
        };
    }

    let Some(ext) = node.children().find(|c| is(c, "extData")) else {
        return ctx.tolerate(node, format!("when for {target} has no extData"));
    };
    let text: String = ext
        .children()
        .filter(|c| c.is_text())
        .filter_map(|c| c.text())
        .collect();
    let payload = json_decode_payload(text.trim(), ctx.mode).map_err(|e| match e {
        PayloadError::Json(message) => MeiError::Payload {
            note_id: target.to_string(),
            message,
        },
        PayloadError::Schema { field, message } => MeiError::Schema {
            note_id: target.to_string(),
            field,
            message,
        },
    })?;

    let absolute_s = match node.attribute("absolute") {
        Some(a) => parse_absolute(a, ctx.mode).ok_or_else(|| {
            ctx.structure(node, format!("when for {target}: invalid @absolute {a:?}"))
        })?,
        None => match ctx.tolerate::<f64>(node, format!("when for {target} has no @absolute"))? {
            Some(v) => v,
            None => payload.onset_s,
        },
    };

    Ok(Some(When {
        absolute_s,
        target_id: target.to_string(),
        payload,
    }))
}

pub fn parse_mei(xml: &str, mode: ParseMode) -> Result<ParsedMei, MeiError> {
    let doc = Document::parse(xml).map_err(|e| {
        let pos = e.pos();
        MeiError::Xml {
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })?;
    let mut ctx = Ctx {
        doc: &doc,
        mode,
        warnings: Vec::new(),
    };
    let root = doc.root_element();
    if mode == ParseMode::Strict
        && (root.tag_name().name() != "mei" || root.tag_name().namespace() != Some(MEI_NAMESPACE))
    {
        return Err(ctx.structure(root, "root element is not an MEI <mei>".into()));
    }

    let mut notes = Vec::new();
    for body in root.descendants().filter(|n| is(n, "body")) {
        for node in body.descendants().filter(|n| is(n, "note")) {
            if let Some(n) = parse_note(&mut ctx, node)? {
                notes.push(n);
            }
        }
    }

    let av_target = match root
        .descendants()
        .find(|n| is(n, "avFile"))
        .and_then(|n| n.attribute("target"))
    {
        Some(t) => t.to_string(),
        None => ctx
            .tolerate::<String>(root, "no <avFile> with @target".into())?
            .unwrap_or_default(),
    };

    let ids: HashSet<&str> = notes.iter().map(|n: &ScoreNote| n.id.as_str()).collect();
    let mut whens = Vec::new();
    for node in root.descendants().filter(|n| is(n, "when")) {
        if let Some(w) = parse_when(&mut ctx, node, &ids)? {
            whens.push(w);
        }
    }

    let warnings = ctx.warnings;
    Ok(ParsedMei {
        document: MeiDocument {
            notes,
            whens,
            av_target,
        },
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mei::payload::{ExtDataPayload, FrameInfo};
    use crate::note::note_name_from_midi;

    fn payload(onset: f64, count: usize) -> ExtDataPayload {
        let mut p = ExtDataPayload {
            onset_s: onset,
            duration_s: 0.25,
            frame: FrameInfo {
                hop_s: 0.01,
                count,
                extra: vec![],
            },
            ..Default::default()
        };
        p.continuous.f0_hz = vec![Some(440.0); count];
        p.continuous.power_db = vec![Some(-3.0103); count];
        p.continuous.spectral_centroid_hz = vec![Some(452.25); count];
        p.continuous.spectral_flux = vec![Some(0.0); count];
        p.continuous.spectral_slope = vec![Some(-3.2e-7); count];
        p.continuous.spectral_flatness = vec![None; count];
        p.summary.perceived_pitch_hz = Some(440.0);
        p.summary.mean_spectral_flatness = Some(0.02);
        p.canonicalized()
    }

    fn doc(n: usize) -> MeiDocument {
        MeiDocument {
            notes: (0..n)
                .map(|i| ScoreNote {
                    id: format!("note-{:04}", i + 1),
                    name: note_name_from_midi(60 + i as i64).unwrap(),
                })
                .collect(),
            whens: (0..n)
                .map(|i| When {
                    absolute_s: 0.5 + i as f64 * 0.3,
                    target_id: format!("note-{:04}", i + 1),
                    payload: payload(0.5 + i as f64 * 0.3, 3),
                })
                .collect(),
            av_target: "file:///stems/vocals & co.wav".into(),
        }
    }

    #[test]
    fn absolute_format() {
        assert_eq!(format_absolute(0.5), "00:00:00.500");
        assert_eq!(format_absolute(3723.0444), "01:02:03.044");
        assert_eq!(format_absolute(59.9996), "00:01:00.000");
        assert!(
            (parse_absolute("01:02:03.044", ParseMode::Strict).unwrap() - 3723.044).abs() < 1e-9
        );
        assert_eq!(parse_absolute("00:00:07", ParseMode::Strict), Some(7.0));
        assert_eq!(parse_absolute("0.5", ParseMode::Strict), None);
        assert_eq!(parse_absolute("0.5", ParseMode::Lenient), Some(0.5));
        assert_eq!(parse_absolute("00:61:00.000", ParseMode::Strict), None);
        assert_eq!(parse_absolute("garbage", ParseMode::Lenient), None);
    }

    #[test]
    fn note_elements() {
        let mut d = doc(2);
        d.notes[0].name = NoteName::new(PitchName::A, Accidental::Natural, 4);
        d.notes[1].name = NoteName::new(PitchName::A, Accidental::Sharp, 4);
        let xml = serialize_mei(&d);
        assert!(xml.contains(r#"<note xml:id="note-0001" pname="a" oct="4"/>"#));
        assert!(xml.contains(r#"<note xml:id="note-0002" pname="a" oct="4" accid.ges="s"/>"#));
        assert!(xml.contains(r##"<when absolute="00:00:00.500" data="#note-0001">"##));
        assert!(xml.contains("<extData><![CDATA[{\"schema\":"));
        assert!(xml.contains(r#"meiversion="5.0""#));
        assert!(!xml.contains("dur="));
    }

    #[test]
    fn round_trip_and_fixpoint() {
        let d = doc(4);
        let xml = serialize_mei(&d);
        let parsed = parse_mei(&xml, ParseMode::Strict).unwrap();
        assert!(parsed.warnings.is_empty());
        let back = parsed.document;
        assert_eq!(back.notes, d.notes);
        assert_eq!(back.av_target, d.av_target);
        for (a, b) in back.whens.iter().zip(&d.whens) {
            assert!((a.absolute_s - b.absolute_s).abs() <= 1e-3);
            assert_eq!(a.payload, b.payload);
        }
        assert_eq!(serialize_mei(&back), xml);
    }

    #[test]
    fn dangling_reference() {
        let xml = serialize_mei(&doc(2)).replace("data=\"#note-0002\"", "data=\"#ghost\"");
        match parse_mei(&xml, ParseMode::Strict).unwrap_err() {
            MeiError::Link { id, .. } => assert_eq!(id, "ghost"),
            e => panic!("{e:?}"),
        }
        let lenient = parse_mei(&xml, ParseMode::Lenient).unwrap();
        assert_eq!(lenient.document.whens.len(), 1);
        assert_eq!(lenient.warnings.len(), 1);
        assert!(lenient.warnings[0].contains("ghost"));
    }

    #[test]
    fn payload_errors_name_the_note() {
        let d = doc(1);
        let json = json_encode_payload(&d.whens[0].payload);
        let xml = serialize_mei(&d).replace(&json, "not json");
        match parse_mei(&xml, ParseMode::Strict).unwrap_err() {
            MeiError::Payload { note_id, .. } => assert_eq!(note_id, "note-0001"),
            e => panic!("{e:?}"),
        }

        let bad = json.replacen("\"f0_hz\":[440,440,440]", "\"f0_hz\":[440,440]", 1);
        assert_ne!(bad, json);
        let xml = serialize_mei(&d).replace(&json, &bad);
        match parse_mei(&xml, ParseMode::Strict).unwrap_err() {
            MeiError::Schema { note_id, field, .. } => {
                assert_eq!(note_id, "note-0001");
                assert_eq!(field, "continuous.f0_hz");
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn malformed_xml_is_located() {
        let err = parse_mei("<mei>\n<music>\n</mei>", ParseMode::Strict).unwrap_err();
        match err {
            MeiError::Xml { line, .. } => assert_eq!(line, 3),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn lenient_accepts_decimal_seconds() {
        let xml = serialize_mei(&doc(1)).replace("absolute=\"00:00:00.500\"", "absolute=\"0.5\"");
        assert!(parse_mei(&xml, ParseMode::Strict).is_err());
        let p = parse_mei(&xml, ParseMode::Lenient).unwrap();
        assert_eq!(p.document.whens[0].absolute_s, 0.5);
    }

    #[test]
    fn cdata_with_terminator_survives() {
        let mut d = doc(1);
        d.whens[0]
            .payload
            .extra
            .push(("comment".into(), serde_json::Value::String("a]]>b".into())));
        let xml = serialize_mei(&d);
        let back = parse_mei(&xml, ParseMode::Lenient).unwrap().document;
        assert_eq!(back.whens[0].payload, d.whens[0].payload);
    }

    #[test]
    fn split_cdata_is_reassembled() {
        let d = doc(1);
        let json = json_encode_payload(&d.whens[0].payload);
        let (a, b) = json.split_at(20);
        let xml = serialize_mei(&d).replace(
            &format!("<![CDATA[{json}]]>"),
            &format!("<![CDATA[{a}]]><![CDATA[{b}]]>"),
        );
        let back = parse_mei(&xml, ParseMode::Strict).unwrap().document;
        assert_eq!(back.whens[0].payload, d.whens[0].payload);
    }
}
