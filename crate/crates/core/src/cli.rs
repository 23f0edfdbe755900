//! `meiperf` command line: encode, decode, validate, describe.
//!
//! Exit codes: 0 success, 1 I/O or usage error, 2 validation or parse failure.
//! Diagnostics go to stderr; reports and per-note lines go to stdout.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::audio::Audio;
use crate::config::AnalysisConfig;
use crate::descriptors::AnalysisError;
use crate::mei::{
    format_number, json_encode_payload, parse_mei, serialize_mei, validate_document, MeiDocument,
    ParseMode, SUMMARY_KEYS,
};
use crate::pipeline::{describe_notes, encode_document, payloads_to_json, PipelineError};
use crate::transcription::{assign_ids, is_valid_id, read_tony_csv, TranscriptionFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    /// I/O or usage error.
    Failure = 1,
    /// Validation or parse failure.
    Invalid = 2,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "meiperf",
    version,
    about = "Performance descriptors in MEI extData"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Analyse audio against a note CSV and write an MEI file.
    Encode(EncodeArgs),
    /// Extract summaries (and optionally payloads) from an MEI file.
    Decode(DecodeArgs),
    /// Check an MEI file's links and payloads.
    Validate(ValidateArgs),
    /// Write the per-note payloads as a JSON array, without MEI.
    Describe(DescribeArgs),
}

#[derive(clap::Args, Debug)]
struct AnalysisArgs {
    /// WAV file (16-bit PCM or 32-bit float, mono or stereo).
    #[arg(long)]
    audio: PathBuf,
    /// Note CSV with onset_s,frequency_hz,duration_s rows.
    #[arg(long)]
    notes: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Hop between analysis frames, in milliseconds.
    #[arg(long)]
    hop_ms: Option<f64>,
    /// Analysis window length in samples.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, default_value = crate::transcription::DEFAULT_ID_PREFIX)]
    id_prefix: String,
}

#[derive(clap::Args, Debug)]
struct EncodeArgs {
    #[command(flatten)]
    common: AnalysisArgs,
    /// URI recorded in avFile/@target; defaults to the audio path.
    #[arg(long)]
    audio_target: Option<String>,
}

#[derive(clap::Args, Debug)]
struct DecodeArgs {
    #[arg(long)]
    mei: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = DecodeFormat::Csv)]
    format: DecodeFormat,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum DecodeFormat {
    Csv,
    Json,
}

#[derive(clap::Args, Debug)]
struct ValidateArgs {
    #[arg(long)]
    mei: PathBuf,
    /// Drop dangling links with a warning instead of failing.
    #[arg(long)]
    lenient: bool,
}

#[derive(clap::Args, Debug)]
struct DescribeArgs {
    #[command(flatten)]
    common: AnalysisArgs,
}

/// A failed command: exit status plus the message for stderr.
struct Failure(ExitStatus, String);

type CmdResult = Result<ExitStatus, Failure>;

fn io_fail(what: &str, path: &Path, e: std::io::Error) -> Failure {
    Failure(
        ExitStatus::Failure,
        format!("cannot {what} {}: {e}", path.display()),
    )
}

/// Runs the CLI on `args` (including the program name).
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let status = if e.use_stderr() {
                ExitStatus::Failure
            } else {
                ExitStatus::Success
            };
            let rendered = e.render().to_string();
            if status == ExitStatus::Success {
                let _ = write!(stdout, "{rendered}");
            } else {
                let _ = write!(stderr, "{rendered}");
            }
            return status;
        }
    };
    let result = match cli.command {
        Command::Encode(a) => cmd_encode(&a, stdout),
        Command::Decode(a) => cmd_decode(&a),
        Command::Validate(a) => cmd_validate(&a, stdout, stderr),
        Command::Describe(a) => cmd_describe(&a),
    };
    match result {
        Ok(status) => status,
        Err(Failure(status, message)) => {
            let _ = writeln!(stderr, "error: {message}");
            status
        }
    }
}

fn analysis_inputs(
    args: &AnalysisArgs,
) -> Result<(Audio, TranscriptionFile, AnalysisConfig), Failure> {
    if !is_valid_id(&format!("{}0001", args.id_prefix)) {
        return Err(Failure(
            ExitStatus::Failure,
            format!(
                "--id-prefix {:?} does not produce valid XML ids",
                args.id_prefix
            ),
        ));
    }
    let audio =
        Audio::read_wav(&args.audio).map_err(|e| Failure(ExitStatus::Failure, e.to_string()))?;
    let notes = read_tony_csv(&args.notes).map_err(|e| {
        let status = if e.is_validation() {
            ExitStatus::Invalid
        } else {
            ExitStatus::Failure
        };
        Failure(status, e.to_string())
    })?;
    let notes = assign_ids(notes, &args.id_prefix);

    let mut cfg = AnalysisConfig {
        sample_rate_hz: audio.sample_rate,
        ..AnalysisConfig::default()
    };
    if let Some(ms) = args.hop_ms {
        cfg.hop_s = ms / 1000.0;
    }
    if let Some(w) = args.window {
        cfg.window_len = w;
        cfg.fft_len = cfg.fft_len.max(w);
    }
    cfg.validate()
        .map_err(|e| Failure(ExitStatus::Failure, e.to_string()))?;
    Ok((audio, notes, cfg))
}

fn analysis_failure(e: AnalysisError) -> Failure {
    match e {
        AnalysisError::OutOfRange { .. } => Failure(ExitStatus::Invalid, e.to_string()),
        _ => Failure(ExitStatus::Failure, e.to_string()),
    }
}

fn cmd_encode(args: &EncodeArgs, stdout: &mut dyn Write) -> CmdResult {
    let (audio, t, cfg) = analysis_inputs(&args.common)?;
    let target = args
        .audio_target
        .clone()
        .unwrap_or_else(|| args.common.audio.display().to_string());
    let doc = encode_document(&audio, &t.notes, &cfg, &target).map_err(|e| match e {
        PipelineError::Analysis(a) => analysis_failure(a),
        PipelineError::Pitch { .. } => Failure(ExitStatus::Invalid, e.to_string()),
        PipelineError::Build(_) => Failure(ExitStatus::Failure, e.to_string()),
    })?;
    std::fs::write(&args.common.out, serialize_mei(&doc))
        .map_err(|e| io_fail("write", &args.common.out, e))?;

    for (note, when) in doc.notes.iter().zip(&doc.whens) {
        let pitch = when
            .payload
            .summary
            .perceived_pitch_hz
            .map_or_else(|| "-".to_string(), |p| format!("{p:.2} Hz"));
        let _ = writeln!(
            stdout,
            "{}\t{}\t{:.3} s\t{}",
            note.id, note.name, when.payload.onset_s, pitch
        );
    }
    Ok(ExitStatus::Success)
}

fn cmd_describe(args: &DescribeArgs) -> CmdResult {
    let (audio, t, cfg) = analysis_inputs(&args.common)?;
    let payloads = describe_notes(&audio, &t.notes, &cfg).map_err(analysis_failure)?;
    std::fs::write(&args.common.out, payloads_to_json(&payloads))
        .map_err(|e| io_fail("write", &args.common.out, e))?;
    Ok(ExitStatus::Success)
}

fn read_document(path: &Path, mode: ParseMode) -> Result<(MeiDocument, Vec<String>), Failure> {
    let xml = std::fs::read_to_string(path).map_err(|e| io_fail("read", path, e))?;
    let parsed = parse_mei(&xml, mode)
        .map_err(|e| Failure(ExitStatus::Invalid, format!("{}: {e}", path.display())))?;
    Ok((parsed.document, parsed.warnings))
}

/// Header of `summary.csv`.
pub fn summary_csv_header() -> String {
    let mut cols = vec![
        "id",
        "pname",
        "accidental",
        "octave",
        "onset_s",
        "duration_s",
    ];
    cols.extend(SUMMARY_KEYS);
    cols.join(",")
}

/// One `summary.csv` row per note; notes without a performance record get empty cells.
pub fn summary_csv(doc: &MeiDocument) -> String {
    let cell = |v: Option<f64>| v.and_then(format_number).unwrap_or_default();
    let mut out = summary_csv_header();
    out.push('\n');
    for note in &doc.notes {
        let when = doc.whens.iter().find(|w| w.target_id == note.id);
        let _ = write!(
            out,
            "{},{},{},{}",
            note.id,
            note.name.pname.as_str(),
            note.name.accidental.as_str(),
            note.name.octave
        );
        let payload = when.map(|w| &w.payload);
        for v in [payload.map(|p| p.onset_s), payload.map(|p| p.duration_s)] {
            let _ = write!(out, ",{}", cell(v));
        }
        match payload {
            Some(p) => {
                for (_, v) in p.summary.values() {
                    let _ = write!(out, ",{}", cell(v));
                }
            }
            None => out.push_str(&",".repeat(SUMMARY_KEYS.len())),
        }
        out.push('\n');
    }
    out
}

fn cmd_decode(args: &DecodeArgs) -> CmdResult {
    let (doc, _) = read_document(&args.mei, ParseMode::Strict)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| io_fail("create", &args.out_dir, e))?;
    let csv_path = args.out_dir.join("summary.csv");
    std::fs::write(&csv_path, summary_csv(&doc)).map_err(|e| io_fail("write", &csv_path, e))?;
    if args.format == DecodeFormat::Json {
        for w in &doc.whens {
            let path = args.out_dir.join(format!("{}.json", w.target_id));
            std::fs::write(&path, json_encode_payload(&w.payload))
                .map_err(|e| io_fail("write", &path, e))?;
        }
    }
    Ok(ExitStatus::Success)
}

fn cmd_validate(args: &ValidateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    let mode = if args.lenient {
        ParseMode::Lenient
    } else {
        ParseMode::Strict
    };
    let (doc, warnings) = read_document(&args.mei, mode)?;
    for w in &warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    let report = validate_document(&doc);
    for v in &report {
        let _ = writeln!(stdout, "{v}");
    }
    let _ = writeln!(
        stderr,
        "{}: {} notes, {} whens, {} violation(s)",
        args.mei.display(),
        doc.notes.len(),
        doc.whens.len(),
        report.len()
    );
    Ok(if report.is_empty() {
        ExitStatus::Success
    } else {
        ExitStatus::Invalid
    })
}
