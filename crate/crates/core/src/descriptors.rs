//! Frame-wise continuous descriptors over a note's time-frequency region.
//!
//! Each note is cut into frames spaced by `hop_s`, the first centred half a
//! hop after the onset. Every frame yields six values: f0, power, spectral
//! centroid, flux, slope and flatness. Spectra come from a Hann-windowed
//! frame of `window_len` samples centred on the frame time, zero-padded where
//! the window hangs over either end of the file.
//!
//! The f0 estimator is a normalized autocorrelation restricted to lags whose
//! frequency lies within `f0_search_semitones` of the note's nominal pitch,
//! so octave errors outside that band cannot occur.

use std::f64::consts::PI;
use std::sync::Arc;

use realfft::{RealFftPlanner, RealToComplex};

use crate::audio::Audio;
use crate::config::{AnalysisConfig, ConfigError};
use crate::transcription::TranscribedNote;

/// Slack when checking that a note ends inside the audio.
const REGION_TOLERANCE_S: f64 = 1e-6;
/// Guards frame-centre rounding against float noise so that whole-hop shifts
/// land on the same sample offsets.
const CENTER_EPS: f64 = 1e-7;
/// Relative floor applied to power bins before the geometric mean.
const FLATNESS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameGrid {
    pub note_id: String,
    pub frame_times_s: Vec<f64>,
    pub hop_s: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorFrameSeries {
    pub grid: FrameGrid,
    /// `None` for unvoiced frames.
    pub f0_hz: Vec<Option<f64>>,
    pub power_db: Vec<f64>,
    /// Spectral tracks are `None` where the frame spectrum is all zero.
    pub spectral_centroid_hz: Vec<Option<f64>>,
    pub spectral_flux: Vec<Option<f64>>,
    pub spectral_slope: Vec<Option<f64>>,
    pub spectral_flatness: Vec<Option<f64>>,
}

impl DescriptorFrameSeries {
    pub fn len(&self) -> usize {
        self.grid.count
    }

    pub fn is_empty(&self) -> bool {
        self.grid.count == 0
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("note {note_id}: region [{onset_s}, {end_s}] s lies outside audio of {audio_s} s")]
    OutOfRange {
        note_id: String,
        onset_s: f64,
        end_s: f64,
        audio_s: f64,
    },
    #[error("audio sample rate {audio} Hz does not match configured {config} Hz")]
    SampleRateMismatch { audio: u32, config: u32 },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

fn check_inputs(audio: &Audio, cfg: &AnalysisConfig) -> Result<(), AnalysisError> {
    cfg.validate()?;
    if audio.sample_rate != cfg.sample_rate_hz {
        return Err(AnalysisError::SampleRateMismatch {
            audio: audio.sample_rate,
            config: cfg.sample_rate_hz,
        });
    }
    Ok(())
}

pub fn frame_note(
    audio: &Audio,
    note: &TranscribedNote,
    cfg: &AnalysisConfig,
) -> Result<FrameGrid, AnalysisError> {
    let end = note.onset_s + note.duration_s;
    let audio_s = audio.duration_s();
    if note.onset_s < 0.0 || note.onset_s >= audio_s || end > audio_s + REGION_TOLERANCE_S {
        return Err(AnalysisError::OutOfRange {
            note_id: note.id.clone(),
            onset_s: note.onset_s,
            end_s: end,
            audio_s,
        });
    }
    let hop = cfg.hop_s;
    let frame_times_s: Vec<f64> = if note.duration_s < hop {
        vec![note.onset_s + note.duration_s / 2.0]
    } else {
        // centres at onset + (i + 1/2) hop strictly before the note end
        let count = (note.duration_s / hop - 0.5 - 1e-9).ceil().max(1.0) as usize;
        (0..count)
            .map(|i| note.onset_s + (i as f64 + 0.5) * hop)
            .collect()
    };
    Ok(FrameGrid {
        note_id: note.id.clone(),
        count: frame_times_s.len(),
        frame_times_s,
        hop_s: hop,
    })
}

/// Window-length frame of raw samples centred on `center_s`.
fn raw_frame(audio: &Audio, center_s: f64, window_len: usize) -> Vec<f64> {
    let center = (center_s * audio.sample_rate as f64 + CENTER_EPS).floor() as i64;
    let start = center - (window_len / 2) as i64;
    (0..window_len as i64)
        .map(|n| audio.sample_or_zero(start + n))
        .collect()
}

/// Reusable window and FFT plan for one configuration.
pub struct FrameAnalyzer {
    cfg: AnalysisConfig,
    window: Vec<f64>,
    window_power: f64,
    bin_freqs: Vec<f64>,
    fft: Arc<dyn RealToComplex<f64>>,
}

impl FrameAnalyzer {
    pub fn new(cfg: &AnalysisConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let window = hann_window(cfg.window_len);
        let window_power = window.iter().map(|w| w * w).sum();
        let fft = RealFftPlanner::<f64>::new().plan_fft_forward(cfg.fft_len);
        Ok(FrameAnalyzer {
            cfg: cfg.clone(),
            window,
            window_power,
            bin_freqs: cfg.bin_freqs(),
            fft,
        })
    }

    pub fn config(&self) -> &AnalysisConfig {
        &self.cfg
    }

    pub fn bin_freqs(&self) -> &[f64] {
        &self.bin_freqs
    }

    pub fn spectrum(&self, audio: &Audio, center_s: f64) -> Vec<f64> {
        let frame = raw_frame(audio, center_s, self.cfg.window_len);
        let mut input = self.fft.make_input_vec();
        for ((dst, x), w) in input.iter_mut().zip(&frame).zip(&self.window) {
            *dst = x * w;
        }
        let mut output = self.fft.make_output_vec();
        self.fft
            .process(&mut input, &mut output)
            .expect("buffer sizes come from the plan");
        output.iter().map(|c| c.norm()).collect()
    }

    pub fn power_db(&self, audio: &Audio, center_s: f64) -> f64 {
        let frame = raw_frame(audio, center_s, self.cfg.window_len);
        let weighted: f64 = frame
            .iter()
            .zip(&self.window)
            .map(|(x, w)| (w * x) * (w * x))
            .sum();
        let mean_sq = weighted / self.window_power;
        if mean_sq > 0.0 {
            (10.0 * mean_sq.log10()).max(self.cfg.silence_floor_db)
        } else {
            self.cfg.silence_floor_db
        }
    }

    pub fn f0(&self, audio: &Audio, center_s: f64, nominal_f0_hz: f64) -> Option<f64> {
        let frame = raw_frame(audio, center_s, self.cfg.window_len);
        let sr = self.cfg.sample_rate_hz as f64;
        let ratio = 2f64.powf(self.cfg.f0_search_semitones / 12.0);
        let (f_lo, f_hi) = (nominal_f0_hz / ratio, nominal_f0_hz * ratio);
        let (lag_min, lag_max) = (sr / f_hi, sr / f_lo);
        let n = frame.len();
        let first = (lag_min.ceil() as usize).max(2);
        let last = (lag_max.floor() as usize).min(n / 2);
        if first > last {
            return None;
        }

        // prefix sums of squares for the overlap energies
        let mut cum = Vec::with_capacity(n + 1);
        cum.push(0.0);
        for x in &frame {
            cum.push(cum.last().unwrap() + x * x);
        }
        let nacf = |lag: usize| -> f64 {
            let m = n - lag;
            let dot: f64 = frame[..m]
                .iter()
                .zip(&frame[lag..])
                .map(|(a, b)| a * b)
                .sum();
            let e1 = cum[m];
            let e2 = cum[n] - cum[lag];
            let denom = (e1 * e2).sqrt();
            if denom > 0.0 {
                dot / denom
            } else {
                0.0
            }
        };

        let r: Vec<f64> = (first - 1..=last + 1).map(nacf).collect();
        let mut best: Option<(usize, f64)> = None;
        for i in 1..r.len() - 1 {
            if r[i] >= r[i - 1] && r[i] >= r[i + 1] && best.is_none_or(|(_, v)| r[i] > v) {
                best = Some((i, r[i]));
            }
        }
        let (i, peak) = best?;
        if peak < self.cfg.voicing_threshold {
            return None;
        }
        let (a, b, c) = (r[i - 1], r[i], r[i + 1]);
        let curvature = a - 2.0 * b + c;
        let delta = if curvature < 0.0 {
            0.5 * (a - c) / curvature
        } else {
            0.0
        };
        let lag = ((first - 1 + i) as f64 + delta).clamp(lag_min, lag_max);
        Some(sr / lag)
    }

    pub fn analyze(
        &self,
        audio: &Audio,
        note: &TranscribedNote,
    ) -> Result<DescriptorFrameSeries, AnalysisError> {
        check_inputs(audio, &self.cfg)?;
        let grid = frame_note(audio, note, &self.cfg)?;
        let n = grid.count;
        let mut series = DescriptorFrameSeries {
            f0_hz: Vec::with_capacity(n),
            power_db: Vec::with_capacity(n),
            spectral_centroid_hz: Vec::with_capacity(n),
            spectral_flux: Vec::with_capacity(n),
            spectral_slope: Vec::with_capacity(n),
            spectral_flatness: Vec::with_capacity(n),
            grid,
        };
        let mut prev: Option<Vec<f64>> = None;
        for &t in &series.grid.frame_times_s {
            let spec = self.spectrum(audio, t);
            let silent = spec.iter().all(|&m| m == 0.0);
            let power_spec: Vec<f64> = spec.iter().map(|m| m * m).collect();

            series.f0_hz.push(self.f0(audio, t, note.nominal_f0_hz));
            series.power_db.push(self.power_db(audio, t));
            series
                .spectral_centroid_hz
                .push(spectral_centroid(&spec, &self.bin_freqs));
            series.spectral_flux.push(if silent {
                None
            } else {
                Some(spectral_flux(&spec, prev.as_deref()))
            });
            series
                .spectral_slope
                .push(spectral_slope(&spec, &self.bin_freqs));
            series
                .spectral_flatness
                .push(spectral_flatness(&power_spec));
            prev = Some(spec);
        }
        Ok(series)
    }
}

pub fn frame_spectrum(
    audio: &Audio,
    center_s: f64,
    cfg: &AnalysisConfig,
) -> Result<Vec<f64>, AnalysisError> {
    check_inputs(audio, cfg)?;
    Ok(FrameAnalyzer::new(cfg)?.spectrum(audio, center_s))
}

pub fn frame_power_db(
    audio: &Audio,
    center_s: f64,
    cfg: &AnalysisConfig,
) -> Result<f64, AnalysisError> {
    check_inputs(audio, cfg)?;
    Ok(FrameAnalyzer::new(cfg)?.power_db(audio, center_s))
}

pub fn track_f0(
    audio: &Audio,
    note: &TranscribedNote,
    grid: &FrameGrid,
    cfg: &AnalysisConfig,
) -> Result<Vec<Option<f64>>, AnalysisError> {
    check_inputs(audio, cfg)?;
    let analyzer = FrameAnalyzer::new(cfg)?;
    Ok(grid
        .frame_times_s
        .iter()
        .map(|&t| analyzer.f0(audio, t, note.nominal_f0_hz))
        .collect())
}

pub fn analyze_note(
    audio: &Audio,
    note: &TranscribedNote,
    cfg: &AnalysisConfig,
) -> Result<DescriptorFrameSeries, AnalysisError> {
    FrameAnalyzer::new(cfg)?.analyze(audio, note)
}

/// Magnitude-weighted mean frequency.
pub fn spectral_centroid(spectrum: &[f64], bin_freqs: &[f64]) -> Option<f64> {
    let total: f64 = spectrum.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let weighted: f64 = spectrum.iter().zip(bin_freqs).map(|(m, f)| m * f).sum();
    Some(weighted / total)
}

fn l1_normalized(spectrum: &[f64]) -> Vec<f64> {
    let total: f64 = spectrum.iter().sum();
    if total > 0.0 {
        spectrum.iter().map(|m| m / total).collect()
    } else {
        vec![0.0; spectrum.len()]
    }
}

/// L2 distance between L1-normalized spectra; 0 without a previous frame.
pub fn spectral_flux(spectrum: &[f64], prev: Option<&[f64]>) -> f64 {
    let Some(prev) = prev else {
        return 0.0;
    };
    debug_assert_eq!(spectrum.len(), prev.len());
    let cur = l1_normalized(spectrum);
    let old = l1_normalized(prev);
    cur.iter()
        .zip(&old)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Least-squares slope of the L1-normalized magnitudes against frequency.
pub fn spectral_slope(spectrum: &[f64], bin_freqs: &[f64]) -> Option<f64> {
    if spectrum.len() < 2 {
        return None;
    }
    let p = l1_normalized(spectrum);
    if p.iter().all(|&v| v == 0.0) {
        return None;
    }
    let k = p.len() as f64;
    let f_mean = bin_freqs.iter().sum::<f64>() / k;
    let p_mean = p.iter().sum::<f64>() / k;
    let (mut cov, mut var) = (0.0, 0.0);
    for (pi, fi) in p.iter().zip(bin_freqs) {
        let df = fi - f_mean;
        cov += df * (pi - p_mean);
        var += df * df;
    }
    Some(cov / var)
}

/// Geometric over arithmetic mean of a power spectrum.
pub fn spectral_flatness(power: &[f64]) -> Option<f64> {
    let max = power.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0) {
        return None;
    }
    let floor = FLATNESS_FLOOR * max;
    let n = power.len() as f64;
    let log_mean = power.iter().map(|&p| p.max(floor).ln()).sum::<f64>() / n;
    let arith = power.iter().sum::<f64>() / n;
    Some((log_mean.exp() / arith).clamp(0.0, 1.0))
}
