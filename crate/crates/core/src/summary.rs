//! Per-note summary descriptors computed from the continuous tracks.
//!
//! Jitter and shimmer are frame-wise measures (mean absolute change between
//! adjacent frames relative to the mean), not period-level ones. Shimmer is
//! computed on linear amplitude derived from the frame power.

use std::f64::consts::PI;

use crate::config::AnalysisConfig;
use crate::descriptors::{DescriptorFrameSeries, FrameGrid};
use crate::note::A4_HZ;

/// Longest run of unvoiced frames bridged by interpolation inside a vibrato span.
pub const MAX_VIBRATO_GAP_FRAMES: usize = 3;
/// Vibrato shallower than this is not reported.
pub const MIN_VIBRATO_DEPTH_CENTS: f64 = 10.0;
/// Points per DFT bin in the fine peak search.
const VIBRATO_REFINE_STEPS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct NoteSummary {
    pub perceived_pitch_hz: Option<f64>,
    pub jitter: Option<f64>,
    pub vibrato_rate_hz: Option<f64>,
    pub vibrato_depth_cents: Option<f64>,
    pub mean_power_db: f64,
    pub shimmer: Option<f64>,
    pub mean_spectral_centroid_hz: Option<f64>,
    pub mean_spectral_flux: Option<f64>,
    pub mean_spectral_slope: Option<f64>,
    pub mean_spectral_flatness: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vibrato {
    pub rate_hz: f64,
    pub depth_cents: f64,
}

fn cents_re_a4(f: f64) -> f64 {
    1200.0 * (f / A4_HZ).log2()
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Mean of the voiced frames taken in cents, returned in Hz.
pub fn perceived_pitch(f0_track: &[Option<f64>]) -> Option<f64> {
    let voiced: Vec<f64> = f0_track.iter().flatten().copied().collect();
    if voiced.len() < 2 {
        return None;
    }
    let c = mean(voiced.iter().map(|&f| cents_re_a4(f)))?;
    Some(A4_HZ * 2f64.powf(c / 1200.0))
}

/// Mean absolute difference over adjacent pairs, relative to the mean value.
fn relative_mean_abs_diff(track: &[Option<f64>]) -> Option<f64> {
    let diffs: Vec<f64> = track
        .windows(2)
        .filter_map(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) => Some((b - a).abs()),
            _ => None,
        })
        .collect();
    if diffs.is_empty() {
        return None;
    }
    let level = mean(track.iter().flatten().copied())?;
    if !(level > 0.0) {
        return None;
    }
    Some(mean(diffs)? / level)
}

pub fn jitter(f0_track: &[Option<f64>]) -> Option<f64> {
    relative_mean_abs_diff(f0_track)
}

/// Frames at or below `silence_floor_db` are excluded.
pub fn shimmer(power_track_db: &[f64], silence_floor_db: f64) -> Option<f64> {
    let amps: Vec<Option<f64>> = power_track_db
        .iter()
        .map(|&db| (db > silence_floor_db).then(|| 10f64.powf(db / 20.0)))
        .collect();
    if amps.iter().flatten().count() < 2 {
        return None;
    }
    relative_mean_abs_diff(&amps)
}

/// Magnitude of the DFT of `x` at `freq_hz`, sampled every `hop_s`.
fn dft_magnitude(x: &[f64], hop_s: f64, freq_hz: f64) -> f64 {
    let w = 2.0 * PI * freq_hz * hop_s;
    let (mut re, mut im) = (0.0, 0.0);
    for (n, v) in x.iter().enumerate() {
        let ang = w * n as f64;
        re += v * ang.cos();
        im -= v * ang.sin();
    }
    (re * re + im * im).sqrt()
}

/// Removes the least-squares line from `x`.
fn detrend(x: &mut [f64]) {
    let n = x.len() as f64;
    let t_mean = (n - 1.0) / 2.0;
    let x_mean = x.iter().sum::<f64>() / n;
    let (mut cov, mut var) = (0.0, 0.0);
    for (i, v) in x.iter().enumerate() {
        let dt = i as f64 - t_mean;
        cov += dt * (v - x_mean);
        var += dt * dt;
    }
    let slope = if var > 0.0 { cov / var } else { 0.0 };
    for (i, v) in x.iter_mut().enumerate() {
        *v -= x_mean + slope * (i as f64 - t_mean);
    }
}

/// Rate and depth of the dominant f0 modulation inside the vibrato band.
///
/// The voiced span must last at least `vibrato_min_dur_s` and may contain
/// unvoiced gaps of up to [`MAX_VIBRATO_GAP_FRAMES`], which are bridged
/// linearly. The cents trace is detrended and its DFT searched for the
/// strongest peak in `vibrato_band_hz`; the peak is refined on a fine
/// frequency grid. Depth is the sinusoid amplitude `2|X|/N` in cents.
pub fn vibrato(
    f0_track: &[Option<f64>],
    grid: &FrameGrid,
    cfg: &AnalysisConfig,
) -> Option<Vibrato> {
    let first = f0_track.iter().position(Option::is_some)?;
    let last = f0_track.iter().rposition(Option::is_some)?;
    let span = &f0_track[first..=last];
    let n = span.len();
    if n < 2 || n as f64 * grid.hop_s < cfg.vibrato_min_dur_s - 1e-9 {
        return None;
    }

    let mut cents: Vec<f64> = Vec::with_capacity(n);
    let mut gap_start: Option<usize> = None;
    for (i, f) in span.iter().enumerate() {
        match f {
            None => {
                gap_start.get_or_insert(i);
            }
            Some(f) => {
                let c = cents_re_a4(*f);
                if let Some(g) = gap_start.take() {
                    let gap = i - g;
                    if gap > MAX_VIBRATO_GAP_FRAMES {
                        return None;
                    }
                    let left = cents[g - 1];
                    for k in 1..=gap {
                        cents.push(left + (c - left) * k as f64 / (gap + 1) as f64);
                    }
                }
                cents.push(c);
            }
        }
    }
    detrend(&mut cents);

    let (lo, hi) = cfg.vibrato_band_hz;
    let bin_hz = 1.0 / (n as f64 * grid.hop_s);
    let k_lo = (lo / bin_hz).ceil() as usize;
    let k_hi = (hi / bin_hz).floor() as usize;
    // coarse search on DFT bins, or on the band centre when no bin falls inside
    let coarse = if k_lo <= k_hi {
        (k_lo..=k_hi).map(|k| k as f64 * bin_hz).max_by(|a, b| {
            dft_magnitude(&cents, grid.hop_s, *a).total_cmp(&dft_magnitude(&cents, grid.hop_s, *b))
        })?
    } else {
        (lo + hi) / 2.0
    };

    let f_start = (coarse - bin_hz).max(lo);
    let f_end = (coarse + bin_hz).min(hi);
    let steps = 2 * VIBRATO_REFINE_STEPS;
    let step = (f_end - f_start) / steps as f64;
    let mut best = (coarse, dft_magnitude(&cents, grid.hop_s, coarse));
    for i in 0..=steps {
        let f = f_start + step * i as f64;
        let m = dft_magnitude(&cents, grid.hop_s, f);
        if m > best.1 {
            best = (f, m);
        }
    }
    // parabolic touch-up around the grid maximum
    let (f, m) = best;
    if step > 0.0 && f - step >= lo && f + step <= hi {
        let a = dft_magnitude(&cents, grid.hop_s, f - step);
        let c = dft_magnitude(&cents, grid.hop_s, f + step);
        let curvature = a - 2.0 * m + c;
        if curvature < 0.0 {
            let delta = 0.5 * (a - c) / curvature;
            let refined = f + delta * step;
            let rm = dft_magnitude(&cents, grid.hop_s, refined);
            if rm >= m {
                best = (refined, rm);
            }
        }
    }

    let depth = 2.0 * best.1 / n as f64;
    if depth < MIN_VIBRATO_DEPTH_CENTS {
        return None;
    }
    Some(Vibrato {
        rate_hz: best.0.clamp(lo, hi),
        depth_cents: depth,
    })
}

/// 10·log10 of the mean linear power, floored at the silence level.
pub fn mean_power_db(power_track_db: &[f64], silence_floor_db: f64) -> f64 {
    if power_track_db.iter().all(|&p| p <= silence_floor_db) {
        return silence_floor_db;
    }
    let lin = mean(power_track_db.iter().map(|&p| 10f64.powf(p / 10.0))).unwrap_or(0.0);
    (10.0 * lin.log10()).max(silence_floor_db)
}

fn mean_defined(track: &[Option<f64>]) -> Option<f64> {
    mean(track.iter().flatten().copied())
}

pub fn summarize_note(series: &DescriptorFrameSeries, cfg: &AnalysisConfig) -> NoteSummary {
    let vib = vibrato(&series.f0_hz, &series.grid, cfg);
    NoteSummary {
        perceived_pitch_hz: perceived_pitch(&series.f0_hz),
        jitter: jitter(&series.f0_hz),
        vibrato_rate_hz: vib.map(|v| v.rate_hz),
        vibrato_depth_cents: vib.map(|v| v.depth_cents),
        mean_power_db: mean_power_db(&series.power_db, cfg.silence_floor_db),
        shimmer: shimmer(&series.power_db, cfg.silence_floor_db),
        mean_spectral_centroid_hz: mean_defined(&series.spectral_centroid_hz),
        mean_spectral_flux: mean_defined(&series.spectral_flux),
        mean_spectral_slope: mean_defined(&series.spectral_slope),
        mean_spectral_flatness: mean_defined(&series.spectral_flatness),
    }
}
