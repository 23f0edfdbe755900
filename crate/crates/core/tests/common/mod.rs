//! Signal synthesis and file helpers shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const SR: u32 = 44_100;

pub fn sine(freq_hz: f64, amp: f64, dur_s: f64) -> Vec<f64> {
    let n = (dur_s * SR as f64).round() as usize;
    (0..n)
        .map(|i| amp * (2.0 * PI * freq_hz * i as f64 / SR as f64).sin())
        .collect()
}

/// Sine whose pitch swings `depth_cents` either side of `center_hz` at `rate_hz`.
pub fn vibrato_sine(
    center_hz: f64,
    rate_hz: f64,
    depth_cents: f64,
    amp: f64,
    dur_s: f64,
) -> Vec<f64> {
    let n = (dur_s * SR as f64).round() as usize;
    let mut phase = 0.0f64;
    (0..n)
        .map(|i| {
            let t = i as f64 / SR as f64;
            let f = center_hz * 2f64.powf(depth_cents / 1200.0 * (2.0 * PI * rate_hz * t).sin());
            let s = amp * phase.sin();
            phase += 2.0 * PI * f / SR as f64;
            s
        })
        .collect()
}

/// Naive (aliased) sawtooth, rich in harmonics.
pub fn sawtooth(freq_hz: f64, amp: f64, dur_s: f64) -> Vec<f64> {
    let n = (dur_s * SR as f64).round() as usize;
    (0..n)
        .map(|i| {
            let x = freq_hz * i as f64 / SR as f64;
            amp * (2.0 * (x - x.floor()) - 1.0)
        })
        .collect()
}

pub fn write_wav_i16(path: &Path, samples: &[f64]) {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SR,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).unwrap();
    for &s in samples {
        w.write_sample((s.clamp(-1.0, 1.0) * 32767.0).round() as i16)
            .unwrap();
    }
    w.finalize().unwrap();
}

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
}

pub fn meiperf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meiperf"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}
