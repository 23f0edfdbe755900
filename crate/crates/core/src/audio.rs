//! Mono audio buffers and WAV input.

use std::path::Path;

/// Mono samples, nominally in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

#[derive(Debug, thiserror::Error)]
pub enum AudioError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: hound::Error,
    },
    #[error("{path}: unsupported sample format ({bits}-bit {format})")]
    UnsupportedFormat {
        path: String,
        bits: u16,
        format: &'static str,
    },
    #[error("{path}: unsupported channel count {channels} (mono or stereo only)")]
    UnsupportedChannels { path: String, channels: u16 },
}

impl Audio {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Audio {
            samples,
            sample_rate,
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Sample at `idx`, zero outside the buffer.
    #[inline]
    pub fn sample_or_zero(&self, idx: i64) -> f64 {
        if idx < 0 {
            0.0
        } else {
            self.samples.get(idx as usize).copied().unwrap_or(0.0)
        }
    }

    /// Reads 16-bit PCM or 32-bit float WAV; stereo is averaged to mono.
    pub fn read_wav(path: &Path) -> Result<Audio, AudioError> {
        let path_str = path.display().to_string();
        let read_err = |source| AudioError::Read {
            path: path_str.clone(),
            source,
        };
        let mut reader = hound::WavReader::open(path).map_err(read_err)?;
        let spec = reader.spec();
        if !(1..=2).contains(&spec.channels) {
            return Err(AudioError::UnsupportedChannels {
                path: path_str,
                channels: spec.channels,
            });
        }
        let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
            (hound::SampleFormat::Int, 16) => reader
                .samples::<i16>()
                .map(|s| s.map(|v| v as f64 / 32768.0))
                .collect::<Result<_, _>>()
                .map_err(read_err)?,
            (hound::SampleFormat::Float, 32) => reader
                .samples::<f32>()
                .map(|s| s.map(f64::from))
                .collect::<Result<_, _>>()
                .map_err(read_err)?,
            (fmt, bits) => {
                return Err(AudioError::UnsupportedFormat {
                    path: path_str,
                    bits,
                    format: match fmt {
                        hound::SampleFormat::Int => "int",
                        hound::SampleFormat::Float => "float",
                    },
                })
            }
        };
        let channels = spec.channels as usize;
        let samples = interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect();
        Ok(Audio::new(samples, spec.sample_rate))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stereo_int16_is_mixed_down() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("st.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        for _ in 0..4 {
            w.write_sample(16384i16).unwrap();
            w.write_sample(0i16).unwrap();
        }
        w.finalize().unwrap();
        let audio = Audio::read_wav(&path).unwrap();
        assert_eq!(audio.sample_rate, 8000);
        assert_eq!(audio.samples, vec![0.25; 4]);
    }

    #[test]
    fn float_mono() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 44100,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        w.write_sample(0.5f32).unwrap();
        w.write_sample(-1.0f32).unwrap();
        w.finalize().unwrap();
        let audio = Audio::read_wav(&path).unwrap();
        assert_eq!(audio.samples, vec![0.5, -1.0]);
    }

    #[test]
    fn missing_file_names_path() {
        let err = Audio::read_wav(Path::new("/nonexistent/x.wav")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.wav"));
    }

    #[test]
    fn rejects_24_bit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i24.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 44100,
            bits_per_sample: 24,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        w.write_sample(0i32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(
            Audio::read_wav(&path),
            Err(AudioError::UnsupportedFormat { bits: 24, .. })
        ));
    }
}
