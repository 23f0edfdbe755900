//! Analysis parameters shared by the descriptor and summary stages.

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub sample_rate_hz: u32,
    /// Hann window length in samples.
    pub window_len: usize,
    pub fft_len: usize,
    pub hop_s: f64,
    /// Half-width of the f0 search band around the nominal note frequency.
    pub f0_search_semitones: f64,
    /// Minimum normalized autocorrelation peak for a frame to count as voiced.
    pub voicing_threshold: f64,
    pub vibrato_min_dur_s: f64,
    pub vibrato_band_hz: (f64, f64),
    pub silence_floor_db: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            sample_rate_hz: 44_100,
            window_len: 2048,
            fft_len: 2048,
            hop_s: 0.010,
            f0_search_semitones: 3.0,
            voicing_threshold: 0.3,
            vibrato_min_dur_s: 0.25,
            vibrato_band_hz: (3.0, 9.0),
            silence_floor_db: -120.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid analysis config: {0}")]
pub struct ConfigError(pub String);

impl AnalysisConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError(m));
        if self.sample_rate_hz == 0 {
            return fail("sample rate must be positive".into());
        }
        if self.window_len < 4 {
            return fail(format!("window_len {} too short", self.window_len));
        }
        if self.window_len > self.fft_len {
            return fail(format!(
                "window_len {} exceeds fft_len {}",
                self.window_len, self.fft_len
            ));
        }
        if !(self.hop_s > 0.0) || !self.hop_s.is_finite() {
            return fail(format!("hop_s must be positive, got {}", self.hop_s));
        }
        if !(self.f0_search_semitones > 0.0) {
            return fail("f0_search_semitones must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.voicing_threshold) {
            return fail("voicing_threshold must lie in [0, 1]".into());
        }
        let (lo, hi) = self.vibrato_band_hz;
        let frame_nyquist = 1.0 / (2.0 * self.hop_s);
        if !(0.0 < lo && lo < hi && hi < frame_nyquist) {
            return fail(format!(
                "vibrato band [{lo}, {hi}] must satisfy 0 < low < high < {frame_nyquist}"
            ));
        }
        if !self.silence_floor_db.is_finite() || self.silence_floor_db >= 0.0 {
            return fail("silence_floor_db must be negative".into());
        }
        Ok(())
    }

    /// Hop length in (possibly fractional) samples.
    pub fn hop_samples(&self) -> f64 {
        self.hop_s * self.sample_rate_hz as f64
    }

    pub fn num_bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    pub fn bin_freqs(&self) -> Vec<f64> {
        let sr = self.sample_rate_hz as f64;
        (0..self.num_bins())
            .map(|k| k as f64 * sr / self.fft_len as f64)
            .collect()
    }
}
