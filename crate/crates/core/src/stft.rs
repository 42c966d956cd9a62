//! Causal streaming STFT analysis and overlap-add synthesis.
//!
//! Each call consumes exactly one hop of new samples per channel and yields
//! one spectral frame. Analysis and synthesis both use a periodic square-root
//! Hann window; at 50% overlap the squared window sums to one, so an
//! unmodified spectrum comes back out delayed by `window_len - hop` samples.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StftError {
    #[error("expected {expected} channels, got {actual}")]
    ChannelMismatch { expected: usize, actual: usize },
    #[error("expected {expected} samples per channel, got {actual}")]
    HopLengthMismatch { expected: usize, actual: usize },
    #[error("expected {expected} frequency bins, got {actual}")]
    BinCountMismatch { expected: usize, actual: usize },
    #[error("invalid STFT configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window_len: 256,
            hop: 128,
            sample_rate: 16_000,
        }
    }
}

impl StftConfig {
    pub fn n_bins(&self) -> usize {
        self.window_len / 2 + 1
    }

    /// Delay between a sample entering analysis and leaving synthesis.
    pub fn latency_samples(&self) -> usize {
        self.window_len - self.hop
    }

    pub fn frame_rate(&self) -> f64 {
        self.sample_rate as f64 / self.hop as f64
    }

    /// Only the 50% overlap sqrt-Hann pair is implemented.
    pub fn validate(&self) -> Result<(), StftError> {
        if self.window_len < 4 || !self.window_len.is_multiple_of(2) {
            return Err(StftError::InvalidConfig(format!(
                "window_len {} must be even and >= 4",
                self.window_len
            )));
        }
        if self.hop * 2 != self.window_len {
            return Err(StftError::InvalidConfig(format!(
                "hop {} must be half of window_len {}",
                self.hop, self.window_len
            )));
        }
        if self.sample_rate == 0 {
            return Err(StftError::InvalidConfig(
                "sample_rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Periodic square-root Hann window.
pub fn sqrt_hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| (0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos()).sqrt())
        .collect()
}

/// One STFT time bin: `channels x bins` complex values, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFrame {
    channels: usize,
    bins: usize,
    data: Vec<Complex64>,
}

impl SpectralFrame {
    pub fn zeros(channels: usize, bins: usize) -> Self {
        Self {
            channels,
            bins,
            data: vec![Complex64::new(0.0, 0.0); channels * bins],
        }
    }

    pub fn from_channels(channels: Vec<Vec<Complex64>>) -> Self {
        let m = channels.len();
        let f = channels.first().map_or(0, Vec::len);
        assert!(channels.iter().all(|c| c.len() == f), "ragged channels");
        Self {
            channels: m,
            bins: f,
            data: channels.into_iter().flatten().collect(),
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    #[inline]
    pub fn get(&self, channel: usize, bin: usize) -> Complex64 {
        self.data[channel * self.bins + bin]
    }

    #[inline]
    pub fn set(&mut self, channel: usize, bin: usize, value: Complex64) {
        self.data[channel * self.bins + bin] = value;
    }

    pub fn channel(&self, channel: usize) -> &[Complex64] {
        &self.data[channel * self.bins..(channel + 1) * self.bins]
    }

    pub fn channel_mut(&mut self, channel: usize) -> &mut [Complex64] {
        &mut self.data[channel * self.bins..(channel + 1) * self.bins]
    }

    /// All channels at one frequency bin.
    pub fn bin_vector(&self, bin: usize) -> Vec<Complex64> {
        (0..self.channels).map(|k| self.get(k, bin)).collect()
    }

    pub fn bin_vector_into(&self, bin: usize, out: &mut [Complex64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.get(k, bin);
        }
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.is_finite())
    }
}

/// Multichannel streaming analysis.
pub struct Analyzer {
    config: StftConfig,
    channels: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    buffers: Vec<Vec<f64>>,
    work: Vec<Complex64>,
    scratch: Vec<Complex64>,
    frame_index: u64,
}

impl Analyzer {
    pub fn new(config: StftConfig, channels: usize) -> Result<Self, StftError> {
        config.validate()?;
        let fft = FftPlanner::new().plan_fft_forward(config.window_len);
        let scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        Ok(Self {
            config,
            channels,
            window: sqrt_hann(config.window_len),
            fft,
            buffers: vec![vec![0.0; config.window_len]; channels],
            work: vec![Complex64::new(0.0, 0.0); config.window_len],
            scratch,
            frame_index: 0,
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn frame_index(&self) -> u64 {
        self.frame_index
    }

    /// Pushes one hop of samples per channel and returns the new frame.
    pub fn analyze<S: AsRef<[f64]>>(&mut self, hop: &[S]) -> Result<SpectralFrame, StftError> {
        let mut frame = SpectralFrame::zeros(self.channels, self.config.n_bins());
        self.analyze_into(hop, &mut frame)?;
        Ok(frame)
    }

    pub fn analyze_into<S: AsRef<[f64]>>(
        &mut self,
        hop: &[S],
        frame: &mut SpectralFrame,
    ) -> Result<(), StftError> {
        if hop.len() != self.channels {
            return Err(StftError::ChannelMismatch {
                expected: self.channels,
                actual: hop.len(),
            });
        }
        let h = self.config.hop;
        if let Some(bad) = hop.iter().find(|s| s.as_ref().len() != h) {
            return Err(StftError::HopLengthMismatch {
                expected: h,
                actual: bad.as_ref().len(),
            });
        }
        let bins = self.config.n_bins();
        if frame.channels != self.channels || frame.bins != bins {
            *frame = SpectralFrame::zeros(self.channels, bins);
        }
        for (ch, samples) in hop.iter().enumerate() {
            let buf = &mut self.buffers[ch];
            buf.copy_within(h.., 0);
            let n = buf.len();
            buf[n - h..].copy_from_slice(samples.as_ref());
            for ((w, &x), &win) in self.work.iter_mut().zip(buf.iter()).zip(&self.window) {
                *w = Complex64::new(x * win, 0.0);
            }
            self.fft
                .process_with_scratch(&mut self.work, &mut self.scratch);
            frame.channel_mut(ch).copy_from_slice(&self.work[..bins]);
        }
        self.frame_index += 1;
        Ok(())
    }

    pub fn reset(&mut self) {
        for b in &mut self.buffers {
            b.fill(0.0);
        }
        self.frame_index = 0;
    }
}

/// Single-channel inverse transform with overlap-add.
pub struct Synthesizer {
    config: StftConfig,
    window: Vec<f64>,
    ifft: Arc<dyn Fft<f64>>,
    accumulator: Vec<f64>,
    work: Vec<Complex64>,
    scratch: Vec<Complex64>,
    frame_index: u64,
}

impl Synthesizer {
    pub fn new(config: StftConfig) -> Result<Self, StftError> {
        config.validate()?;
        let ifft = FftPlanner::new().plan_fft_inverse(config.window_len);
        let scratch = vec![Complex64::new(0.0, 0.0); ifft.get_inplace_scratch_len()];
        Ok(Self {
            config,
            window: sqrt_hann(config.window_len),
            ifft,
            accumulator: vec![0.0; config.window_len],
            work: vec![Complex64::new(0.0, 0.0); config.window_len],
            scratch,
            frame_index: 0,
        })
    }

    pub fn frame_index(&self) -> u64 {
        self.frame_index
    }

    /// Consumes a one-sided spectrum and writes `hop` finished samples to `out`.
    pub fn synthesize_into(
        &mut self,
        spectrum: &[Complex64],
        out: &mut [f64],
    ) -> Result<(), StftError> {
        let n = self.config.window_len;
        let bins = self.config.n_bins();
        let h = self.config.hop;
        if spectrum.len() != bins {
            return Err(StftError::BinCountMismatch {
                expected: bins,
                actual: spectrum.len(),
            });
        }
        if out.len() != h {
            return Err(StftError::HopLengthMismatch {
                expected: h,
                actual: out.len(),
            });
        }
        self.work[0] = Complex64::new(spectrum[0].re, 0.0);
        self.work[bins - 1] = Complex64::new(spectrum[bins - 1].re, 0.0);
        for (k, &z) in spectrum.iter().enumerate().take(bins - 1).skip(1) {
            self.work[k] = z;
            self.work[n - k] = z.conj();
        }
        self.ifft
            .process_with_scratch(&mut self.work, &mut self.scratch);
        let norm = 1.0 / n as f64;
        for ((acc, w), &win) in self
            .accumulator
            .iter_mut()
            .zip(&self.work)
            .zip(&self.window)
        {
            *acc += w.re * norm * win;
        }
        out.copy_from_slice(&self.accumulator[..h]);
        self.accumulator.copy_within(h.., 0);
        self.accumulator[n - h..].fill(0.0);
        self.frame_index += 1;
        Ok(())
    }

    pub fn synthesize(&mut self, spectrum: &[Complex64]) -> Result<Vec<f64>, StftError> {
        let mut out = vec![0.0; self.config.hop];
        self.synthesize_into(spectrum, &mut out)?;
        Ok(out)
    }

    pub fn reset(&mut self) {
        self.accumulator.fill(0.0);
        self.frame_index = 0;
    }
}
