//! Frame-streaming enhancement engine.
//!
//! Per hop: analysis STFT, mask estimation, speech/noise split, control
//! computation, covariance update, per-bin PMWF, synthesis of the
//! reference-channel estimate. The filter at frame `t` uses statistics that
//! already include frame `t`.

use crate::controls::{AlphaMode, BetaMode, ControlParams, ControlVectors};
use crate::covariance::{CovarianceState, DEFAULT_EPSILON_INIT};
use crate::masknet::{MaskNet, MaskNetError, MaskTensor, ModelWeights};
use crate::npw1::{Container, ContainerError, Tensor};
use crate::pmwf::{self, FilterBank};
use crate::stft::{Analyzer, SpectralFrame, StftConfig, StftError, Synthesizer};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

/// Bins with mixture magnitude below this get a zero oracle mask.
pub const ORACLE_FLOOR: f64 = 1e-10;
/// Oracle mask magnitudes are clipped to this before being applied.
pub const ORACLE_CLIP: f64 = 10.0;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Stft(#[from] StftError),
    #[error(transparent)]
    MaskNet(#[from] MaskNetError),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("oracle mask provider needs a clean reference signal")]
    MissingReference,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Where the per-frame complex mask comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MaskSource {
    /// The mask network from the loaded weights.
    Neural,
    /// Ideal ratio `S / Y` computed from a clean reference stream.
    Oracle,
    /// Precomputed masks in an NPW1 container (`mask.re`, `mask.im`, `[T, M, F]`).
    File(PathBuf),
    /// `G = 1` everywhere.
    Identity,
}

impl MaskSource {
    pub fn parse(s: &str) -> Result<Self, EngineError> {
        match s {
            "neural" => Ok(Self::Neural),
            "oracle" => Ok(Self::Oracle),
            "identity" => Ok(Self::Identity),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(Self::File(PathBuf::from(p))),
                _ => Err(EngineError::InvalidConfig(format!(
                    "unknown mask_provider {s:?} (expected neural, oracle, identity or file:<path>)"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub stft: StftConfig,
    pub beta_mode: BetaMode,
    pub alpha_mode: AlphaMode,
    /// Relative diagonal loading for the noise covariance inverse.
    pub loading: f64,
    pub ref_channel: usize,
    pub mask_source: MaskSource,
    pub epsilon_init: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            beta_mode: BetaMode::SppDriven,
            alpha_mode: AlphaMode::FreqDependent,
            loading: 1e-3,
            ref_channel: 0,
            mask_source: MaskSource::Neural,
            epsilon_init: DEFAULT_EPSILON_INIT,
        }
    }
}

/// Flat JSON form of [`EngineConfig`]; every key is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub beta_mode: Option<String>,
    pub beta_value: Option<f64>,
    pub alpha_mode: Option<String>,
    pub alpha_value: Option<f64>,
    pub loading: Option<f64>,
    pub ref_channel: Option<usize>,
    pub mask_provider: Option<String>,
    pub epsilon_init: Option<f64>,
}

impl EngineConfig {
    pub fn from_json(text: &str) -> Result<Self, EngineError> {
        let file: ConfigFile =
            serde_json::from_str(text).map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
        Self::from_file(&file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EngineError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| EngineError::InvalidConfig(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    pub fn from_file(file: &ConfigFile) -> Result<Self, EngineError> {
        let d = Self::default();
        let beta_mode = match file.beta_mode.as_deref() {
            None => d.beta_mode,
            Some("fixed") => BetaMode::Fixed(file.beta_value.ok_or_else(|| {
                EngineError::InvalidConfig("beta_mode \"fixed\" needs beta_value".into())
            })?),
            Some("freq") => BetaMode::FreqDependent,
            Some("spp") => BetaMode::SppDriven,
            Some(other) => {
                return Err(EngineError::InvalidConfig(format!(
                    "unknown beta_mode {other:?}"
                )))
            }
        };
        let alpha_mode = match file.alpha_mode.as_deref() {
            None => d.alpha_mode,
            Some("cum_mean") => AlphaMode::CumulativeMean,
            Some("fixed") => AlphaMode::Fixed(file.alpha_value.ok_or_else(|| {
                EngineError::InvalidConfig("alpha_mode \"fixed\" needs alpha_value".into())
            })?),
            Some("freq") => AlphaMode::FreqDependent,
            Some("spp") => AlphaMode::SppDriven,
            Some(other) => {
                return Err(EngineError::InvalidConfig(format!(
                    "unknown alpha_mode {other:?}"
                )))
            }
        };
        let cfg = Self {
            stft: d.stft,
            beta_mode,
            alpha_mode,
            loading: file.loading.unwrap_or(d.loading),
            ref_channel: file.ref_channel.unwrap_or(d.ref_channel),
            mask_source: match &file.mask_provider {
                Some(s) => MaskSource::parse(s)?,
                None => d.mask_source,
            },
            epsilon_init: file.epsilon_init.unwrap_or(d.epsilon_init),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        self.stft.validate()?;
        let bad = |m: String| Err(EngineError::InvalidConfig(m));
        if let BetaMode::Fixed(b) = self.beta_mode {
            if !(b >= 0.0 && b.is_finite()) {
                return bad(format!("fixed beta must be >= 0, got {b}"));
            }
        }
        if let AlphaMode::Fixed(a) = self.alpha_mode {
            if !(a > 0.0 && a < 1.0) {
                return bad(format!("fixed alpha must be in (0, 1), got {a}"));
            }
        }
        if !(self.loading >= 0.0 && self.loading.is_finite()) {
            return bad(format!("loading must be >= 0, got {}", self.loading));
        }
        if !(self.epsilon_init > 0.0 && self.epsilon_init.is_finite()) {
            return bad(format!(
                "epsilon_init must be > 0, got {}",
                self.epsilon_init
            ));
        }
        Ok(())
    }
}

/// Ideal complex ratio mask `S / Y`, zeroed where `|Y| < floor` and
/// clipped to magnitude [`ORACLE_CLIP`].
pub fn oracle_mask(
    y: &SpectralFrame,
    s: &SpectralFrame,
    floor: f64,
) -> Result<MaskTensor, EngineError> {
    let raw = oracle_ratio(y, s, floor)?;
    let mut g = raw;
    for k in 0..g.channels() {
        for z in g.channel_mut(k) {
            let mag = z.norm();
            if mag > ORACLE_CLIP {
                *z *= ORACLE_CLIP / mag;
            }
        }
    }
    Ok(g)
}

fn oracle_ratio(
    y: &SpectralFrame,
    s: &SpectralFrame,
    floor: f64,
) -> Result<MaskTensor, EngineError> {
    if y.channels() != s.channels() || y.bins() != s.bins() {
        return Err(EngineError::ShapeMismatch(format!(
            "mixture {}x{} vs reference {}x{}",
            y.channels(),
            y.bins(),
            s.channels(),
            s.bins()
        )));
    }
    let mut g = MaskTensor::zeros(y.channels(), y.bins());
    for k in 0..y.channels() {
        for f in 0..y.bins() {
            let yv = y.get(k, f);
            if yv.norm() >= floor {
                g.set(k, f, s.get(k, f) / yv);
            }
        }
    }
    Ok(g)
}

/// `S = G * Y` per channel and bin, `N = Y - S`.
pub fn separate(
    g: &MaskTensor,
    y: &SpectralFrame,
) -> Result<(SpectralFrame, SpectralFrame), EngineError> {
    if g.channels() != y.channels() || g.bins() != y.bins() {
        return Err(EngineError::ShapeMismatch(format!(
            "mask {}x{} vs frame {}x{}",
            g.channels(),
            g.bins(),
            y.channels(),
            y.bins()
        )));
    }
    let mut s = SpectralFrame::zeros(y.channels(), y.bins());
    let mut n = SpectralFrame::zeros(y.channels(), y.bins());
    separate_into(g, y, &mut s, &mut n);
    Ok((s, n))
}

fn separate_into(g: &MaskTensor, y: &SpectralFrame, s: &mut SpectralFrame, n: &mut SpectralFrame) {
    for k in 0..y.channels() {
        for f in 0..y.bins() {
            let yv = y.get(k, f);
            let sv = g.get(k, f) * yv;
            s.set(k, f, sv);
            n.set(k, f, yv - sv);
        }
    }
}

enum Provider {
    Neural(MaskNet),
    Oracle(Analyzer),
    File { re: Tensor, im: Tensor },
    Identity,
}

/// Precomputed masks from an NPW1 container.
pub fn load_mask_file(
    path: impl AsRef<Path>,
    channels: usize,
    bins: usize,
) -> Result<(Tensor, Tensor), EngineError> {
    let c = Container::read(path)?;
    let re = c.require("mask.re")?.clone();
    let im = c.require("mask.im")?.clone();
    if re.dims.len() != 3
        || re.dims[1..] != [channels, bins]
        || re.dims != im.dims
        || re.dims[0] == 0
    {
        return Err(EngineError::ShapeMismatch(format!(
            "mask file dims {:?}/{:?}, expected [T, {channels}, {bins}] with T > 0",
            re.dims, im.dims
        )));
    }
    Ok((re, im))
}

/// What the engine did with the last frame; handy for inspection and tests.
#[derive(Debug, Clone)]
pub struct FrameTrace {
    pub spp: Vec<f64>,
    pub beta: Vec<f64>,
    pub alpha_ss: Vec<f64>,
    pub alpha_nn: Vec<f64>,
    /// Bins whose filter was recomputed this frame.
    pub valid_bins: usize,
}

/// One enhancement stream.
pub struct Engine {
    config: EngineConfig,
    channels: usize,
    bins: usize,
    controls: ControlParams,
    provider: Provider,
    analyzer: Analyzer,
    synthesizer: Synthesizer,
    covariance: CovarianceState,
    filters: FilterBank,
    frame: SpectralFrame,
    mask: MaskTensor,
    spp_mask: MaskTensor,
    s_hat: SpectralFrame,
    n_hat: SpectralFrame,
    enhanced: Vec<Complex64>,
    g_ref: Vec<f64>,
    trace: FrameTrace,
    frame_index: u64,
    filter_override: Option<Vec<crate::linalg::CVector>>,
}

impl Engine {
    /// `weights` is required for the neural provider; otherwise it only
    /// contributes the control vectors (neutral gains when absent).
    pub fn new(
        config: EngineConfig,
        channels: usize,
        weights: Option<Arc<ModelWeights>>,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        let bins = config.stft.n_bins();
        if config.ref_channel >= channels {
            return Err(EngineError::InvalidConfig(format!(
                "ref_channel {} out of range for {channels} channels",
                config.ref_channel
            )));
        }
        if let Some(w) = &weights {
            if w.hparams.bins != bins {
                return Err(EngineError::ShapeMismatch(format!(
                    "weights have {} bins, STFT gives {bins}",
                    w.hparams.bins
                )));
            }
            if w.hparams.channels != channels {
                return Err(EngineError::ShapeMismatch(format!(
                    "weights expect {} channels, input has {channels}",
                    w.hparams.channels
                )));
            }
        }
        let vectors = weights
            .as_ref()
            .map(|w| w.controls.clone())
            .unwrap_or_else(|| ControlVectors::neutral(bins));
        let provider = match &config.mask_source {
            MaskSource::Neural => {
                Provider::Neural(MaskNet::new(weights.clone().ok_or_else(|| {
                    EngineError::InvalidConfig("neural mask provider needs weights".into())
                })?))
            }
            MaskSource::Oracle => Provider::Oracle(Analyzer::new(config.stft, channels)?),
            MaskSource::File(path) => {
                let (re, im) = load_mask_file(path, channels, bins)?;
                Provider::File { re, im }
            }
            MaskSource::Identity => Provider::Identity,
        };
        Self::with_provider(config, channels, vectors, provider)
    }

    /// Engine with explicit control vectors (no weight file needed unless
    /// the provider is neural).
    pub fn with_controls(
        config: EngineConfig,
        channels: usize,
        controls: ControlVectors,
    ) -> Result<Self, EngineError> {
        let provider = match &config.mask_source {
            MaskSource::Neural => {
                return Err(EngineError::InvalidConfig(
                    "neural mask provider needs weights".into(),
                ))
            }
            MaskSource::Oracle => Provider::Oracle(Analyzer::new(config.stft, channels)?),
            MaskSource::File(path) => {
                let (re, im) = load_mask_file(path, channels, config.stft.n_bins())?;
                Provider::File { re, im }
            }
            MaskSource::Identity => Provider::Identity,
        };
        Self::with_provider(config, channels, controls, provider)
    }

    fn with_provider(
        config: EngineConfig,
        channels: usize,
        mut vectors: ControlVectors,
        provider: Provider,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        let bins = config.stft.n_bins();
        if vectors.bins() != bins {
            return Err(EngineError::ShapeMismatch(format!(
                "control vectors have {} bins, STFT gives {bins}",
                vectors.bins()
            )));
        }
        if config.ref_channel >= channels {
            return Err(EngineError::InvalidConfig(format!(
                "ref_channel {} out of range for {channels} channels",
                config.ref_channel
            )));
        }
        vectors.clamp_beta0();
        let controls = ControlParams::new(vectors, config.beta_mode, config.alpha_mode);
        Ok(Self {
            analyzer: Analyzer::new(config.stft, channels)?,
            synthesizer: Synthesizer::new(config.stft)?,
            covariance: CovarianceState::new(channels, bins, config.epsilon_init),
            filters: FilterBank::new(channels, bins),
            frame: SpectralFrame::zeros(channels, bins),
            mask: MaskTensor::zeros(channels, bins),
            spp_mask: MaskTensor::zeros(channels, bins),
            s_hat: SpectralFrame::zeros(channels, bins),
            n_hat: SpectralFrame::zeros(channels, bins),
            enhanced: vec![Complex64::new(0.0, 0.0); bins],
            g_ref: vec![0.0; bins],
            trace: FrameTrace {
                spp: vec![0.0; bins],
                beta: vec![0.0; bins],
                alpha_ss: vec![0.0; bins],
                alpha_nn: vec![0.0; bins],
                valid_bins: 0,
            },
            frame_index: 0,
            filter_override: None,
            config,
            channels,
            bins,
            controls,
            provider,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn hop(&self) -> usize {
        self.config.stft.hop
    }

    pub fn latency_samples(&self) -> usize {
        self.config.stft.latency_samples()
    }

    pub fn frame_index(&self) -> u64 {
        self.frame_index
    }

    pub fn covariance(&self) -> &CovarianceState {
        &self.covariance
    }

    pub fn filters(&self) -> &FilterBank {
        &self.filters
    }

    pub fn last_trace(&self) -> &FrameTrace {
        &self.trace
    }

    pub fn last_mask(&self) -> &MaskTensor {
        &self.mask
    }

    pub fn controls(&self) -> &ControlParams {
        &self.controls
    }

    /// Pins every bin to a fixed filter instead of the PMWF (diagnostics).
    pub fn force_filter(&mut self, h: crate::linalg::CVector) {
        self.filter_override = Some(vec![h; self.bins]);
    }

    /// Processes one hop of mixture samples (plus the aligned clean
    /// reference for the oracle provider) and returns one hop of output.
    pub fn process_frame<S: AsRef<[f64]>>(
        &mut self,
        mixture: &[S],
        reference: Option<&[S]>,
    ) -> Result<Vec<f64>, EngineError> {
        let mut out = vec![0.0; self.hop()];
        self.process_frame_into(mixture, reference, &mut out)?;
        Ok(out)
    }

    pub fn process_frame_into<S: AsRef<[f64]>>(
        &mut self,
        mixture: &[S],
        reference: Option<&[S]>,
        out: &mut [f64],
    ) -> Result<(), EngineError> {
        if out.len() != self.hop() {
            return Err(EngineError::ShapeMismatch(format!(
                "output buffer holds {} samples, hop is {}",
                out.len(),
                self.hop()
            )));
        }
        self.analyzer.analyze_into(mixture, &mut self.frame)?;
        self.estimate_mask(reference)?;
        separate_into(&self.mask, &self.frame, &mut self.s_hat, &mut self.n_hat);

        let r = self.config.ref_channel;
        for (f, g) in self.g_ref.iter_mut().enumerate() {
            *g = self.spp_mask.get(r, f).norm();
        }
        let t = self.covariance.frame_count() + 1;
        let tr = &mut self.trace;
        self.controls.estimate_spp(&self.g_ref, &mut tr.spp);
        self.controls.compute_beta(&tr.spp, &mut tr.beta);
        self.controls
            .compute_alphas(&tr.spp, t, &mut tr.alpha_ss, &mut tr.alpha_nn);
        self.covariance
            .update(&self.s_hat, &self.n_hat, &tr.alpha_ss, &tr.alpha_nn);

        let mut y = vec![Complex64::new(0.0, 0.0); self.channels];
        let mut valid = 0;
        for f in 0..self.bins {
            if let Some(fixed) = &self.filter_override {
                self.filters.set(f, fixed[f].clone());
            } else {
                let h = pmwf::compute_filter(
                    self.covariance.phi_nn(f),
                    self.covariance.phi_ss(f),
                    tr.beta[f],
                    r,
                    self.config.loading,
                );
                self.filters.offer(f, h);
            }
            valid += self.filters.is_valid(f) as usize;
            self.frame.bin_vector_into(f, &mut y);
            self.enhanced[f] = pmwf::apply_filter(self.filters.filter(f), &y);
        }
        tr.valid_bins = valid;
        self.synthesizer.synthesize_into(&self.enhanced, out)?;
        self.frame_index += 1;
        Ok(())
    }

    fn estimate_mask<S: AsRef<[f64]>>(
        &mut self,
        reference: Option<&[S]>,
    ) -> Result<(), EngineError> {
        match &mut self.provider {
            Provider::Neural(net) => {
                net.forward_into(&self.frame, &mut self.mask)?;
                self.spp_mask.clone_from(&self.mask);
            }
            Provider::Oracle(ref_analyzer) => {
                let reference = reference.ok_or(EngineError::MissingReference)?;
                let s = ref_analyzer.analyze(reference)?;
                // SPP sees the unclipped ratio; only the applied mask is clipped.
                self.spp_mask = oracle_ratio(&self.frame, &s, ORACLE_FLOOR)?;
                self.mask = oracle_mask(&self.frame, &s, ORACLE_FLOOR)?;
            }
            Provider::File { re, im } => {
                let frames = re.dims[0];
                let t = (self.frame_index as usize).min(frames - 1);
                let per = self.channels * self.bins;
                let (re, im) = (
                    &re.data[t * per..(t + 1) * per],
                    &im.data[t * per..(t + 1) * per],
                );
                for k in 0..self.channels {
                    for f in 0..self.bins {
                        let i = k * self.bins + f;
                        self.mask
                            .set(k, f, Complex64::new(re[i] as f64, im[i] as f64));
                    }
                }
                self.spp_mask.clone_from(&self.mask);
            }
            Provider::Identity => {
                for k in 0..self.channels {
                    self.mask.channel_mut(k).fill(Complex64::new(1.0, 0.0));
                }
                self.spp_mask.clone_from(&self.mask);
            }
        }
        Ok(())
    }
}

/// Enhances whole signals (planar, one `Vec` per channel) and returns a mono
/// signal of the same length, advanced by the STFT latency so it lines up
/// with the input.
pub fn enhance_signal(
    engine: &mut Engine,
    mixture: &[Vec<f64>],
    reference: Option<&[Vec<f64>]>,
) -> Result<Vec<f64>, EngineError> {
    let channels = engine.channels();
    if mixture.len() != channels {
        return Err(EngineError::Stft(StftError::ChannelMismatch {
            expected: channels,
            actual: mixture.len(),
        }));
    }
    let len = mixture.first().map_or(0, Vec::len);
    if mixture.iter().any(|c| c.len() != len) {
        return Err(EngineError::ShapeMismatch("ragged mixture channels".into()));
    }
    if let Some(r) = reference {
        if r.len() != channels || r.iter().any(|c| c.len() != len) {
            return Err(EngineError::ShapeMismatch(
                "reference must match the mixture's channels and length".into(),
            ));
        }
    }
    let hop = engine.hop();
    let latency = engine.latency_samples();
    let total = len + latency;
    let frames = total.div_ceil(hop);
    let mut out = Vec::with_capacity(frames * hop);
    let mut mix_hop = vec![vec![0.0; hop]; channels];
    let mut ref_hop = vec![vec![0.0; hop]; channels];
    let mut block = vec![0.0; hop];
    for t in 0..frames {
        let start = t * hop;
        fill_hop(mixture, start, &mut mix_hop);
        let r = match reference {
            Some(r) => {
                fill_hop(r, start, &mut ref_hop);
                Some(ref_hop.as_slice())
            }
            None => None,
        };
        engine.process_frame_into(&mix_hop, r, &mut block)?;
        out.extend_from_slice(&block);
    }
    Ok(out[latency..latency + len].to_vec())
}

fn fill_hop(signal: &[Vec<f64>], start: usize, hop: &mut [Vec<f64>]) {
    for (src, dst) in signal.iter().zip(hop.iter_mut()) {
        for (i, d) in dst.iter_mut().enumerate() {
            *d = src.get(start + i).copied().unwrap_or(0.0);
        }
    }
}
