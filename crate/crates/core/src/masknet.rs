//! Mask estimation network: forward pass only.
//!
//! Per frame the network sees the mixture spectrum with real and imaginary
//! parts split into `2M` real channels (channel `2k` = Re(mic k), `2k+1` =
//! Im(mic k)). Spatial layers apply a separate `C_out x C_in` matrix in every
//! frequency bin followed by PReLU; the last layer emits one extra channel
//! that feeds the temporal path. The temporal path is a linear encoder to
//! `H` features, a stack of SplitGRU layers and a linear decoder back to `F`
//! real gains, which scale every complex channel of the spatial output.
//!
//! Weights are `f32`; all network arithmetic is `f32`.

use crate::controls::ControlVectors;
use crate::npw1::{Container, ContainerError, Tensor};
use crate::stft::SpectralFrame;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

/// Multichannel complex mask `G[channel][bin]` for one frame.
pub type MaskTensor = SpectralFrame;

pub const HPARAMS_TENSOR: &str = "meta.hparams";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MaskNetError {
    #[error("frame has {actual_channels}x{actual_bins}, network expects {channels}x{bins}")]
    FrameShape {
        channels: usize,
        bins: usize,
        actual_channels: usize,
        actual_bins: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hyperparams {
    /// Microphones (M).
    pub channels: usize,
    /// Frequency bins (F).
    pub bins: usize,
    /// Recurrent feature size (H).
    pub hidden: usize,
    /// GRU splits per layer (R).
    pub splits: usize,
    pub spatial_layers: usize,
    pub temporal_layers: usize,
}

impl Hyperparams {
    /// Five-microphone glasses array, 256-point STFT.
    pub const PAPER: Hyperparams = Hyperparams {
        channels: 5,
        bins: 129,
        hidden: 96,
        splits: 2,
        spatial_layers: 4,
        temporal_layers: 3,
    };

    pub fn spatial_channels(&self) -> usize {
        2 * self.channels
    }

    /// `(C_in, C_out)` of spatial layer `l`.
    pub fn spatial_dims(&self, layer: usize) -> (usize, usize) {
        let c = self.spatial_channels();
        if layer + 1 == self.spatial_layers {
            (c, c + 1)
        } else {
            (c, c)
        }
    }

    pub fn split_size(&self) -> usize {
        self.hidden / self.splits
    }

    pub fn validate(&self) -> Result<(), ContainerError> {
        let bad = |detail: String| ContainerError::ShapeMismatch {
            name: HPARAMS_TENSOR.to_string(),
            detail,
        };
        if self.channels == 0 || self.bins == 0 || self.hidden == 0 || self.splits == 0 {
            return Err(bad(format!("all sizes must be positive: {self:?}")));
        }
        if self.spatial_layers == 0 || self.temporal_layers == 0 {
            return Err(bad("at least one spatial and one temporal layer".into()));
        }
        if !self.hidden.is_multiple_of(self.splits) {
            return Err(bad(format!(
                "hidden size {} not divisible by {} splits",
                self.hidden, self.splits
            )));
        }
        Ok(())
    }

    fn to_tensor(self) -> Tensor {
        Tensor::new(
            vec![6],
            [
                self.channels,
                self.bins,
                self.hidden,
                self.splits,
                self.spatial_layers,
                self.temporal_layers,
            ]
            .iter()
            .map(|&v| v as f32)
            .collect(),
        )
    }

    fn from_tensor(t: &Tensor) -> Result<Self, ContainerError> {
        if t.dims != [6] {
            return Err(ContainerError::ShapeMismatch {
                name: HPARAMS_TENSOR.into(),
                detail: format!("expected [6], found {:?}", t.dims),
            });
        }
        let mut v = [0usize; 6];
        for (o, &x) in v.iter_mut().zip(&t.data) {
            if !(x >= 0.0 && x.fract() == 0.0 && x < 1e6) {
                return Err(ContainerError::ShapeMismatch {
                    name: HPARAMS_TENSOR.into(),
                    detail: format!("non-integer hyperparameter {x}"),
                });
            }
            *o = x as usize;
        }
        Ok(Self {
            channels: v[0],
            bins: v[1],
            hidden: v[2],
            splits: v[3],
            spatial_layers: v[4],
            temporal_layers: v[5],
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialLayer {
    pub c_in: usize,
    pub c_out: usize,
    /// `[bins][c_out][c_in]`.
    pub weight: Vec<f32>,
    /// Negative-side slope per output channel.
    pub prelu: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub inputs: usize,
    pub outputs: usize,
    /// `[outputs][inputs]`.
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Linear {
    pub fn forward(&self, x: &[f32], y: &mut [f32]) {
        for (o, (row, b)) in y
            .iter_mut()
            .zip(self.weight.chunks_exact(self.inputs).zip(&self.bias))
        {
            *o = b + dot(row, x);
        }
    }
}

/// GRU cell with one bias per gate; gate order reset, update, candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    pub inputs: usize,
    pub hidden: usize,
    /// `[3 * hidden][inputs]`.
    pub w_ih: Vec<f32>,
    /// `[3 * hidden][hidden]`.
    pub w_hh: Vec<f32>,
    /// `[3 * hidden]`.
    pub bias: Vec<f32>,
}

impl GruCell {
    /// Advances `h` in place by one step of input `x`.
    pub fn step(&self, x: &[f32], h: &mut [f32]) {
        let n = self.hidden;
        debug_assert_eq!(h.len(), n);
        let mut gates = [0.0f32; 3];
        let mut next = vec![0.0f32; n];
        for j in 0..n {
            for (g, gate) in gates.iter_mut().enumerate() {
                let row = g * n + j;
                *gate = dot(&self.w_ih[row * self.inputs..(row + 1) * self.inputs], x);
            }
            let hr = dot(&self.w_hh[j * n..(j + 1) * n], h);
            let hz = dot(&self.w_hh[(n + j) * n..(n + j + 1) * n], h);
            let hn = dot(&self.w_hh[(2 * n + j) * n..(2 * n + j + 1) * n], h);
            let r = sigmoid(gates[0] + hr + self.bias[j]);
            let z = sigmoid(gates[1] + hz + self.bias[n + j]);
            let cand = (gates[2] + self.bias[2 * n + j] + r * hn).tanh();
            next[j] = (1.0 - z) * cand + z * h[j];
        }
        h.copy_from_slice(&next);
    }
}

/// `R` independent GRUs over contiguous input segments.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitGruLayer {
    pub cells: Vec<GruCell>,
}

impl SplitGruLayer {
    pub fn hidden(&self) -> usize {
        self.cells.iter().map(|c| c.hidden).sum()
    }

    /// One time step. `state` holds the per-split hidden vectors back to
    /// back; `output` receives the concatenated new states after the
    /// stride-`R` interleave, so output position
    /// `(k mod R) * (H/R) + k / R` carries concatenated feature `k`.
    pub fn step(&self, state: &mut [f32], input: &[f32], output: &mut [f32]) {
        let r = self.cells.len();
        let s = self.cells[0].hidden;
        for (i, cell) in self.cells.iter().enumerate() {
            cell.step(&input[i * s..(i + 1) * s], &mut state[i * s..(i + 1) * s]);
        }
        for (k, &v) in state.iter().enumerate() {
            output[(k % r) * s + k / r] = v;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub hparams: Hyperparams,
    pub spatial: Vec<SpatialLayer>,
    pub encoder: Linear,
    pub gru: Vec<SplitGruLayer>,
    pub decoder: Linear,
    pub controls: ControlVectors,
}

type ControlGetter = fn(&ControlVectors) -> &Vec<f64>;

fn control_names() -> [(&'static str, ControlGetter); 5] {
    [
        ("controls.p_a", |c| &c.p_a),
        ("controls.p_b", |c| &c.p_b),
        ("controls.beta0", |c| &c.beta0),
        ("controls.alpha0_ss", |c| &c.alpha0_ss),
        ("controls.alpha0_nn", |c| &c.alpha0_nn),
    ]
}

impl ModelWeights {
    /// Parses a container; tensor shapes must match the hyperparameter record.
    pub fn from_container(c: &Container) -> Result<Self, ContainerError> {
        let hp = Hyperparams::from_tensor(c.require(HPARAMS_TENSOR)?)?;
        hp.validate()?;
        let f = hp.bins;
        let take = |name: &str, dims: &[usize]| -> Result<Vec<f32>, ContainerError> {
            Ok(c.require_shape(name, dims)?.data.clone())
        };

        let mut spatial = Vec::with_capacity(hp.spatial_layers);
        for l in 0..hp.spatial_layers {
            let (c_in, c_out) = hp.spatial_dims(l);
            spatial.push(SpatialLayer {
                c_in,
                c_out,
                weight: take(&format!("spatial.{l}.weight"), &[f, c_out, c_in])?,
                prelu: take(&format!("spatial.{l}.prelu"), &[c_out])?,
            });
        }
        let encoder = Linear {
            inputs: f,
            outputs: hp.hidden,
            weight: take("encoder.weight", &[hp.hidden, f])?,
            bias: take("encoder.bias", &[hp.hidden])?,
        };
        let s = hp.split_size();
        let mut gru = Vec::with_capacity(hp.temporal_layers);
        for l in 0..hp.temporal_layers {
            let mut cells = Vec::with_capacity(hp.splits);
            for r in 0..hp.splits {
                let p = format!("gru.{l}.split{r}");
                cells.push(GruCell {
                    inputs: s,
                    hidden: s,
                    w_ih: take(&format!("{p}.w_ih"), &[3 * s, s])?,
                    w_hh: take(&format!("{p}.w_hh"), &[3 * s, s])?,
                    bias: take(&format!("{p}.bias"), &[3 * s])?,
                });
            }
            gru.push(SplitGruLayer { cells });
        }
        let decoder = Linear {
            inputs: hp.hidden,
            outputs: f,
            weight: take("decoder.weight", &[f, hp.hidden])?,
            bias: take("decoder.bias", &[f])?,
        };
        let vec64 = |name: &str| -> Result<Vec<f64>, ContainerError> {
            Ok(take(name, &[f])?.into_iter().map(f64::from).collect())
        };
        let mut controls = ControlVectors {
            p_a: vec64("controls.p_a")?,
            p_b: vec64("controls.p_b")?,
            beta0: vec64("controls.beta0")?,
            alpha0_ss: vec64("controls.alpha0_ss")?,
            alpha0_nn: vec64("controls.alpha0_nn")?,
        };
        controls.clamp_beta0();
        let weights = Self {
            hparams: hp,
            spatial,
            encoder,
            gru,
            decoder,
            controls,
        };
        if !weights.is_finite() {
            return Err(ContainerError::ShapeMismatch {
                name: "weights".into(),
                detail: "non-finite parameter values".into(),
            });
        }
        Ok(weights)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ContainerError> {
        Self::from_container(&Container::read(path)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ContainerError> {
        Self::from_container(&Container::from_bytes(bytes)?)
    }

    pub fn to_container(&self) -> Container {
        let hp = self.hparams;
        let f = hp.bins;
        let mut c = Container::new();
        c.insert(HPARAMS_TENSOR, hp.to_tensor());
        for (l, layer) in self.spatial.iter().enumerate() {
            c.insert(
                format!("spatial.{l}.weight"),
                Tensor::new(vec![f, layer.c_out, layer.c_in], layer.weight.clone()),
            );
            c.insert(
                format!("spatial.{l}.prelu"),
                Tensor::new(vec![layer.c_out], layer.prelu.clone()),
            );
        }
        c.insert(
            "encoder.weight",
            Tensor::new(vec![hp.hidden, f], self.encoder.weight.clone()),
        );
        c.insert(
            "encoder.bias",
            Tensor::new(vec![hp.hidden], self.encoder.bias.clone()),
        );
        for (l, layer) in self.gru.iter().enumerate() {
            for (r, cell) in layer.cells.iter().enumerate() {
                let s = cell.hidden;
                let p = format!("gru.{l}.split{r}");
                c.insert(
                    format!("{p}.w_ih"),
                    Tensor::new(vec![3 * s, s], cell.w_ih.clone()),
                );
                c.insert(
                    format!("{p}.w_hh"),
                    Tensor::new(vec![3 * s, s], cell.w_hh.clone()),
                );
                c.insert(
                    format!("{p}.bias"),
                    Tensor::new(vec![3 * s], cell.bias.clone()),
                );
            }
        }
        c.insert(
            "decoder.weight",
            Tensor::new(vec![f, hp.hidden], self.decoder.weight.clone()),
        );
        c.insert(
            "decoder.bias",
            Tensor::new(vec![f], self.decoder.bias.clone()),
        );
        for (name, get) in control_names() {
            c.insert(
                name,
                Tensor::new(
                    vec![f],
                    get(&self.controls).iter().map(|&v| v as f32).collect(),
                ),
            );
        }
        c
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ContainerError> {
        self.to_container().write(path)
    }

    /// All-zero network (zero mask for any input) with neutral controls.
    pub fn zeros(hp: Hyperparams) -> Self {
        Self::filled(hp, &mut |_| 0.0)
    }

    /// Seeded uniform weights in `[-scale, scale]`, controls included.
    pub fn random(hp: Hyperparams, seed: u64, scale: f32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::filled(hp, &mut |_| rng.random_range(-scale..=scale))
    }

    fn filled(hp: Hyperparams, gen: &mut dyn FnMut(usize) -> f32) -> Self {
        hp.validate().expect("invalid hyperparameters");
        let f = hp.bins;
        let mut vec = |n: usize| -> Vec<f32> { (0..n).map(&mut *gen).collect() };
        let spatial = (0..hp.spatial_layers)
            .map(|l| {
                let (c_in, c_out) = hp.spatial_dims(l);
                SpatialLayer {
                    c_in,
                    c_out,
                    weight: vec(f * c_out * c_in),
                    prelu: vec(c_out),
                }
            })
            .collect();
        let encoder = Linear {
            inputs: f,
            outputs: hp.hidden,
            weight: vec(hp.hidden * f),
            bias: vec(hp.hidden),
        };
        let s = hp.split_size();
        let gru = (0..hp.temporal_layers)
            .map(|_| SplitGruLayer {
                cells: (0..hp.splits)
                    .map(|_| GruCell {
                        inputs: s,
                        hidden: s,
                        w_ih: vec(3 * s * s),
                        w_hh: vec(3 * s * s),
                        bias: vec(3 * s),
                    })
                    .collect(),
            })
            .collect();
        let decoder = Linear {
            inputs: hp.hidden,
            outputs: f,
            weight: vec(f * hp.hidden),
            bias: vec(f),
        };
        let mut v64 = || -> Vec<f64> { vec(f).into_iter().map(f64::from).collect() };
        let mut controls = ControlVectors {
            p_a: v64(),
            p_b: v64(),
            beta0: v64(),
            alpha0_ss: v64(),
            alpha0_nn: v64(),
        };
        controls.clamp_beta0();
        Self {
            hparams: hp,
            spatial,
            encoder,
            gru,
            decoder,
            controls,
        }
    }

    /// Number of stored scalars, controls included, hyperparameter record excluded.
    pub fn parameter_count(&self) -> usize {
        self.to_container()
            .iter()
            .filter(|(n, _)| *n != HPARAMS_TENSOR)
            .map(|(_, t)| t.len())
            .sum()
    }

    fn is_finite(&self) -> bool {
        let ok = |v: &[f32]| v.iter().all(|x| x.is_finite());
        self.spatial.iter().all(|l| ok(&l.weight) && ok(&l.prelu))
            && ok(&self.encoder.weight)
            && ok(&self.encoder.bias)
            && self
                .gru
                .iter()
                .flat_map(|l| &l.cells)
                .all(|c| ok(&c.w_ih) && ok(&c.w_hh) && ok(&c.bias))
            && ok(&self.decoder.weight)
            && ok(&self.decoder.bias)
            && control_names()
                .iter()
                .all(|(_, g)| g(&self.controls).iter().all(|x| x.is_finite()))
    }
}

/// Hidden vectors of every SplitGRU layer; zero at stream start.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState {
    pub layers: Vec<Vec<f32>>,
}

impl RecurrentState {
    pub fn new(hp: &Hyperparams) -> Self {
        Self {
            layers: vec![vec![0.0; hp.hidden]; hp.temporal_layers],
        }
    }

    pub fn reset(&mut self) {
        for l in &mut self.layers {
            l.fill(0.0);
        }
    }
}

#[inline]
fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn prelu(x: f32, slope: f32) -> f32 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Spatial block for one frame.
///
/// Writes `spatial_out` as `[bins][2M]` and `temporal_in` as `[bins]`.
pub fn spatial_forward(
    weights: &ModelWeights,
    frame: &SpectralFrame,
    spatial_out: &mut [f32],
    temporal_in: &mut [f32],
) {
    let hp = &weights.hparams;
    let c = hp.spatial_channels();
    let width = c + 1;
    let mut a = vec![0.0f32; width];
    let mut b = vec![0.0f32; width];
    for f in 0..hp.bins {
        for k in 0..hp.channels {
            let y = frame.get(k, f);
            a[2 * k] = y.re as f32;
            a[2 * k + 1] = y.im as f32;
        }
        for layer in &weights.spatial {
            let w = &layer.weight[f * layer.c_out * layer.c_in..(f + 1) * layer.c_out * layer.c_in];
            for (o, (row, &slope)) in b
                .iter_mut()
                .zip(w.chunks_exact(layer.c_in).zip(&layer.prelu))
            {
                *o = prelu(dot(row, &a[..layer.c_in]), slope);
            }
            std::mem::swap(&mut a, &mut b);
        }
        spatial_out[f * c..(f + 1) * c].copy_from_slice(&a[..c]);
        temporal_in[f] = a[c];
    }
}

/// Streaming mask estimator: weights plus per-stream recurrent state.
pub struct MaskNet {
    weights: Arc<ModelWeights>,
    state: RecurrentState,
    spatial_out: Vec<f32>,
    temporal_in: Vec<f32>,
    features: Vec<f32>,
    features_next: Vec<f32>,
    real_mask: Vec<f32>,
}

impl MaskNet {
    pub fn new(weights: Arc<ModelWeights>) -> Self {
        let hp = weights.hparams;
        Self {
            state: RecurrentState::new(&hp),
            spatial_out: vec![0.0; hp.bins * hp.spatial_channels()],
            temporal_in: vec![0.0; hp.bins],
            features: vec![0.0; hp.hidden],
            features_next: vec![0.0; hp.hidden],
            real_mask: vec![0.0; hp.bins],
            weights,
        }
    }

    pub fn weights(&self) -> &ModelWeights {
        &self.weights
    }

    pub fn state(&self) -> &RecurrentState {
        &self.state
    }

    pub fn reset(&mut self) {
        self.state.reset();
    }

    /// Spatial block output of the last frame, `[bins][2M]`.
    pub fn spatial_out(&self) -> &[f32] {
        &self.spatial_out
    }

    /// Extra spatial channel of the last frame, `[bins]`.
    pub fn temporal_in(&self) -> &[f32] {
        &self.temporal_in
    }

    /// Output of the last SplitGRU layer for the last frame.
    pub fn recurrent_out(&self) -> &[f32] {
        &self.features
    }

    /// Decoded real mask of the last frame.
    pub fn real_mask(&self) -> &[f32] {
        &self.real_mask
    }

    pub fn forward(&mut self, frame: &SpectralFrame) -> Result<MaskTensor, MaskNetError> {
        let mut g = MaskTensor::zeros(self.weights.hparams.channels, self.weights.hparams.bins);
        self.forward_into(frame, &mut g)?;
        Ok(g)
    }

    pub fn forward_into(
        &mut self,
        frame: &SpectralFrame,
        mask: &mut MaskTensor,
    ) -> Result<(), MaskNetError> {
        let w = &*self.weights;
        let hp = w.hparams;
        if frame.channels() != hp.channels || frame.bins() != hp.bins {
            return Err(MaskNetError::FrameShape {
                channels: hp.channels,
                bins: hp.bins,
                actual_channels: frame.channels(),
                actual_bins: frame.bins(),
            });
        }
        spatial_forward(w, frame, &mut self.spatial_out, &mut self.temporal_in);

        w.encoder.forward(&self.temporal_in, &mut self.features);
        for (layer, state) in w.gru.iter().zip(&mut self.state.layers) {
            layer.step(state, &self.features, &mut self.features_next);
            std::mem::swap(&mut self.features, &mut self.features_next);
        }
        w.decoder.forward(&self.features, &mut self.real_mask);

        if mask.channels() != hp.channels || mask.bins() != hp.bins {
            *mask = MaskTensor::zeros(hp.channels, hp.bins);
        }
        let c = hp.spatial_channels();
        for f in 0..hp.bins {
            let m = self.real_mask[f];
            let feats = &self.spatial_out[f * c..(f + 1) * c];
            for k in 0..hp.channels {
                let z = Complex64::new((m * feats[2 * k]) as f64, (m * feats[2 * k + 1]) as f64);
                mask.set(k, f, z);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: Hyperparams = Hyperparams {
        channels: 2,
        bins: 5,
        hidden: 4,
        splits: 2,
        spatial_layers: 3,
        temporal_layers: 2,
    };

    fn random_frame(seed: u64, m: usize, f: usize) -> SpectralFrame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SpectralFrame::from_channels(
            (0..m)
                .map(|_| {
                    (0..f)
                        .map(|_| {
                            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                        })
                        .collect()
                })
                .collect(),
        )
    }

    /// Identity spatial path and a decoder that outputs exactly one.
    fn passthrough(hp: Hyperparams) -> ModelWeights {
        let mut w = ModelWeights::zeros(hp);
        let c = hp.spatial_channels();
        for layer in &mut w.spatial {
            layer.prelu.fill(1.0);
            for f in 0..hp.bins {
                for i in 0..c {
                    layer.weight[f * layer.c_out * layer.c_in + i * layer.c_in + i] = 1.0;
                }
            }
        }
        w.decoder.bias.fill(1.0);
        w
    }

    #[test]
    fn paper_shapes_are_consistent() {
        let w = ModelWeights::zeros(Hyperparams::PAPER);
        assert_eq!(w.spatial[3].c_out, 11);
        assert_eq!(w.gru[0].cells[0].w_ih.len(), 3 * 48 * 48);
        assert_eq!(w.encoder.weight.len() + w.encoder.bias.len(), 12_480);
    }

    #[test]
    fn zero_network_gives_zero_mask() {
        let mut net = MaskNet::new(Arc::new(ModelWeights::zeros(SMALL)));
        let g = net.forward(&random_frame(1, 2, 5)).unwrap();
        assert!(g.as_slice().iter().all(|z| z.norm() == 0.0));
        assert!(net.state().layers.iter().flatten().all(|&h| h == 0.0));
    }

    #[test]
    fn identity_spatial_path_reproduces_features() {
        let w = passthrough(SMALL);
        let frame = random_frame(2, 2, 5);
        let mut so = vec![0.0; 5 * 4];
        let mut ti = vec![0.0; 5];
        spatial_forward(&w, &frame, &mut so, &mut ti);
        for f in 0..5 {
            for k in 0..2 {
                assert_eq!(so[f * 4 + 2 * k], frame.get(k, f).re as f32);
                assert_eq!(so[f * 4 + 2 * k + 1], frame.get(k, f).im as f32);
            }
        }
        assert!(ti.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_real_mask_reproduces_input_spectrum() {
        let mut net = MaskNet::new(Arc::new(passthrough(SMALL)));
        let frame = random_frame(3, 2, 5);
        let g = net.forward(&frame).unwrap();
        for k in 0..2 {
            for f in 0..5 {
                let y = frame.get(k, f);
                let expect = Complex64::new(y.re as f32 as f64, y.im as f32 as f64);
                assert_eq!(g.get(k, f), expect);
            }
        }
    }

    #[test]
    fn zero_gru_is_closed_form() {
        let cell = GruCell {
            inputs: 3,
            hidden: 3,
            w_ih: vec![0.0; 27],
            w_hh: vec![0.0; 27],
            bias: vec![0.0; 9],
        };
        let mut h = vec![0.0; 3];
        cell.step(&[1.0, -2.0, 3.0], &mut h);
        assert_eq!(h, vec![0.0; 3]);
        // z = 0.5 keeps half the old state when the candidate is zero.
        let mut h = vec![1.0, -1.0, 0.5];
        cell.step(&[0.0; 3], &mut h);
        assert_eq!(h, vec![0.5, -0.5, 0.25]);
    }

    #[test]
    fn split_interleave_routes_features_across_splits() {
        // Identity-ish cells: with huge candidate bias and z pinned at 0 the
        // new state is tanh(bias) so we can tag each unit.
        let s = 3;
        let cells = (0..2)
            .map(|r| {
                let mut bias = vec![0.0; 3 * s];
                for j in 0..s {
                    bias[s + j] = -100.0;
                    bias[2 * s + j] = 0.1 * (r * s + j + 1) as f32;
                }
                GruCell {
                    inputs: s,
                    hidden: s,
                    w_ih: vec![0.0; 3 * s * s],
                    w_hh: vec![0.0; 3 * s * s],
                    bias,
                }
            })
            .collect();
        let layer = SplitGruLayer { cells };
        let mut state = vec![0.0; 6];
        let mut out = vec![0.0; 6];
        layer.step(&mut state, &[0.0; 6], &mut out);
        let tag = |k: usize| (0.1 * (k + 1) as f32).tanh();
        // concatenated k -> (k % 2) * 3 + k / 2
        let expect = [tag(0), tag(2), tag(4), tag(1), tag(3), tag(5)];
        for (a, b) in out.iter().zip(expect) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn container_round_trip_and_errors() {
        let w = ModelWeights::random(SMALL, 7, 0.1);
        let bytes = w.to_container().to_bytes();
        let back = ModelWeights::from_bytes(&bytes).unwrap();
        assert_eq!(back, w);

        let mut c = w.to_container();
        c.remove("decoder.bias");
        assert!(matches!(
            ModelWeights::from_container(&c),
            Err(ContainerError::MissingTensor(n)) if n == "decoder.bias"
        ));

        // 96 = 3 * 32, so R = 3 is only caught by the R = 2 tensor shapes.
        let mut c = ModelWeights::zeros(Hyperparams::PAPER).to_container();
        c.insert(
            HPARAMS_TENSOR,
            Tensor::new(vec![6], vec![5.0, 129.0, 96.0, 3.0, 4.0, 3.0]),
        );
        assert!(matches!(
            ModelWeights::from_container(&c),
            Err(ContainerError::ShapeMismatch { name, .. }) if name == "gru.0.split0.w_ih"
        ));
        c.insert(
            HPARAMS_TENSOR,
            Tensor::new(vec![6], vec![5.0, 129.0, 96.0, 5.0, 4.0, 3.0]),
        );
        assert!(matches!(
            ModelWeights::from_container(&c),
            Err(ContainerError::ShapeMismatch { name, .. }) if name == HPARAMS_TENSOR
        ));

        let mut c = w.to_container();
        c.insert("encoder.bias", Tensor::zeros(vec![3]));
        assert!(matches!(
            ModelWeights::from_container(&c),
            Err(ContainerError::ShapeMismatch { name, .. }) if name == "encoder.bias"
        ));
    }

    #[test]
    fn negative_beta0_is_clamped_on_load() {
        let mut w = ModelWeights::zeros(SMALL);
        w.controls.beta0 = vec![-3.0, 1.0, 0.0, -0.5, 2.0];
        let back = ModelWeights::from_container(&w.to_container()).unwrap();
        assert_eq!(back.controls.beta0, vec![0.0, 1.0, 0.0, 0.0, 2.0]);
    }

    #[test]
    fn wrong_frame_shape_is_rejected() {
        let mut net = MaskNet::new(Arc::new(ModelWeights::zeros(SMALL)));
        assert!(net.forward(&SpectralFrame::zeros(3, 5)).is_err());
    }
}
