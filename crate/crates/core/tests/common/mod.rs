//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::path::PathBuf;

use neural_pmwf::linalg::{herm_outer, CMatrix};
use neural_pmwf::masknet::{GruCell, MaskNet, ModelWeights};
use neural_pmwf::npw1::{Container, Tensor};
use neural_pmwf::stft::{Analyzer, SpectralFrame, StftConfig, Synthesizer};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// Well-conditioned Hermitian positive definite matrix.
pub fn random_psd(rng: &mut ChaCha8Rng, m: usize) -> CMatrix {
    let mut acc = CMatrix::scaled_identity(m, 0.1);
    for _ in 0..m + 2 {
        let v = complex_vec(rng, m);
        acc.blend_outer(1.0, 1.0, &v);
    }
    acc.symmetrize();
    acc
}

pub fn rank_one(v: &[Complex64], power: f64) -> CMatrix {
    herm_outer(v).scale(power)
}

pub fn random_frame(rng: &mut ChaCha8Rng, m: usize, f: usize) -> SpectralFrame {
    SpectralFrame::from_channels((0..m).map(|_| complex_vec(rng, f)).collect())
}

pub fn white_noise(seed: u64, n: usize) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

/// Harmonic signal with a slow amplitude envelope and pauses.
pub fn speech_shaped(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = i as f64 / 16_000.0;
            let env = (2.0 * std::f64::consts::PI * 3.0 * t).sin().max(0.0);
            let f0 = 140.0 + 20.0 * (2.0 * std::f64::consts::PI * 0.5 * t).sin();
            let v: f64 = (1..20)
                .map(|h| {
                    let fh = h as f64 * f0;
                    (-(fh - 700.0).powi(2) / 2e5).exp()
                        * (2.0 * std::f64::consts::PI * fh * t).sin()
                })
                .sum();
            0.3 * env * v
        })
        .collect()
}

/// Streams `x` through analysis and synthesis with the identity spectrum
/// and returns the raw (delayed) output, padded with `pad` extra samples.
pub fn stft_round_trip(x: &[f64], pad: usize) -> Vec<f64> {
    let cfg = StftConfig::default();
    let mut a = Analyzer::new(cfg, 1).unwrap();
    let mut s = Synthesizer::new(cfg).unwrap();
    let hop = cfg.hop;
    let total = x.len() + pad;
    let mut out = Vec::with_capacity(total.div_ceil(hop) * hop);
    let mut buf = vec![0.0; hop];
    for t in 0..total.div_ceil(hop) {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = x.get(t * hop + i).copied().unwrap_or(0.0);
        }
        let frame = a.analyze(&[&buf]).unwrap();
        out.extend(s.synthesize(frame.channel(0)).unwrap());
    }
    out
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}

/// `max |a - b| / max |b|`.
pub fn rel_error(actual: &[f64], expected: &[f64]) -> f64 {
    assert_eq!(actual.len(), expected.len());
    let scale = expected.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let err = actual
        .iter()
        .zip(expected)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if scale == 0.0 {
        err
    } else {
        err / scale
    }
}

pub struct GoldenResult {
    pub tolerance: f64,
    pub seed: f64,
    /// Relative error per golden tensor.
    pub errors: Vec<(String, f64)>,
}

impl GoldenResult {
    pub fn worst(&self) -> f64 {
        self.errors.iter().map(|(_, e)| *e).fold(0.0, f64::max)
    }
}

/// Runs the network over a committed golden case and compares every
/// recorded intermediate.
pub fn check_golden(case: &str) -> GoldenResult {
    let weights = Arc::new(
        ModelWeights::load(fixture(&format!("golden_{case}_weights.npw1"))).expect("weights"),
    );
    let golden = Container::read(fixture(&format!("golden_{case}.npw1"))).expect("golden");
    let hp = weights.hparams;
    let (m, f, h) = (hp.channels, hp.bins, hp.hidden);
    let c = hp.spatial_channels();
    let input_re = golden.require("input.re").unwrap();
    let input_im = golden.require("input.im").unwrap();
    let frames = input_re.dims[0];
    assert_eq!(input_re.dims, vec![frames, m, f]);

    let mut net = MaskNet::new(weights);
    let mut got: Vec<(&str, Vec<f64>)> = vec![
        ("spatial_out", Vec::new()),
        ("temporal_in", Vec::new()),
        ("gru_out", Vec::new()),
        ("mask.re", Vec::new()),
        ("mask.im", Vec::new()),
    ];
    for t in 0..frames {
        let mut frame = SpectralFrame::zeros(m, f);
        for k in 0..m {
            for b in 0..f {
                let i = (t * m + k) * f + b;
                frame.set(
                    k,
                    b,
                    Complex64::new(input_re.data[i] as f64, input_im.data[i] as f64),
                );
            }
        }
        let mask = net.forward(&frame).unwrap();
        // Spatial output is stored [bins][2M]; the golden layout is [2M][bins].
        let so = net.spatial_out();
        for ch in 0..c {
            for b in 0..f {
                got[0].1.push(so[b * c + ch] as f64);
            }
        }
        got[1].1.extend(net.temporal_in().iter().map(|&v| v as f64));
        got[2]
            .1
            .extend(net.recurrent_out().iter().map(|&v| v as f64));
        for k in 0..m {
            for b in 0..f {
                got[3].1.push(mask.get(k, b).re);
                got[4].1.push(mask.get(k, b).im);
            }
        }
    }
    assert_eq!(got[2].1.len(), frames * h);
    let errors = got
        .into_iter()
        .map(|(name, values)| {
            let expected: Vec<f64> = golden
                .require(name)
                .unwrap()
                .data
                .iter()
                .map(|&v| v as f64)
                .collect();
            (name.to_string(), rel_error(&values, &expected))
        })
        .collect();
    let scalar = |n: &str| golden.require(n).unwrap().data[0] as f64;
    GoldenResult {
        tolerance: scalar("meta.tolerance"),
        seed: scalar("meta.seed"),
        errors,
    }
}

/// Textbook GRU in f64 on full weight matrices (`[3H][I]`, `[3H][H]`,
/// gate order reset, update, candidate).
pub struct DenseGru {
    pub inputs: usize,
    pub hidden: usize,
    pub w_ih: Vec<f64>,
    pub w_hh: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseGru {
    pub fn from_cell(c: &GruCell) -> Self {
        let f = |v: &[f32]| v.iter().map(|&x| x as f64).collect();
        Self {
            inputs: c.inputs,
            hidden: c.hidden,
            w_ih: f(&c.w_ih),
            w_hh: f(&c.w_hh),
            bias: f(&c.bias),
        }
    }

    fn matvec(w: &[f64], cols: usize, x: &[f64]) -> Vec<f64> {
        w.chunks_exact(cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn step(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let n = self.hidden;
        let gi = Self::matvec(&self.w_ih, self.inputs, x);
        let gh = Self::matvec(&self.w_hh, n, h);
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        (0..n)
            .map(|j| {
                let r = sig(gi[j] + gh[j] + self.bias[j]);
                let z = sig(gi[n + j] + gh[n + j] + self.bias[n + j]);
                let c = (gi[2 * n + j] + self.bias[2 * n + j] + r * gh[2 * n + j]).tanh();
                (1.0 - z) * c + z * h[j]
            })
            .collect()
    }
}

pub fn tensor_f64(t: &Tensor) -> Vec<f64> {
    t.data.iter().map(|&v| v as f64).collect()
}
