//! Seeded synthetic multichannel scenes for evaluation.
//!
//! A scene is a speech-like harmonic source reaching every microphone with
//! its own integer-plus-fractional delay and gain, mixed with spatially
//! white (diffuse) Gaussian noise and a coloured directional interferer.
//! In time-varying scenes the interferer jumps to another position and
//! becomes louder halfway through. The noise is scaled so the mixture SNR
//! at channel 0 equals the requested value exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;

/// Half-length of the windowed-sinc fractional delay kernel.
const SINC_HALF: usize = 16;
/// Every channel is delayed by at least this many samples, which keeps the
/// sinc kernel causal.
const BASE_DELAY: f64 = SINC_HALF as f64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneConfig {
    pub seed: u64,
    pub channels: usize,
    pub sample_rate: u32,
    pub duration_s: f64,
    /// Mixture SNR at channel 0.
    pub snr_db: f64,
    /// Multiplies the noise after SNR scaling; 0 gives a clean mixture.
    pub noise_gain: f64,
    pub time_varying: bool,
}

impl SceneConfig {
    pub fn new(seed: u64, snr_db: f64, time_varying: bool) -> Self {
        Self {
            seed,
            channels: 5,
            sample_rate: 16_000,
            duration_s: 6.0,
            snr_db,
            noise_gain: 1.0,
            time_varying,
        }
    }

    pub fn num_samples(&self) -> usize {
        (self.duration_s * self.sample_rate as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub config: SceneConfig,
    /// Planar multichannel mixture.
    pub mixture: Vec<Vec<f64>>,
    /// Speech image at every microphone.
    pub clean: Vec<Vec<f64>>,
    /// Everything else.
    pub noise: Vec<Vec<f64>>,
}

impl Scene {
    /// Channel-0 speech image, the enhancement target.
    pub fn reference(&self) -> &[f64] {
        &self.clean[0]
    }
}

/// Fixed evaluation set: SNR in {-5, 0, 10} dB, four seeds each; every
/// other seed is time-varying.
pub fn evaluation_set() -> Vec<SceneConfig> {
    let mut out = Vec::new();
    for (i, &snr) in [-5.0, 0.0, 10.0].iter().enumerate() {
        for j in 0..4u64 {
            out.push(SceneConfig::new(1000 + 10 * i as u64 + j, snr, j % 2 == 1));
        }
    }
    out
}

pub fn generate(config: &SceneConfig) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.num_samples();
    let m = config.channels;
    let fs = config.sample_rate as f64;

    let source = speech_like(&mut rng, n, fs);
    let clean: Vec<Vec<f64>> = (0..m)
        .map(|k| {
            let (delay, gain) = if k == 0 {
                (BASE_DELAY, 1.0)
            } else {
                (
                    BASE_DELAY + rng.random_range(0.0..4.0),
                    rng.random_range(0.6..1.0),
                )
            };
            scaled(&fractional_delay(&source, delay), gain)
        })
        .collect();

    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let diffuse: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            let white: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
            one_pole(&white, 0.5)
        })
        .collect();

    let pole = rng.random_range(0.7..0.95);
    let interferer_src = one_pole(
        &(0..n).map(|_| normal.sample(&mut rng)).collect::<Vec<_>>(),
        pole,
    );
    let mut placement = || -> Vec<(f64, f64)> {
        (0..m)
            .map(|k| {
                if k == 0 {
                    (BASE_DELAY, 1.0)
                } else {
                    (
                        BASE_DELAY + rng.random_range(0.0..4.0),
                        rng.random_range(0.5..1.0),
                    )
                }
            })
            .collect()
    };
    let pos_a = placement();
    let pos_b = placement();
    let images = |pos: &[(f64, f64)]| -> Vec<Vec<f64>> {
        pos.iter()
            .map(|&(d, g)| scaled(&fractional_delay(&interferer_src, d), g))
            .collect()
    };
    let (img_a, img_b) = (images(&pos_a), images(&pos_b));
    let diffuse_rms = rms(&diffuse[0]);
    let interf_rms = rms(&img_a[0]).max(1e-12);
    let mid = n / 2;
    let fade = (0.02 * fs) as usize;

    let mut noise = vec![vec![0.0; n]; m];
    for k in 0..m {
        for i in 0..n {
            // Interferer at roughly twice the diffuse level, or switching
            // from a quiet position A to a loud position B.
            let interferer = if config.time_varying {
                let w = ((i as f64 - mid as f64) / fade as f64 + 0.5).clamp(0.0, 1.0);
                (1.0 - w) * 0.5 * img_a[k][i] + w * 4.0 * img_b[k][i]
            } else {
                2.0 * img_a[k][i]
            };
            noise[k][i] = diffuse[k][i] + interferer * diffuse_rms / interf_rms;
        }
    }

    let speech_energy: f64 = clean[0].iter().map(|v| v * v).sum();
    let noise_energy: f64 = noise[0].iter().map(|v| v * v).sum();
    let target = speech_energy / 10f64.powf(config.snr_db / 10.0);
    let scale = (target / noise_energy).sqrt() * config.noise_gain;
    for ch in &mut noise {
        ch.iter_mut().for_each(|v| *v *= scale);
    }
    let mixture = clean
        .iter()
        .zip(&noise)
        .map(|(s, v)| s.iter().zip(v).map(|(a, b)| a + b).collect())
        .collect();
    Scene {
        config: *config,
        mixture,
        clean,
        noise,
    }
}

/// Voiced harmonic source with syllable-rate gating, moving formants and a
/// gliding pitch. Peak level around 0.3.
fn speech_like(rng: &mut ChaCha8Rng, n: usize, fs: f64) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let mut start = (rng.random_range(0.05..0.2) * fs) as usize;
    let mut phase = 0.0f64;
    while start < n {
        let len = (rng.random_range(0.12..0.35) * fs) as usize;
        let f0_start = rng.random_range(95.0..230.0);
        let f0_end = f0_start * rng.random_range(0.8..1.25);
        let formants = [
            rng.random_range(300.0..900.0),
            rng.random_range(900.0..2300.0),
            rng.random_range(2300.0..3300.0),
        ];
        let level = rng.random_range(0.5..1.0);
        for i in 0..len.min(n - start) {
            let u = i as f64 / len as f64;
            let f0: f64 = f0_start + (f0_end - f0_start) * u;
            phase += 2.0 * PI * f0 / fs;
            let env = (PI * u).sin().powf(0.7) * level;
            let mut v = 0.0;
            let mut h = 1;
            while (h as f64) * f0 < 4000.0 {
                let fh = h as f64 * f0;
                let amp: f64 = formants
                    .iter()
                    .enumerate()
                    .map(|(j, &fm)| {
                        let bw = 80.0 + 60.0 * j as f64;
                        (-(fh - fm).powi(2) / (2.0 * bw * bw)).exp() / (1.0 + j as f64)
                    })
                    .sum::<f64>()
                    + 0.02;
                v += amp * (h as f64 * phase).sin();
                h += 1;
            }
            out[start + i] = 0.1 * env * v;
        }
        let gap = if rng.random_bool(0.15) {
            rng.random_range(0.3..0.7)
        } else {
            rng.random_range(0.03..0.15)
        };
        start += len + (gap * fs) as usize;
    }
    out
}

/// Delays `x` by `delay` samples (`delay >= SINC_HALF`) with a
/// Hann-windowed sinc kernel.
pub fn fractional_delay(x: &[f64], delay: f64) -> Vec<f64> {
    assert!(delay >= BASE_DELAY, "delay below kernel half-length");
    let int = delay.floor() as usize - SINC_HALF;
    let frac = delay - delay.floor();
    let taps = 2 * SINC_HALF + 1;
    let kernel: Vec<f64> = (0..taps)
        .map(|j| {
            let t = j as f64 - SINC_HALF as f64 - frac;
            let sinc = if t.abs() < 1e-12 {
                1.0
            } else {
                (PI * t).sin() / (PI * t)
            };
            let w = 0.5 + 0.5 * (PI * t / (SINC_HALF as f64 + 1.0)).cos();
            sinc * w
        })
        .collect();
    let mut y = vec![0.0; x.len()];
    for (i, out) in y.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &k) in kernel.iter().enumerate() {
            if let Some(src) = i.checked_sub(int + j) {
                acc += k * x[src];
            }
        }
        *out = acc;
    }
    y
}

fn one_pole(x: &[f64], pole: f64) -> Vec<f64> {
    let mut state = 0.0;
    x.iter()
        .map(|&v| {
            state = pole * state + (1.0 - pole) * v;
            state
        })
        .collect()
}

fn scaled(x: &[f64], g: f64) -> Vec<f64> {
    x.iter().map(|v| v * g).collect()
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt()
}
