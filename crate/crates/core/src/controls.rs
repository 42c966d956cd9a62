//! Speech presence, distortion control and covariance smoothing factors.
//!
//! The per-frequency control vectors are learned gains shipped in the weight
//! container. Besides the SPP-driven laws, every ablation mode (fixed,
//! frequency-dependent, cumulative mean) is selectable so the filter can be
//! compared across strategies on the same input.

use serde::{Deserialize, Serialize};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// How the PMWF distortion parameter is chosen per bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BetaMode {
    /// Same value in every bin and frame (0 = MVDR, 1 = MWF).
    Fixed(f64),
    /// Learned, time-invariant `beta0[w]`.
    FreqDependent,
    /// `beta0[w] * (1 - spp[w])`.
    SppDriven,
}

/// How the covariance smoothing factors are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AlphaMode {
    /// `1/t`, i.e. a running mean from the first frame.
    CumulativeMean,
    Fixed(f64),
    /// `sigmoid(alpha0[w])`, per matrix.
    FreqDependent,
    /// Frequency-dependent factors gated by speech presence.
    SppDriven,
}

/// Learned per-frequency control gains.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlVectors {
    pub p_a: Vec<f64>,
    pub p_b: Vec<f64>,
    pub beta0: Vec<f64>,
    pub alpha0_ss: Vec<f64>,
    pub alpha0_nn: Vec<f64>,
}

impl ControlVectors {
    /// All-zero gains: SPP 0.5, beta0 0, sigmoid(alpha0) 0.5.
    pub fn neutral(bins: usize) -> Self {
        Self {
            p_a: vec![0.0; bins],
            p_b: vec![0.0; bins],
            beta0: vec![0.0; bins],
            alpha0_ss: vec![0.0; bins],
            alpha0_nn: vec![0.0; bins],
        }
    }

    pub fn bins(&self) -> usize {
        self.p_a.len()
    }

    /// Negative distortion gains would let the PMWF denominator cross zero.
    pub fn clamp_beta0(&mut self) {
        for b in &mut self.beta0 {
            *b = b.max(0.0);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlParams {
    pub vectors: ControlVectors,
    pub beta_mode: BetaMode,
    pub alpha_mode: AlphaMode,
}

impl ControlParams {
    pub fn new(vectors: ControlVectors, beta_mode: BetaMode, alpha_mode: AlphaMode) -> Self {
        Self {
            vectors,
            beta_mode,
            alpha_mode,
        }
    }

    pub fn bins(&self) -> usize {
        self.vectors.bins()
    }

    /// Speech presence from the reference-channel mask magnitude.
    pub fn estimate_spp(&self, g_ref_mag: &[f64], out: &mut [f64]) {
        let v = &self.vectors;
        for (w, (o, &g)) in out.iter_mut().zip(g_ref_mag).enumerate() {
            *o = sigmoid(v.p_a[w] * g + v.p_b[w]);
        }
    }

    pub fn compute_beta(&self, spp: &[f64], out: &mut [f64]) {
        match self.beta_mode {
            BetaMode::Fixed(value) => out.fill(value),
            BetaMode::FreqDependent => out.copy_from_slice(&self.vectors.beta0),
            BetaMode::SppDriven => {
                for ((o, &b0), &p) in out.iter_mut().zip(&self.vectors.beta0).zip(spp) {
                    *o = b0 * (1.0 - p);
                }
            }
        }
    }

    /// Smoothing factors for frame `t` (1-based count of frames seen so far,
    /// including the current one).
    pub fn compute_alphas(&self, spp: &[f64], t: u64, alpha_ss: &mut [f64], alpha_nn: &mut [f64]) {
        let v = &self.vectors;
        match self.alpha_mode {
            AlphaMode::CumulativeMean => {
                let a = 1.0 / t.max(1) as f64;
                alpha_ss.fill(a);
                alpha_nn.fill(a);
            }
            AlphaMode::Fixed(a) => {
                alpha_ss.fill(a);
                alpha_nn.fill(a);
            }
            AlphaMode::FreqDependent => {
                for w in 0..alpha_ss.len() {
                    alpha_ss[w] = sigmoid(v.alpha0_ss[w]);
                    alpha_nn[w] = sigmoid(v.alpha0_nn[w]);
                }
            }
            AlphaMode::SppDriven => {
                for w in 0..alpha_ss.len() {
                    alpha_ss[w] = sigmoid(v.alpha0_ss[w]) * spp[w];
                    alpha_nn[w] = sigmoid(v.alpha0_nn[w]) * (1.0 - spp[w]);
                }
            }
        }
    }
}
