//! Recursive speech/noise spatial covariance tracking, one pair per bin.

use crate::linalg::CMatrix;
use crate::stft::SpectralFrame;
use num_complex::Complex64;

/// Default initial diagonal, relative to unit signal power.
pub const DEFAULT_EPSILON_INIT: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct CovarianceState {
    channels: usize,
    phi_ss: Vec<CMatrix>,
    phi_nn: Vec<CMatrix>,
    frame_count: u64,
    scratch: Vec<Complex64>,
}

impl CovarianceState {
    /// Both matrices start at `epsilon * I` in every bin.
    pub fn new(channels: usize, bins: usize, epsilon: f64) -> Self {
        assert!(epsilon > 0.0, "epsilon must be positive");
        let init = CMatrix::scaled_identity(channels, epsilon);
        Self {
            channels,
            phi_ss: vec![init.clone(); bins],
            phi_nn: vec![init; bins],
            frame_count: 0,
            scratch: vec![Complex64::new(0.0, 0.0); channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn bins(&self) -> usize {
        self.phi_ss.len()
    }

    pub fn frame_count(&self) -> u64 {
        self.frame_count
    }

    pub fn phi_ss(&self, bin: usize) -> &CMatrix {
        &self.phi_ss[bin]
    }

    pub fn phi_nn(&self, bin: usize) -> &CMatrix {
        &self.phi_nn[bin]
    }

    /// One smoothing step in a single bin. Does not advance the frame counter.
    pub fn update_bin(
        &mut self,
        bin: usize,
        s_hat: &[Complex64],
        n_hat: &[Complex64],
        alpha_ss: f64,
        alpha_nn: f64,
    ) {
        let ss = &mut self.phi_ss[bin];
        ss.blend_outer(1.0 - alpha_ss, alpha_ss, s_hat);
        ss.symmetrize();
        let nn = &mut self.phi_nn[bin];
        nn.blend_outer(1.0 - alpha_nn, alpha_nn, n_hat);
        nn.symmetrize();
    }

    /// Updates every bin from the separated speech/noise frames and advances
    /// the frame counter.
    pub fn update(
        &mut self,
        s_hat: &SpectralFrame,
        n_hat: &SpectralFrame,
        alpha_ss: &[f64],
        alpha_nn: &[f64],
    ) {
        let mut s = std::mem::take(&mut self.scratch);
        let mut n = vec![Complex64::new(0.0, 0.0); self.channels];
        for bin in 0..self.bins() {
            s_hat.bin_vector_into(bin, &mut s);
            n_hat.bin_vector_into(bin, &mut n);
            self.update_bin(bin, &s, &n, alpha_ss[bin], alpha_nn[bin]);
        }
        self.scratch = s;
        self.frame_count += 1;
    }
}
