//! Parameterized multichannel Wiener filter.
//!
//! With `gamma = inv(Phi_nn) * Phi_ss` the filter is
//! `h = gamma[:, ref] / (beta + trace(gamma))`, applied to the mixture as
//! `h^H y`. `beta = 0` gives the MVDR beamformer and `beta = 1` the MWF.

use crate::linalg::{self, CMatrix, CVector, LinalgError};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PmwfError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("filter denominator {0:e} is degenerate")]
    DegenerateDenominator(f64),
    #[error("reference channel {0} out of range for {1} channels")]
    BadReference(usize, usize),
}

pub const DENOMINATOR_FLOOR: f64 = 1e-12;

pub fn compute_filter(
    phi_nn: &CMatrix,
    phi_ss: &CMatrix,
    beta: f64,
    ref_channel: usize,
    loading: f64,
) -> Result<CVector, PmwfError> {
    let m = phi_nn.dim();
    if ref_channel >= m {
        return Err(PmwfError::BadReference(ref_channel, m));
    }
    let inv = linalg::regularized_inverse(phi_nn, loading)?;
    let gamma = linalg::matmul(&inv, phi_ss)?;
    // trace(A^-1 B) for Hermitian PSD A, B is real up to rounding
    let denom = beta + gamma.trace().re;
    if denom.is_nan() || denom.abs() < DENOMINATOR_FLOOR {
        return Err(PmwfError::DegenerateDenominator(denom));
    }
    let scale = 1.0 / denom;
    Ok(CVector(
        (0..m).map(|i| gamma[(i, ref_channel)] * scale).collect(),
    ))
}

/// `h^H y`.
#[inline]
pub fn apply_filter(h: &CVector, y: &[Complex64]) -> Complex64 {
    h.dot_h(y)
}

/// Per-bin filters with hold-last-valid semantics.
#[derive(Debug, Clone)]
pub struct FilterBank {
    filters: Vec<CVector>,
    valid: Vec<bool>,
}

impl FilterBank {
    /// Starts with zero filters (silent output until the first valid update).
    pub fn new(channels: usize, bins: usize) -> Self {
        Self {
            filters: vec![CVector::zeros(channels); bins],
            valid: vec![false; bins],
        }
    }

    pub fn bins(&self) -> usize {
        self.filters.len()
    }

    pub fn filter(&self, bin: usize) -> &CVector {
        &self.filters[bin]
    }

    /// True if the filter in `bin` came from this frame's statistics.
    pub fn is_valid(&self, bin: usize) -> bool {
        self.valid[bin]
    }

    /// Stores `result` if it is usable, otherwise keeps the previous filter.
    pub fn offer(&mut self, bin: usize, result: Result<CVector, PmwfError>) {
        match result {
            Ok(h) if h.is_finite() => {
                self.filters[bin] = h;
                self.valid[bin] = true;
            }
            _ => self.valid[bin] = false,
        }
    }

    /// Replaces the filter in `bin` unconditionally.
    pub fn set(&mut self, bin: usize, h: CVector) {
        self.filters[bin] = h;
        self.valid[bin] = true;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::herm_outer;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn scalar_wiener_gain() {
        let one = CMatrix::identity(1);
        let h = compute_filter(&one, &one, 1.0, 0, 0.0).unwrap();
        assert!(close(h[0], c(0.5, 0.0), 1e-11));
    }

    #[test]
    fn identity_covariances_mvdr() {
        let i2 = CMatrix::identity(2);
        let h = compute_filter(&i2, &i2, 0.0, 0, 0.0).unwrap();
        assert!(close(h[0], c(0.5, 0.0), 1e-11));
        assert!(close(h[1], c(0.0, 0.0), 1e-11));
    }

    #[test]
    fn rank_one_speech_is_passed_undistorted() {
        let d = [c(1.0, 0.0), c(0.0, 1.0)];
        let h = compute_filter(&CMatrix::identity(2), &herm_outer(&d), 0.0, 0, 0.0).unwrap();
        assert!(close(h[0], c(0.5, 0.0), 1e-11));
        assert!(close(h[1], c(0.0, 0.5), 1e-11));
        assert!(close(apply_filter(&h, &d), c(1.0, 0.0), 1e-11));
        let s = c(3.0, 0.0);
        let y: Vec<_> = d.iter().map(|x| x * s).collect();
        assert!(close(apply_filter(&h, &y), c(3.0, 0.0), 1e-10));
    }

    #[test]
    fn apply_trivial_filters() {
        let y = [c(0.3, -0.2), c(1.0, 1.0), c(-2.0, 0.5)];
        assert_eq!(apply_filter(&CVector::unit(3, 0), &y), y[0]);
        assert_eq!(apply_filter(&CVector::zeros(3), &y), c(0.0, 0.0));
    }

    #[test]
    fn degenerate_cases() {
        let z = CMatrix::zeros(2);
        assert!(matches!(
            compute_filter(&CMatrix::identity(2), &z, 0.0, 0, 0.0),
            Err(PmwfError::DegenerateDenominator(_))
        ));
        assert!(matches!(
            compute_filter(&CMatrix::identity(2), &z, 0.0, 2, 0.0),
            Err(PmwfError::BadReference(2, 2))
        ));
    }

    #[test]
    fn filter_bank_holds_last_valid() {
        let mut fb = FilterBank::new(2, 1);
        assert_eq!(*fb.filter(0), CVector::zeros(2));
        fb.offer(0, Ok(CVector::unit(2, 1)));
        assert!(fb.is_valid(0));
        fb.offer(0, Err(PmwfError::DegenerateDenominator(0.0)));
        assert!(!fb.is_valid(0));
        assert_eq!(*fb.filter(0), CVector::unit(2, 1));
        fb.offer(0, Ok(CVector(vec![c(f64::NAN, 0.0), c(0.0, 0.0)])));
        assert_eq!(*fb.filter(0), CVector::unit(2, 1));
    }
}
