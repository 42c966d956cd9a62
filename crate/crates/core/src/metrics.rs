//! Energy-ratio quality metrics. All results are capped to +/-100 dB.

use thiserror::Error;

pub const DB_CAP: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("length mismatch: reference {0}, estimate {1}")]
    LengthMismatch(usize, usize),
    #[error("reference signal has zero energy")]
    ZeroReference,
}

fn capped_db(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        return if num == 0.0 { -DB_CAP } else { DB_CAP };
    }
    if num == 0.0 {
        return -DB_CAP;
    }
    (10.0 * (num / den).log10()).clamp(-DB_CAP, DB_CAP)
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// `10 log10(|s|^2 / |s - s_hat|^2)`.
pub fn snr(reference: &[f64], estimate: &[f64]) -> Result<f64, MetricsError> {
    if reference.len() != estimate.len() {
        return Err(MetricsError::LengthMismatch(
            reference.len(),
            estimate.len(),
        ));
    }
    let err: f64 = reference
        .iter()
        .zip(estimate)
        .map(|(s, e)| (s - e).powi(2))
        .sum();
    Ok(capped_db(energy(reference), err))
}

/// Scale-invariant SDR on zero-mean copies of both signals.
pub fn si_sdr(reference: &[f64], estimate: &[f64]) -> Result<f64, MetricsError> {
    if reference.len() != estimate.len() {
        return Err(MetricsError::LengthMismatch(
            reference.len(),
            estimate.len(),
        ));
    }
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len().max(1) as f64;
    let (ms, me) = (mean(reference), mean(estimate));
    let s: Vec<f64> = reference.iter().map(|v| v - ms).collect();
    let e: Vec<f64> = estimate.iter().map(|v| v - me).collect();
    let ss = energy(&s);
    if ss == 0.0 {
        return Err(MetricsError::ZeroReference);
    }
    let a = s.iter().zip(&e).map(|(x, y)| x * y).sum::<f64>() / ss;
    let target = a * a * ss;
    let residual: f64 = s.iter().zip(&e).map(|(x, y)| (y - a * x).powi(2)).sum();
    Ok(capped_db(target, residual))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FileMetrics {
    pub name: String,
    pub snr_db: f64,
    pub si_sdr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub files: Vec<FileMetrics>,
}

impl MetricsReport {
    pub fn push(
        &mut self,
        name: impl Into<String>,
        reference: &[f64],
        estimate: &[f64],
    ) -> Result<(), MetricsError> {
        self.files.push(FileMetrics {
            name: name.into(),
            snr_db: snr(reference, estimate)?,
            si_sdr_db: si_sdr(reference, estimate)?,
        });
        Ok(())
    }

    pub fn mean_snr_db(&self) -> f64 {
        self.files.iter().map(|f| f.snr_db).sum::<f64>() / self.files.len().max(1) as f64
    }

    pub fn mean_si_sdr_db(&self) -> f64 {
        self.files.iter().map(|f| f.si_sdr_db).sum::<f64>() / self.files.len().max(1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn signal() -> Vec<f64> {
        (0..1000)
            .map(|i| ((i as f64) * 0.37).sin() + 0.3 * ((i as f64) * 0.011).cos())
            .collect()
    }

    /// Component of `e` orthogonal to both `s` and the constant vector.
    fn orthogonal_to(s: &[f64], seed: u64) -> Vec<f64> {
        let n = s.len() as f64;
        let mut e: Vec<f64> = (0..s.len())
            .map(|i| (((i as u64 * 2654435761 + seed) % 1000) as f64 / 500.0) - 1.0)
            .collect();
        let me = e.iter().sum::<f64>() / n;
        e.iter_mut().for_each(|v| *v -= me);
        let ms = s.iter().sum::<f64>() / n;
        let sc: Vec<f64> = s.iter().map(|v| v - ms).collect();
        let proj = sc.iter().zip(&e).map(|(a, b)| a * b).sum::<f64>() / energy(&sc);
        e.iter_mut().zip(&sc).for_each(|(v, x)| *v -= proj * x);
        e
    }

    #[test]
    fn snr_cases() {
        let s = signal();
        assert_eq!(snr(&s, &s).unwrap(), DB_CAP);
        let doubled: Vec<f64> = s.iter().map(|v| 2.0 * v).collect();
        assert!(snr(&s, &doubled).unwrap().abs() < 1e-12);
        let e = orthogonal_to(&s, 1);
        let scale = (energy(&s) / energy(&e)).sqrt();
        let noisy: Vec<f64> = s.iter().zip(&e).map(|(a, b)| a + scale * b).collect();
        assert!(snr(&s, &noisy).unwrap().abs() < 1e-9);
        assert_eq!(
            snr(&s, &s[..10]),
            Err(MetricsError::LengthMismatch(1000, 10))
        );
    }

    #[test]
    fn si_sdr_cases() {
        let s = signal();
        let half: Vec<f64> = s.iter().map(|v| 0.5 * v).collect();
        assert_eq!(si_sdr(&s, &half).unwrap(), DB_CAP);
        let e = orthogonal_to(&s, 2);
        assert_eq!(si_sdr(&s, &e).unwrap(), -DB_CAP);
        let ms = s.iter().sum::<f64>() / s.len() as f64;
        let ss: f64 = s.iter().map(|v| (v - ms).powi(2)).sum();
        let scale = (ss / 10.0 / energy(&e)).sqrt();
        let est: Vec<f64> = s.iter().zip(&e).map(|(a, b)| a + scale * b).collect();
        assert!((si_sdr(&s, &est).unwrap() - 10.0).abs() < 1e-9);
        assert_eq!(
            si_sdr(&[0.0; 4], &[1.0; 4]),
            Err(MetricsError::ZeroReference)
        );
    }

    #[test]
    fn report_aggregates() {
        let s = signal();
        let mut r = MetricsReport::default();
        r.push("a", &s, &s).unwrap();
        let doubled: Vec<f64> = s.iter().map(|v| 2.0 * v).collect();
        r.push("b", &s, &doubled).unwrap();
        assert!((r.mean_snr_db() - 50.0).abs() < 1e-9);
        assert_eq!(r.mean_si_sdr_db(), DB_CAP);
    }

    proptest! {
        #[test]
        fn sign_flip_and_scale_invariance(seed in 0u64..500, k in 0.1f64..10.0) {
            let s = signal();
            let e = orthogonal_to(&s, seed);
            let est: Vec<f64> = s.iter().zip(&e).map(|(a, b)| a + 0.3 * b).collect();
            let neg = |x: &[f64]| x.iter().map(|v| -v).collect::<Vec<_>>();
            prop_assert!((snr(&s, &est).unwrap() - snr(&neg(&s), &neg(&est)).unwrap()).abs() < 1e-9);
            prop_assert!((si_sdr(&s, &est).unwrap() - si_sdr(&neg(&s), &neg(&est)).unwrap()).abs() < 1e-9);
            let scaled: Vec<f64> = est.iter().map(|v| k * v).collect();
            prop_assert!((si_sdr(&s, &est).unwrap() - si_sdr(&s, &scaled).unwrap()).abs() < 1e-9);
        }
    }
}
