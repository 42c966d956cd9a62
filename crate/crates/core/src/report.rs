//! Analytic complexity report and learned-parameter dump.
//!
//! Counting convention:
//! * one real multiply-add is one MAC;
//! * a real-by-complex multiply is 2 MACs, a complex-by-complex multiply 4;
//! * nonlinearities, additions without a multiply and the FFTs are not counted;
//! * the PMWF is charged `M^3` complex operations for the inversion plus
//!   `2 M^3` for the matrix products, per bin and frame;
//! * MMAC/s = MACs per frame x frame rate (`sample_rate / hop`).

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::controls::sigmoid;
use crate::masknet::{Hyperparams, ModelWeights};
use crate::stft::StftConfig;

pub const MACS_PER_COMPLEX_MUL: u64 = 4;
pub const MACS_PER_REAL_COMPLEX_MUL: u64 = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportItem {
    pub name: String,
    pub params: u64,
    pub macs_per_frame: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityReport {
    pub items: Vec<ReportItem>,
    pub frame_rate: f64,
}

impl ComplexityReport {
    pub fn total_params(&self) -> u64 {
        self.items.iter().map(|i| i.params).sum()
    }

    pub fn total_macs_per_frame(&self) -> u64 {
        self.items.iter().map(|i| i.macs_per_frame).sum()
    }

    pub fn mmacs_per_second(&self) -> f64 {
        self.total_macs_per_frame() as f64 * self.frame_rate / 1e6
    }

    /// MMAC/s of the items whose name starts with `prefix`.
    pub fn mmacs_for(&self, prefix: &str) -> f64 {
        self.items
            .iter()
            .filter(|i| i.name.starts_with(prefix))
            .map(|i| i.macs_per_frame)
            .sum::<u64>() as f64
            * self.frame_rate
            / 1e6
    }

    pub fn item(&self, name: &str) -> Option<&ReportItem> {
        self.items.iter().find(|i| i.name == name)
    }

    /// Human-readable table.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<28} {:>10} {:>14} {:>10}",
            "item", "params", "MACs/frame", "MMAC/s"
        );
        for i in &self.items {
            let _ = writeln!(
                s,
                "{:<28} {:>10} {:>14} {:>10.4}",
                i.name,
                i.params,
                i.macs_per_frame,
                i.macs_per_frame as f64 * self.frame_rate / 1e6
            );
        }
        let _ = writeln!(
            s,
            "{:<28} {:>10} {:>14} {:>10.4}",
            "total",
            self.total_params(),
            self.total_macs_per_frame(),
            self.mmacs_per_second()
        );
        let _ = writeln!(s, "frame rate: {} frames/s", self.frame_rate);
        s
    }
}

/// Pure function of the architecture and the STFT framing.
pub fn complexity(hp: &Hyperparams, stft: &StftConfig) -> ComplexityReport {
    let (m, f, h, r) = (
        hp.channels as u64,
        hp.bins as u64,
        hp.hidden as u64,
        hp.splits as u64,
    );
    let mut items = Vec::new();
    let mut push = |name: String, params: u64, macs: u64| {
        items.push(ReportItem {
            name,
            params,
            macs_per_frame: macs,
        })
    };

    for l in 0..hp.spatial_layers {
        let (ci, co) = hp.spatial_dims(l);
        let (ci, co) = (ci as u64, co as u64);
        push(format!("spatial.{l}"), f * ci * co + co, f * ci * co);
    }
    push("encoder".into(), f * h + h, f * h);
    let s = h / r;
    for l in 0..hp.temporal_layers {
        // Per split: W_ih and W_hh (3 gates each) plus one bias per gate.
        let weights = r * 2 * 3 * s * s;
        push(format!("gru.{l}"), weights + r * 3 * s, weights);
    }
    push("decoder".into(), h * f + f, h * f);
    push(
        "mask_application".into(),
        0,
        m * f * MACS_PER_REAL_COMPLEX_MUL,
    );
    push("controls".into(), 5 * f, 0);
    push("pmwf".into(), 0, f * 3 * m * m * m * MACS_PER_COMPLEX_MUL);
    ComplexityReport {
        items,
        frame_rate: stft.frame_rate(),
    }
}

/// Complexity of a loaded model; the analytic parameter count is checked
/// against the stored tensors by the test suite.
pub fn report(weights: &ModelWeights, stft: &StftConfig) -> ComplexityReport {
    complexity(&weights.hparams, stft)
}

pub const DUMP_HEADER: &str = "frequency_bin,alpha_ss,alpha_nn,beta0,p_a,p_b";

/// CSV of the learned per-frequency controls, smoothing gains passed through
/// the sigmoid.
pub fn dump_params_csv(weights: &ModelWeights) -> String {
    let c = &weights.controls;
    let mut s = String::from(DUMP_HEADER);
    s.push('\n');
    for k in 0..c.bins() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            k,
            sigmoid(c.alpha0_ss[k]),
            sigmoid(c.alpha0_nn[k]),
            c.beta0[k],
            c.p_a[k],
            c.p_b[k]
        );
    }
    s
}

pub fn dump_params(weights: &ModelWeights, path: impl AsRef<Path>) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(dump_params_csv(weights).as_bytes())?;
    f.flush()
}
