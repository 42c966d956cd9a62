//! Oracle-mask ablation over the synthetic evaluation set.
//!
//! Prints the mean output SNR at channel 0 for each control variant.
//! Usage: cargo run --release -p neural-pmwf --example ablation

use neural_pmwf::controls::{AlphaMode, BetaMode, ControlVectors};
use neural_pmwf::engine::{enhance_signal, Engine, EngineConfig, MaskSource};
use neural_pmwf::metrics::snr;
use neural_pmwf::scene::{evaluation_set, generate};

fn desk_controls(bins: usize) -> ControlVectors {
    ControlVectors {
        p_a: vec![10.0; bins],
        p_b: vec![-5.0; bins],
        beta0: vec![20.0; bins],
        alpha0_ss: vec![0.0; bins],
        alpha0_nn: vec![0.0; bins],
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let p_a: f64 = args.get(1).map_or(10.0, |v| v.parse().unwrap());
    let p_b: f64 = args.get(2).map_or(-5.0, |v| v.parse().unwrap());
    let beta0: f64 = args.get(3).map_or(20.0, |v| v.parse().unwrap());
    let alpha: f64 = args.get(4).map_or(0.1, |v| v.parse().unwrap());
    let scenes: Vec<_> = evaluation_set().iter().map(generate).collect();
    let variants: Vec<(&str, BetaMode, AlphaMode)> = vec![
        ("beta spp", BetaMode::SppDriven, AlphaMode::Fixed(alpha)),
        ("beta 0", BetaMode::Fixed(0.0), AlphaMode::Fixed(alpha)),
        ("beta 1", BetaMode::Fixed(1.0), AlphaMode::Fixed(alpha)),
        ("beta 10", BetaMode::Fixed(10.0), AlphaMode::Fixed(alpha)),
        ("alpha cum", BetaMode::SppDriven, AlphaMode::CumulativeMean),
    ];
    for (name, beta_mode, alpha_mode) in variants {
        let mut all = Vec::new();
        let mut tv = Vec::new();
        for s in &scenes {
            let config = EngineConfig {
                beta_mode,
                alpha_mode,
                mask_source: MaskSource::Oracle,
                ..EngineConfig::default()
            };
            let mut c = desk_controls(config.stft.n_bins());
            c.p_a.fill(p_a);
            c.p_b.fill(p_b);
            c.beta0.fill(beta0);
            let mut e = Engine::with_controls(config, 5, c).unwrap();
            let out = enhance_signal(&mut e, &s.mixture, Some(&s.clean)).unwrap();
            let v = snr(s.reference(), &out).unwrap();
            all.push(v);
            if s.config.time_varying {
                tv.push(v);
            }
        }
        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        println!(
            "{name:<10} all {:7.3} dB  time-varying {:7.3} dB",
            mean(&all),
            mean(&tv)
        );
    }
}
