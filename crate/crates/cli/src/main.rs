//! Command-line front end: enhancement, metrics, complexity report and
//! learned-parameter dump.
//!
//! On failure a single line `error kind=<Kind> message=<text>` is printed to
//! stderr and the process exits with status 1.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use neural_pmwf::engine::{enhance_signal, Engine, EngineConfig, EngineError, MaskSource};
use neural_pmwf::masknet::ModelWeights;
use neural_pmwf::metrics::{si_sdr, snr, MetricsError};
use neural_pmwf::npw1::ContainerError;
use neural_pmwf::report::{dump_params, report};
use neural_pmwf::wav::{read_wav, write_wav, AudioBuffer, WavError};

#[derive(Parser)]
#[command(
    name = "neural-pmwf",
    version,
    about = "Multichannel speech enhancement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enhance a multichannel WAV file into a mono estimate of the
    /// reference-channel speech.
    Enhance {
        #[arg(long)]
        input: PathBuf,
        /// NPW1 weights; required by the neural mask provider, optional
        /// otherwise (supplies the control vectors).
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Flat JSON configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        /// Clean multichannel reference for the oracle mask provider.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// SNR and SI-SDR of an estimate against a reference (first channel of each).
    Metrics {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
    },
    /// Parameter and MAC count of the architecture stored in a weight file.
    Report {
        #[arg(long)]
        weights: PathBuf,
    },
    /// Per-frequency learned control parameters as CSV.
    DumpParams {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = format!("{e:#}").replace('\n', " ");
            eprintln!("error kind={} message={message}", error_kind(&e));
            ExitCode::FAILURE
        }
    }
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if let Some(w) = cause.downcast_ref::<WavError>() {
            return match w {
                WavError::UnsupportedFormat(_) => "UnsupportedFormat",
                WavError::CorruptHeader(_) => "CorruptHeader",
                WavError::IoFailure(_) => "IoFailure",
                WavError::InvalidBuffer(_) => "InvalidBuffer",
            };
        }
        if let Some(m) = cause.downcast_ref::<MetricsError>() {
            return match m {
                MetricsError::LengthMismatch(..) => "LengthMismatch",
                MetricsError::ZeroReference => "ZeroReference",
            };
        }
        if let Some(c) = cause.downcast_ref::<ContainerError>() {
            return container_kind(c);
        }
        if let Some(en) = cause.downcast_ref::<EngineError>() {
            return match en {
                EngineError::Stft(_) => "StftError",
                EngineError::MaskNet(_) => "ShapeMismatch",
                EngineError::Container(c) => container_kind(c),
                EngineError::ShapeMismatch(_) => "ShapeMismatch",
                EngineError::MissingReference => "MissingReference",
                EngineError::InvalidConfig(_) => "InvalidConfig",
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "IoFailure";
        }
    }
    "Error"
}

fn container_kind(c: &ContainerError) -> &'static str {
    match c {
        ContainerError::BadMagic => "BadMagic",
        ContainerError::UnsupportedVersion(_) => "UnsupportedVersion",
        ContainerError::TruncatedContainer(_) => "TruncatedContainer",
        ContainerError::UnsupportedDtype { .. } => "UnsupportedDtype",
        ContainerError::BadName => "BadName",
        ContainerError::DuplicateTensor(_) => "DuplicateTensor",
        ContainerError::MissingTensor(_) => "MissingTensor",
        ContainerError::ShapeMismatch { .. } => "ShapeMismatch",
        ContainerError::TrailingBytes => "TrailingBytes",
        ContainerError::Io(_) => "IoFailure",
    }
}

fn load_weights(path: &Path) -> Result<ModelWeights> {
    ModelWeights::load(path).with_context(|| format!("loading weights {}", path.display()))
}

fn read_audio(path: &Path) -> Result<AudioBuffer> {
    read_wav(path).with_context(|| format!("reading {}", path.display()))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Enhance {
            input,
            weights,
            config,
            output,
            reference,
        } => {
            let config = match config {
                Some(p) => EngineConfig::load(&p)?,
                None => EngineConfig::default(),
            };
            let mix = read_audio(&input)?;
            if mix.sample_rate != config.stft.sample_rate {
                return Err(WavError::UnsupportedFormat(format!(
                    "sample rate {} Hz, engine runs at {} Hz",
                    mix.sample_rate, config.stft.sample_rate
                ))
                .into());
            }
            let reference = match (&config.mask_source, reference) {
                (MaskSource::Oracle, Some(p)) => Some(read_audio(&p)?),
                (MaskSource::Oracle, None) => return Err(EngineError::MissingReference.into()),
                (_, _) => None,
            };
            let weights = weights.map(|p| load_weights(&p)).transpose()?.map(Arc::new);
            let mut engine = Engine::new(config, mix.num_channels(), weights)?;
            let out = enhance_signal(
                &mut engine,
                &mix.channels,
                reference.as_ref().map(|r| r.channels.as_slice()),
            )?;
            write_wav(&output, &AudioBuffer::mono(mix.sample_rate, out))
                .with_context(|| format!("writing {}", output.display()))?;
        }
        Command::Metrics {
            reference,
            estimate,
        } => {
            let r = read_audio(&reference)?;
            let e = read_audio(&estimate)?;
            let (r, e) = (&r.channels[0], &e.channels[0]);
            println!("snr_db={:.4} si_sdr_db={:.4}", snr(r, e)?, si_sdr(r, e)?);
        }
        Command::Report { weights } => {
            let w = load_weights(&weights)?;
            let r = report(&w, &EngineConfig::default().stft);
            print!("{}", r.render());
            println!(
                "params={} mmacs_per_second={:.4}",
                r.total_params(),
                r.mmacs_per_second()
            );
        }
        Command::DumpParams { weights, out } => {
            let w = load_weights(&weights)?;
            dump_params(&w, &out).with_context(|| format!("writing {}", out.display()))?;
        }
    }
    Ok(())
}
