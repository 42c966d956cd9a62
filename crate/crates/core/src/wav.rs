//! WAV reading and writing.
//!
//! Reads 16/24/32-bit integer PCM and 32-bit float; integer samples are
//! scaled by `1 / 2^(bits-1)`. Always writes 32-bit float.

use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt WAV header: {0}")]
    CorruptHeader(String),
    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),
    #[error("invalid audio buffer: {0}")]
    InvalidBuffer(String),
}

impl From<hound::Error> for WavError {
    fn from(e: hound::Error) -> Self {
        match e {
            hound::Error::IoError(io) => WavError::IoFailure(io),
            hound::Error::FormatError(m) => WavError::CorruptHeader(m.to_string()),
            hound::Error::Unsupported => WavError::UnsupportedFormat("unsupported encoding".into()),
            hound::Error::InvalidSampleFormat => {
                WavError::UnsupportedFormat("invalid sample format".into())
            }
            hound::Error::TooWide => WavError::UnsupportedFormat("sample too wide".into()),
            hound::Error::UnfinishedSample => {
                WavError::CorruptHeader("data chunk ends mid-sample".into())
            }
        }
    }
}

/// Planar multichannel audio.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub sample_rate: u32,
    /// One vector per channel, all the same length.
    pub channels: Vec<Vec<f64>>,
}

impl AudioBuffer {
    pub fn new(sample_rate: u32, channels: Vec<Vec<f64>>) -> Result<Self, WavError> {
        let buf = Self {
            sample_rate,
            channels,
        };
        buf.validate()?;
        Ok(buf)
    }

    pub fn mono(sample_rate: u32, samples: Vec<f64>) -> Self {
        Self {
            sample_rate,
            channels: vec![samples],
        }
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn num_frames(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    fn validate(&self) -> Result<(), WavError> {
        if self.channels.is_empty() {
            return Err(WavError::InvalidBuffer("no channels".into()));
        }
        if self.channels.len() > u16::MAX as usize {
            return Err(WavError::InvalidBuffer("too many channels".into()));
        }
        let n = self.num_frames();
        if self.channels.iter().any(|c| c.len() != n) {
            return Err(WavError::InvalidBuffer("ragged channels".into()));
        }
        if self.channels.iter().flatten().any(|v| !v.is_finite()) {
            return Err(WavError::InvalidBuffer("non-finite samples".into()));
        }
        Ok(())
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer, WavError> {
    let reader = hound::WavReader::open(path)?;
    read_from(reader)
}

pub fn read_wav_bytes(bytes: &[u8]) -> Result<AudioBuffer, WavError> {
    read_from(hound::WavReader::new(std::io::Cursor::new(bytes))?)
}

fn read_from<R: std::io::Read>(mut reader: hound::WavReader<R>) -> Result<AudioBuffer, WavError> {
    let spec = reader.spec();
    let m = spec.channels as usize;
    if m == 0 {
        return Err(WavError::CorruptHeader("zero channels".into()));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()?,
        (hound::SampleFormat::Int, bits @ (16 | 24 | 32)) => {
            let scale = 1.0 / (1u64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<Result<_, _>>()?
        }
        (fmt, bits) => {
            return Err(WavError::UnsupportedFormat(format!("{fmt:?} {bits}-bit")));
        }
    };
    let frames = interleaved.len() / m;
    let mut channels = vec![Vec::with_capacity(frames); m];
    for frame in interleaved.chunks_exact(m) {
        for (c, &v) in channels.iter_mut().zip(frame) {
            c.push(v);
        }
    }
    Ok(AudioBuffer {
        sample_rate: spec.sample_rate,
        channels,
    })
}

/// Writes 32-bit float WAV.
pub fn write_wav(path: impl AsRef<Path>, audio: &AudioBuffer) -> Result<(), WavError> {
    audio.validate()?;
    let spec = hound::WavSpec {
        channels: audio.num_channels() as u16,
        sample_rate: audio.sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(path, spec)?;
    for i in 0..audio.num_frames() {
        for c in &audio.channels {
            w.write_sample(c[i] as f32)?;
        }
    }
    w.finalize()?;
    Ok(())
}
