use std::path::Path;

use hound::{SampleFormat as HoundFormat, WavSpec};
use serde::{Deserialize, Serialize};

use super::Waveform;
use crate::error::{Error, Result};

/// On-disk sample encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleFormat {
    #[default]
    Pcm16,
    Pcm24,
    Float32,
}

fn hound_err(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        hound::Error::Unsupported => Error::UnsupportedEncoding(format!("{}", path.display())),
        other => Error::Format(format!("{}: {other}", path.display())),
    }
}

/// Reads a PCM16, PCM24 or float32 RIFF/WAVE file into a normalized waveform.
pub fn load_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path).map_err(|e| hound_err(path, e))?;
    let spec = reader.spec();
    let n_channels = spec.channels as usize;
    if !matches!(n_channels, 1 | 2 | 6) {
        return Err(Error::UnsupportedLayout(n_channels));
    }

    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (HoundFormat::Int, bits @ (16 | 24)) => {
            let scale = (1i64 << (bits - 1)) as f32;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f32 / scale))
                .collect::<Result<_, _>>()
                .map_err(|e| hound_err(path, e))?
        }
        (HoundFormat::Float, 32) => reader
            .samples::<f32>()
            .collect::<Result<_, _>>()
            .map_err(|e| hound_err(path, e))?,
        (fmt, bits) => {
            return Err(Error::UnsupportedEncoding(format!(
                "{}: {bits}-bit {fmt:?}",
                path.display()
            )))
        }
    };

    let frames = interleaved.len() / n_channels;
    let mut channels = vec![Vec::with_capacity(frames); n_channels];
    for frame in interleaved.chunks_exact(n_channels) {
        for (c, v) in frame.iter().enumerate() {
            channels[c].push(*v);
        }
    }
    Waveform::new(channels, spec.sample_rate)
}

pub fn save_wav(path: impl AsRef<Path>, w: &Waveform, format: SampleFormat) -> Result<()> {
    let path = path.as_ref();
    let (bits, sample_format) = match format {
        SampleFormat::Pcm16 => (16, HoundFormat::Int),
        SampleFormat::Pcm24 => (24, HoundFormat::Int),
        SampleFormat::Float32 => (32, HoundFormat::Float),
    };
    let spec = WavSpec {
        channels: w.channels().len() as u16,
        sample_rate: w.sample_rate_hz(),
        bits_per_sample: bits,
        sample_format,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| hound_err(path, e))?;
    for i in 0..w.len() {
        for ch in w.channels() {
            let v = ch[i];
            let res = match format {
                SampleFormat::Float32 => writer.write_sample(v),
                SampleFormat::Pcm16 | SampleFormat::Pcm24 => {
                    let scale = (1i64 << (bits - 1)) as f32;
                    let q = (v * scale).round().clamp(-scale, scale - 1.0) as i32;
                    writer.write_sample(q)
                }
            };
            res.map_err(|e| hound_err(path, e))?;
        }
    }
    writer.finalize().map_err(|e| hound_err(path, e))
}
