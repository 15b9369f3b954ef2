//! Waveform I/O, resampling, voice removal and log-Mel features.

mod mel;
mod resample;
mod wav;

pub use mel::{
    hz_to_mel, mel_filter_centers, mel_spectrogram, mel_to_hz, MelAnalyzer, MelParams,
    MelSpectrogram,
};
pub use resample::{
    resample, resample_with, resampler_registry, LinearResampler, Resampler, SincResampler,
};
pub use wav::{load_wav, save_wav, SampleFormat};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of the centre (dialogue) channel in the WAVE 5.1 channel order
/// FL, FR, FC, LFE, BL, BR.
pub const SURROUND_CENTER: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Mono,
    Stereo,
    Surround5_1,
}

impl Layout {
    pub fn from_channel_count(n: usize) -> Result<Self> {
        match n {
            1 => Ok(Layout::Mono),
            2 => Ok(Layout::Stereo),
            6 => Ok(Layout::Surround5_1),
            other => Err(Error::UnsupportedLayout(other)),
        }
    }

    pub fn channel_count(self) -> usize {
        match self {
            Layout::Mono => 1,
            Layout::Stereo => 2,
            Layout::Surround5_1 => 6,
        }
    }
}

/// Multi-channel sampled audio. Amplitudes are nominally in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    channels: Vec<Vec<f32>>,
    sample_rate_hz: u32,
    layout: Layout,
}

impl Waveform {
    pub fn new(channels: Vec<Vec<f32>>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        let layout = Layout::from_channel_count(channels.len())?;
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::Dimension("channels differ in length".into()));
        }
        Ok(Self {
            channels,
            sample_rate_hz,
            layout,
        })
    }

    pub fn mono(samples: Vec<f32>, sample_rate_hz: u32) -> Result<Self> {
        Self::new(vec![samples], sample_rate_hz)
    }

    pub fn channels(&self) -> &[Vec<f32>] {
        &self.channels
    }

    pub fn channel(&self, i: usize) -> &[f32] {
        &self.channels[i]
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate_hz as f64
    }

    /// Samples of a mono waveform.
    pub fn samples(&self) -> Result<&[f32]> {
        match self.layout {
            Layout::Mono => Ok(&self.channels[0]),
            other => Err(Error::Layout(format!("expected mono audio, got {other:?}"))),
        }
    }

    /// Unweighted mean of all channels.
    pub fn mixdown(&self) -> Waveform {
        if self.layout == Layout::Mono {
            return self.clone();
        }
        let n = self.channels.len() as f32;
        let out = (0..self.len())
            .map(|i| self.channels.iter().map(|c| c[i]).sum::<f32>() / n)
            .collect();
        Waveform {
            channels: vec![out],
            sample_rate_hz: self.sample_rate_hz,
            layout: Layout::Mono,
        }
    }

    pub fn scaled(&self, gain: f32) -> Waveform {
        Waveform {
            channels: self
                .channels
                .iter()
                .map(|c| c.iter().map(|v| v * gain).collect())
                .collect(),
            ..self.clone()
        }
    }
}

/// Cancels centred dialogue by exploiting the channel layout.
///
/// Stereo yields `L - R`; 5.1 drops the centre channel and averages the
/// remaining five. Mono input has nothing to subtract and is rejected.
pub fn remove_voice(w: &Waveform) -> Result<Waveform> {
    let out: Vec<f32> = match w.layout {
        Layout::Mono => {
            return Err(Error::Layout(
                "voice removal needs stereo or 5.1 audio, got mono".into(),
            ))
        }
        Layout::Stereo => w.channels[0]
            .iter()
            .zip(&w.channels[1])
            .map(|(l, r)| l - r)
            .collect(),
        Layout::Surround5_1 => (0..w.len())
            .map(|i| {
                let sum: f32 = w
                    .channels
                    .iter()
                    .enumerate()
                    .filter(|(c, _)| *c != SURROUND_CENTER)
                    .map(|(_, ch)| ch[i])
                    .sum();
                sum / 5.0
            })
            .collect(),
    };
    Waveform::mono(out, w.sample_rate_hz)
}
