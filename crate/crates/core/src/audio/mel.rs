use std::sync::Arc;

use rustfft::{num_complex::Complex, Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::Waveform;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::span::TimeSpan;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MelParams {
    pub sample_rate_hz: u32,
    pub n_mels: usize,
    pub window_s: f64,
    pub hop_s: f64,
    pub log_floor: f64,
}

impl Default for MelParams {
    fn default() -> Self {
        Self {
            sample_rate_hz: 16000,
            n_mels: 64,
            window_s: 0.064,
            hop_s: 0.010,
            log_floor: 1e-10,
        }
    }
}

impl MelParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_mels == 0 {
            return Err(Error::Config("n_mels must be at least 1".into()));
        }
        if !(self.hop_s > 0.0 && self.hop_s <= self.window_s) {
            return Err(Error::Config("need 0 < hop_s <= window_s".into()));
        }
        if self.sample_rate_hz == 0 || !(self.log_floor > 0.0) {
            return Err(Error::Config("sample rate and log floor must be positive".into()));
        }
        Ok(())
    }

    pub fn window_samples(&self) -> usize {
        (self.window_s * self.sample_rate_hz as f64).round() as usize
    }

    pub fn hop_samples(&self) -> usize {
        ((self.hop_s * self.sample_rate_hz as f64).round() as usize).max(1)
    }

    pub fn n_fft(&self) -> usize {
        self.window_samples().next_power_of_two()
    }

    /// Frame count for a signal of `len` samples (0 when shorter than a window).
    pub fn frame_count(&self, len: usize) -> usize {
        let win = self.window_samples();
        if len < win {
            0
        } else {
            (len - win) / self.hop_samples() + 1
        }
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Centre frequencies (Hz) of the triangular filters, lowest first.
pub fn mel_filter_centers(p: &MelParams) -> Vec<f64> {
    band_edges(p)[1..=p.n_mels].to_vec()
}

fn band_edges(p: &MelParams) -> Vec<f64> {
    let top = hz_to_mel(p.sample_rate_hz as f64 / 2.0);
    (0..p.n_mels + 2)
        .map(|i| mel_to_hz(top * i as f64 / (p.n_mels + 1) as f64))
        .collect()
}

/// Log-power Mel spectrogram, `n_frames x n_mels`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub values: Matrix,
    pub params: MelParams,
    pub origin_span: TimeSpan,
}

impl MelSpectrogram {
    pub fn n_frames(&self) -> usize {
        self.values.rows()
    }

    pub fn n_mels(&self) -> usize {
        self.values.cols()
    }

    /// Log value that silence maps to.
    pub fn floor_value(&self) -> f32 {
        self.params.log_floor.ln() as f32
    }
}

struct Filter {
    first_bin: usize,
    weights: Vec<f64>,
}

/// Reusable STFT + filter-bank state for one parameter set.
pub struct MelAnalyzer {
    params: MelParams,
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    filters: Vec<Filter>,
}

impl MelAnalyzer {
    pub fn new(params: &MelParams) -> Result<Self> {
        params.validate()?;
        let n_fft = params.n_fft();
        let win = params.window_samples();
        let fft = FftPlanner::new().plan_fft_forward(n_fft);
        // periodic Hann
        let window = (0..win)
            .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / win as f64).cos())
            .collect();

        let edges = band_edges(params);
        let bin_hz = params.sample_rate_hz as f64 / n_fft as f64;
        let n_bins = n_fft / 2 + 1;
        let filters = (0..params.n_mels)
            .map(|m| {
                let (lo, c, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                let mut first_bin = None;
                let mut weights = Vec::new();
                for k in 0..n_bins {
                    let f = k as f64 * bin_hz;
                    let w = if f > lo && f <= c {
                        (f - lo) / (c - lo)
                    } else if f > c && f < hi {
                        (hi - f) / (hi - c)
                    } else {
                        0.0
                    };
                    if w > 0.0 {
                        first_bin.get_or_insert(k);
                        weights.push(w);
                    } else if first_bin.is_some() {
                        break;
                    }
                }
                Filter {
                    first_bin: first_bin.unwrap_or(0),
                    weights,
                }
            })
            .collect();
        Ok(Self {
            params: params.clone(),
            fft,
            window,
            filters,
        })
    }

    pub fn params(&self) -> &MelParams {
        &self.params
    }

    /// Analyzes mono samples; errors when shorter than one window.
    pub fn analyze(&self, samples: &[f32]) -> Result<Matrix> {
        let p = &self.params;
        let n_frames = p.frame_count(samples.len());
        if n_frames == 0 {
            return Err(Error::EmptySpectrogram {
                samples: samples.len(),
                window: p.window_samples(),
            });
        }
        let n_fft = p.n_fft();
        let hop = p.hop_samples();
        let floor = p.log_floor;
        let mut out = Matrix::zeros(n_frames, p.n_mels);
        let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
        let mut power = vec![0.0f64; n_fft / 2 + 1];
        for t in 0..n_frames {
            let frame = &samples[t * hop..t * hop + self.window.len()];
            for (i, b) in buf.iter_mut().enumerate() {
                *b = if i < frame.len() {
                    Complex::new(frame[i] as f64 * self.window[i], 0.0)
                } else {
                    Complex::new(0.0, 0.0)
                };
            }
            self.fft.process(&mut buf);
            for (p, b) in power.iter_mut().zip(&buf) {
                *p = b.norm_sqr();
            }
            let row = out.row_mut(t);
            for (m, f) in self.filters.iter().enumerate() {
                let e: f64 = f
                    .weights
                    .iter()
                    .zip(&power[f.first_bin..])
                    .map(|(w, p)| w * p)
                    .sum();
                row[m] = e.max(floor).ln() as f32;
            }
        }
        Ok(out)
    }
}

/// Log-Mel spectrogram of a mono waveform at its own sample rate.
///
/// `p.sample_rate_hz` is overridden by the waveform's rate so the filter bank
/// always spans 0 Hz to the waveform's Nyquist frequency.
pub fn mel_spectrogram(w: &Waveform, p: &MelParams) -> Result<MelSpectrogram> {
    let samples = w.samples()?;
    let params = MelParams {
        sample_rate_hz: w.sample_rate_hz(),
        ..p.clone()
    };
    let values = MelAnalyzer::new(&params)?.analyze(samples)?;
    Ok(MelSpectrogram {
        values,
        params,
        origin_span: TimeSpan {
            start_s: 0.0,
            end_s: w.duration_s(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, amp: f64, secs: f64) -> Waveform {
        let n = (secs * 16000.0) as usize;
        Waveform::mono(
            (0..n)
                .map(|i| (amp * (2.0 * std::f64::consts::PI * freq * i as f64 / 16000.0).sin()) as f32)
                .collect(),
            16000,
        )
        .unwrap()
    }

    #[test]
    fn eight_second_clip_shape() {
        let w = Waveform::mono(vec![0.0; 8 * 16000], 16000).unwrap();
        let m = mel_spectrogram(&w, &MelParams::default()).unwrap();
        assert_eq!(m.n_frames(), 794);
        assert_eq!(m.n_mels(), 64);
    }

    #[test]
    fn silence_sits_on_the_floor() {
        let w = Waveform::mono(vec![0.0; 4000], 16000).unwrap();
        let m = mel_spectrogram(&w, &MelParams::default()).unwrap();
        let floor = (1e-10f64).ln() as f32;
        assert!(m.values.as_slice().iter().all(|v| *v == floor));
    }

    #[test]
    fn too_short_is_an_error() {
        let w = Waveform::mono(vec![0.1; 1000], 16000).unwrap();
        assert!(matches!(
            mel_spectrogram(&w, &MelParams::default()),
            Err(Error::EmptySpectrogram { .. })
        ));
    }

    #[test]
    fn requires_mono() {
        let w = Waveform::new(vec![vec![0.0; 2000]; 2], 16000).unwrap();
        assert!(matches!(mel_spectrogram(&w, &MelParams::default()), Err(Error::Layout(_))));
    }

    #[test]
    fn amplitude_scaling_shifts_log_values() {
        // power-of-two gains are exact in f32, so even leakage bins shift exactly
        let p = MelParams::default();
        let w = tone(700.0, 0.1, 0.5);
        let a = mel_spectrogram(&w, &p).unwrap();
        for c in [0.25f32, 2.0, 4.0] {
            let b = mel_spectrogram(&w.scaled(c), &p).unwrap();
            let shift = (c as f64).powi(2).ln() as f32;
            let floor = a.floor_value();
            for (x, y) in a.values.as_slice().iter().zip(b.values.as_slice()) {
                if *x > floor + 1.0 && *y > floor + 1.0 {
                    assert!((y - x - shift).abs() < 1e-5, "{x} {y}");
                }
            }
        }
    }

    #[test]
    fn centers_are_increasing_and_below_nyquist() {
        let c = mel_filter_centers(&MelParams::default());
        assert_eq!(c.len(), 64);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
        assert!(*c.last().unwrap() < 8000.0);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = MelParams { hop_s: 0.1, ..Default::default() };
        assert!(p.validate().is_err());
        let p = MelParams { n_mels: 0, ..Default::default() };
        assert!(p.validate().is_err());
    }
}
