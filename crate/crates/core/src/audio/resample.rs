use std::sync::Arc;

use super::Waveform;
use crate::error::{Error, Result};
use crate::registry::{Named, Registry};

/// A sample-rate conversion strategy operating on one channel.
pub trait Resampler: Named + Send + Sync {
    fn resample_channel(&self, x: &[f32], from_hz: u32, to_hz: u32) -> Vec<f32>;
}

fn output_len(n: usize, from_hz: u32, to_hz: u32) -> usize {
    ((n as u64 * to_hz as u64 + from_hz as u64 / 2) / from_hz as u64) as usize
}

/// Kaiser-windowed sinc interpolation.
#[derive(Debug, Clone)]
pub struct SincResampler {
    /// Zero crossings of the low-pass kernel on each side of the centre,
    /// measured at the lower of the two rates.
    pub half_taps: usize,
    pub beta: f64,
    /// Cutoff as a fraction of the lower Nyquist frequency.
    pub rolloff: f64,
}

impl Default for SincResampler {
    fn default() -> Self {
        Self {
            half_taps: 16,
            beta: 8.0,
            rolloff: 0.95,
        }
    }
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..64 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

impl Named for SincResampler {
    fn name(&self) -> &'static str {
        "sinc"
    }
}

impl Resampler for SincResampler {
    fn resample_channel(&self, x: &[f32], from_hz: u32, to_hz: u32) -> Vec<f32> {
        let ratio = to_hz as f64 / from_hz as f64;
        let fc = ratio.min(1.0) * self.rolloff;
        let half = self.half_taps as f64 / ratio.min(1.0);
        let i0_beta = bessel_i0(self.beta);
        let n_out = output_len(x.len(), from_hz, to_hz);

        let mut out = Vec::with_capacity(n_out);
        for j in 0..n_out {
            let t = j as f64 / ratio;
            let lo = (t - half).ceil() as i64;
            let hi = (t + half).floor() as i64;
            let (mut acc, mut norm) = (0.0f64, 0.0f64);
            for i in lo..=hi {
                let d = i as f64 - t;
                let r = d / half;
                let w = bessel_i0(self.beta * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
                let h = fc * sinc(fc * d) * w;
                norm += h;
                if i >= 0 && (i as usize) < x.len() {
                    acc += h * x[i as usize] as f64;
                }
            }
            out.push(if norm != 0.0 { (acc / norm) as f32 } else { 0.0 });
        }
        out
    }
}

/// Piecewise-linear interpolation; no anti-aliasing.
#[derive(Debug, Clone, Default)]
pub struct LinearResampler;

impl Named for LinearResampler {
    fn name(&self) -> &'static str {
        "linear"
    }
}

impl Resampler for LinearResampler {
    fn resample_channel(&self, x: &[f32], from_hz: u32, to_hz: u32) -> Vec<f32> {
        let n_out = output_len(x.len(), from_hz, to_hz);
        let step = from_hz as f64 / to_hz as f64;
        (0..n_out)
            .map(|j| {
                let t = j as f64 * step;
                let i = t.floor() as usize;
                let frac = (t - i as f64) as f32;
                let a = x.get(i).copied().unwrap_or(0.0);
                let b = x.get(i + 1).copied().unwrap_or(a);
                a + (b - a) * frac
            })
            .collect()
    }
}

pub fn resampler_registry() -> Registry<dyn Resampler> {
    let mut reg: Registry<dyn Resampler> = Registry::new("resampler");
    reg.register(Arc::new(SincResampler::default()))
        .register(Arc::new(LinearResampler));
    reg
}

pub fn resample_with(w: &Waveform, target_hz: u32, r: &dyn Resampler) -> Result<Waveform> {
    if target_hz == 0 {
        return Err(Error::InvalidArgument("target rate must be positive".into()));
    }
    if target_hz == w.sample_rate_hz() {
        return Ok(w.clone());
    }
    let channels = w
        .channels()
        .iter()
        .map(|c| r.resample_channel(c, w.sample_rate_hz(), target_hz))
        .collect();
    Waveform::new(channels, target_hz)
}

/// Resamples with the default windowed-sinc strategy.
pub fn resample(w: &Waveform, target_hz: u32) -> Result<Waveform> {
    resample_with(w, target_hz, &SincResampler::default())
}
