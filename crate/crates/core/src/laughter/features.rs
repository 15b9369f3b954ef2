use std::sync::Arc;

use crate::audio::{MelAnalyzer, MelParams, Waveform};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::registry::{Named, Registry};
use crate::span::TimeSpan;

/// Turns detected audio segments into fixed-length descriptor rows.
pub trait SegmentFeaturizer: Named + Send + Sync {
    /// One unstandardized row per span.
    fn rows(&self, w: &Waveform, spans: &[TimeSpan], p: &MelParams) -> Result<Matrix>;
}

/// Per-mel-bin mean and standard deviation of the log-Mel frames in a span.
#[derive(Debug, Clone, Default)]
pub struct MelStats;

impl Named for MelStats {
    fn name(&self) -> &'static str {
        "mel-stats"
    }
}

/// Mean ⊕ population std of each column.
pub fn column_mean_std(m: &Matrix) -> Vec<f32> {
    let n = m.rows().max(1) as f64;
    let mut sum = vec![0.0f64; m.cols()];
    let mut sq = vec![0.0f64; m.cols()];
    for r in m.iter_rows() {
        for (j, v) in r.iter().enumerate() {
            sum[j] += *v as f64;
            sq[j] += (*v as f64).powi(2);
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std = sq
        .iter()
        .zip(&mean)
        .map(|(q, mu)| (q / n - mu * mu).max(0.0).sqrt());
    mean.iter()
        .map(|v| *v as f32)
        .chain(std.map(|v| v as f32))
        .collect()
}

impl SegmentFeaturizer for MelStats {
    fn rows(&self, w: &Waveform, spans: &[TimeSpan], p: &MelParams) -> Result<Matrix> {
        let samples = w.samples()?;
        let params = MelParams {
            sample_rate_hz: w.sample_rate_hz(),
            ..p.clone()
        };
        let analyzer = MelAnalyzer::new(&params)?;
        let sr = w.sample_rate_hz() as f64;
        let win = params.window_samples();
        let mut out = Matrix::zeros(spans.len(), 2 * params.n_mels);
        for (i, s) in spans.iter().enumerate() {
            let a = ((s.start_s * sr).round() as usize).min(samples.len());
            let b = ((s.end_s * sr).round() as usize).min(samples.len());
            if b < a {
                return Err(Error::InvalidArgument(format!("span {s:?} outside the waveform")));
            }
            let mut seg = samples[a..b].to_vec();
            if seg.len() < win {
                seg.resize(win, 0.0);
            }
            let mel = analyzer.analyze(&seg)?;
            out.row_mut(i).copy_from_slice(&column_mean_std(&mel));
        }
        Ok(out)
    }
}

/// Rows supplied by an external encoder, aligned with the detected spans.
#[derive(Debug, Clone)]
pub struct ExternalFeatures {
    pub rows: Matrix,
}

impl Named for ExternalFeatures {
    fn name(&self) -> &'static str {
        "external"
    }
}

impl SegmentFeaturizer for ExternalFeatures {
    fn rows(&self, _w: &Waveform, spans: &[TimeSpan], _p: &MelParams) -> Result<Matrix> {
        if self.rows.rows() != spans.len() {
            return Err(Error::Dimension(format!(
                "{} feature rows for {} segments",
                self.rows.rows(),
                spans.len()
            )));
        }
        Ok(self.rows.clone())
    }
}

pub fn featurizer_registry() -> Registry<dyn SegmentFeaturizer> {
    let mut reg: Registry<dyn SegmentFeaturizer> = Registry::new("segment featurizer");
    reg.register(Arc::new(MelStats));
    reg
}

/// Zero mean, unit variance per column; constant columns become zero.
pub fn standardize_columns(m: &mut Matrix) {
    if m.rows() == 0 {
        return;
    }
    let stats = column_mean_std(m);
    let cols = m.cols();
    for r in 0..m.rows() {
        let row = m.row_mut(r);
        for j in 0..cols {
            let (mu, sd) = (stats[j], stats[cols + j]);
            row[j] = if sd > 1e-12 { (row[j] - mu) / sd } else { 0.0 };
        }
    }
}

/// Standardized mel-statistics descriptors, one row per span.
pub fn segment_features(w: &Waveform, spans: &[TimeSpan], p: &MelParams) -> Result<Matrix> {
    let mut rows = MelStats.rows(w, spans, p)?;
    standardize_columns(&mut rows);
    Ok(rows)
}
