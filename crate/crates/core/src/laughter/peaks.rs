use serde::{Deserialize, Serialize};

use crate::audio::Waveform;
use crate::error::{Error, Result};
use crate::span::TimeSpan;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeakConfig {
    pub energy_window_s: f64,
    /// Activity threshold relative to the loudest window, in dB (negative).
    pub threshold_db: f64,
    pub min_event_s: f64,
    pub merge_gap_s: f64,
    pub max_event_s: f64,
}

impl Default for PeakConfig {
    fn default() -> Self {
        Self {
            energy_window_s: 0.05,
            threshold_db: -30.0,
            min_event_s: 0.20,
            merge_gap_s: 0.15,
            max_event_s: 20.0,
        }
    }
}

impl PeakConfig {
    pub fn validate(&self) -> Result<()> {
        let durations = [
            self.energy_window_s,
            self.min_event_s,
            self.merge_gap_s,
            self.max_event_s,
        ];
        if durations.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::Config("peak detector durations must be positive".into()));
        }
        if !(self.threshold_db < 0.0) {
            return Err(Error::Config("threshold_db must be negative".into()));
        }
        Ok(())
    }
}

/// Per-window RMS over non-overlapping windows of `energy_window_s`.
pub fn window_rms(samples: &[f32], window: usize) -> Vec<f64> {
    samples
        .chunks(window)
        .map(|c| (c.iter().map(|v| (*v as f64).powi(2)).sum::<f64>() / c.len() as f64).sqrt())
        .collect()
}

/// Finds sustained high-energy regions of a mono signal.
///
/// A window is active when its RMS exceeds `threshold_db` relative to the
/// loudest window of the file, so the result does not depend on overall gain.
pub fn detect_energy_peaks(w: &Waveform, cfg: &PeakConfig) -> Result<Vec<TimeSpan>> {
    cfg.validate()?;
    let samples = w.samples()?;
    let sr = w.sample_rate_hz() as f64;
    let win = ((cfg.energy_window_s * sr).round() as usize).max(1);
    let rms = window_rms(samples, win);
    let max = rms.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(Vec::new());
    }
    let thresh = max * 10f64.powf(cfg.threshold_db / 20.0);

    // runs of active windows as [first, last) window indices
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut open: Option<usize> = None;
    for (i, r) in rms.iter().enumerate() {
        match (open, *r > thresh) {
            (None, true) => open = Some(i),
            (Some(a), false) => {
                runs.push((a, i));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(a) = open {
        runs.push((a, rms.len()));
    }

    let win_s = win as f64 / sr;
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for run in runs {
        match merged.last_mut() {
            Some(last) if (run.0 - last.1) as f64 * win_s < cfg.merge_gap_s => last.1 = run.1,
            _ => merged.push(run),
        }
    }

    let max_windows = cfg.max_event_s / win_s;
    let mut pieces = Vec::new();
    for run in merged {
        split_long(run, &rms, max_windows, &mut pieces);
    }

    let end_of = |i: usize| (i * win).min(samples.len()) as f64 / sr;
    Ok(pieces
        .into_iter()
        .map(|(a, b)| TimeSpan {
            start_s: a as f64 * win_s,
            end_s: end_of(b),
        })
        .filter(|s| s.duration_s() >= cfg.min_event_s)
        .collect())
}

/// Splits a run at its quietest interior window until every piece fits.
fn split_long(run: (usize, usize), rms: &[f64], max_windows: f64, out: &mut Vec<(usize, usize)>) {
    let (a, b) = run;
    if ((b - a) as f64) <= max_windows || b - a < 3 {
        out.push(run);
        return;
    }
    let cut = (a + 1..b - 1)
        .min_by(|&i, &j| rms[i].total_cmp(&rms[j]))
        .expect("interior window exists");
    split_long((a, cut), rms, max_windows, out);
    split_long((cut + 1, b), rms, max_windows, out);
}
