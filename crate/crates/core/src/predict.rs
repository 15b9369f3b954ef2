//! Sliding-window funny-probability timelines over whole media files.

use std::fmt::Write as _;

use crate::audio::{MelAnalyzer, MelParams};
use crate::dataset::{encode_clip, ClipWindow, DatasetConfig, LoadedMedia};
use crate::error::{Error, Result};
use crate::model::{FunnyNet, ModelConfig};
use crate::train::predict_probabilities;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimelinePoint {
    pub window: ClipWindow,
    pub prob_funny: f32,
}

/// Windows of `n_s` seconds every `stride_s`, from 0 until one reaches the
/// end of the media. The last may run past the end and is zero-padded.
pub fn timeline_windows(duration_s: f64, n_s: f64, stride_s: f64) -> Result<Vec<ClipWindow>> {
    if !(n_s > 0.0 && stride_s > 0.0) {
        return Err(Error::InvalidArgument("window and stride must be positive".into()));
    }
    let mut out = Vec::new();
    for k in 0usize.. {
        let start = k as f64 * stride_s;
        out.push(ClipWindow::new(start, start + n_s));
        if start + n_s >= duration_s - 1e-9 {
            break;
        }
    }
    Ok(out)
}

pub fn predict_timeline(
    model: &FunnyNet,
    media: &LoadedMedia,
    dataset: &DatasetConfig,
    mel: &MelParams,
    stride_s: f64,
    batch: usize,
) -> Result<Vec<TimelinePoint>> {
    let analyzer = MelAnalyzer::new(mel)?;
    let windows = timeline_windows(media.duration_s(), dataset.n_s, stride_s)?;
    let model_cfg: &ModelConfig = &model.config;
    let clips = windows
        .iter()
        .map(|w| encode_clip(&media.clip(w, dataset)?, &analyzer, dataset, model_cfg))
        .collect::<Result<Vec<_>>>()?;
    let probs = predict_probabilities(model, &clips, batch)?;
    Ok(windows
        .into_iter()
        .zip(probs)
        .map(|(window, prob_funny)| TimelinePoint { window, prob_funny })
        .collect())
}

pub fn timeline_csv(points: &[TimelinePoint]) -> String {
    let mut s = String::from("window,start_s,end_s,prob_funny\n");
    for (i, p) in points.iter().enumerate() {
        let _ = writeln!(s, "{i},{:.3},{:.3},{:.6}", p.window.start_s, p.window.end_s, p.prob_funny);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_tile_the_media() {
        let w = timeline_windows(20.0, 8.0, 1.0).unwrap();
        assert_eq!(w.len(), 13);
        assert_eq!(w[0].start_s, 0.0);
        assert_eq!(w.last().unwrap().end_s, 20.0);
        let w = timeline_windows(20.5, 8.0, 1.0).unwrap();
        assert_eq!(w.last().unwrap().start_s, 13.0);
        assert!(w.last().unwrap().end_s > 20.5);
    }

    #[test]
    fn short_media_gives_one_padded_window() {
        let w = timeline_windows(3.0, 8.0, 1.0).unwrap();
        assert_eq!(w, vec![ClipWindow::new(0.0, 8.0)]);
    }

    #[test]
    fn bad_stride_rejected() {
        assert!(timeline_windows(3.0, 8.0, 0.0).is_err());
    }
}
