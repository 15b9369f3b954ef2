use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{detection_metrics, temporal_metrics, MetricsReport};
use crate::error::{Error, Result};
use crate::laughter::LaughterAnnotation;

/// Laughter-detector scores: frame-level plus event-level at each IoU threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaughterReport {
    pub files: usize,
    pub resolution_s: f64,
    pub temporal: MetricsReport,
    pub detection: Vec<MetricsReport>,
}

fn media_duration(gt: &LaughterAnnotation, pred: Option<&LaughterAnnotation>) -> f64 {
    gt.duration_s.unwrap_or_else(|| {
        gt.events
            .iter()
            .chain(pred.into_iter().flat_map(|p| p.events.iter()))
            .map(|e| e.end_s)
            .fold(0.0, f64::max)
    })
}

/// Scores predicted laughter against reference annotations, pooling counts
/// over files matched by `media_id`. Reference files without a prediction
/// count as all-missed; predictions without a reference are rejected.
pub fn evaluate_laughter(
    preds: &[LaughterAnnotation],
    gts: &[LaughterAnnotation],
    resolution_s: f64,
    iou_thresholds: &[f64],
) -> Result<LaughterReport> {
    let by_id: BTreeMap<&str, &LaughterAnnotation> = preds.iter().map(|p| (p.media_id.as_str(), p)).collect();
    if let Some(p) = preds.iter().find(|p| !gts.iter().any(|g| g.media_id == p.media_id)) {
        return Err(Error::InvalidArgument(format!(
            "prediction for '{}' has no reference annotation",
            p.media_id
        )));
    }
    let mut temporal = Vec::new();
    let mut detection: Vec<Vec<MetricsReport>> = vec![Vec::new(); iou_thresholds.len()];
    for gt in gts {
        let pred = by_id.get(gt.media_id.as_str()).copied();
        let p_spans = pred.map(|p| p.laughter_spans()).unwrap_or_default();
        let g_spans = gt.laughter_spans();
        let duration = media_duration(gt, pred);
        temporal.push(temporal_metrics(&p_spans, &g_spans, duration, resolution_s));
        for (slot, thr) in detection.iter_mut().zip(iou_thresholds) {
            slot.push(detection_metrics(&p_spans, &g_spans, *thr)?);
        }
    }
    Ok(LaughterReport {
        files: gts.len(),
        resolution_s,
        temporal: MetricsReport::merge(&temporal),
        detection: detection
            .iter()
            .zip(iou_thresholds)
            .map(|(r, thr)| {
                let mut m = MetricsReport::merge(r);
                m.iou_threshold = Some(*thr);
                m
            })
            .collect(),
    })
}

impl LaughterReport {
    /// Aligned plain-text table: temporal Acc/Pre/Rec/F1, then Pre/Rec/F1 per
    /// detection threshold, in percent.
    pub fn to_table(&self) -> String {
        let mut head1 = format!("{:<10}| {:^31} ", "", "Temporal");
        let mut head2 = format!("{:<10}| {:>7} {:>7} {:>7} {:>7} ", "", "Acc", "Pre", "Rec", "F1");
        let mut row = format!(
            "{:<10}| {:>7.1} {:>7.1} {:>7.1} {:>7.1} ",
            "detector",
            100.0 * self.temporal.accuracy,
            100.0 * self.temporal.precision,
            100.0 * self.temporal.recall,
            100.0 * self.temporal.f1
        );
        for d in &self.detection {
            let title = format!("Det IoU = {}", d.iou_threshold.unwrap_or(0.0));
            let _ = write!(head1, "| {title:^23} ");
            let _ = write!(head2, "| {:>7} {:>7} {:>7} ", "Pre", "Rec", "F1");
            let _ = write!(
                row,
                "| {:>7.1} {:>7.1} {:>7.1} ",
                100.0 * d.precision,
                100.0 * d.recall,
                100.0 * d.f1
            );
        }
        format!("{}\n{}\n{}\n", head1.trim_end(), head2.trim_end(), row.trim_end())
    }
}
