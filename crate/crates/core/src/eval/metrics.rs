use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::span::TimeSpan;

/// Confusion counts plus the derived rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iou_threshold: Option<f64>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl MetricsReport {
    /// Rates from counts. Precision or recall with an empty denominator is 0;
    /// detection reports have no true negatives, so accuracy there is
    /// `tp / (tp + fp + fn)`.
    pub fn from_counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            accuracy: ratio(tp + tn, tp + fp + fn_ + tn),
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
            tn,
            iou_threshold: None,
        }
    }

    /// Pools the counts of several reports.
    pub fn merge(reports: &[MetricsReport]) -> Self {
        let sum = |f: fn(&MetricsReport) -> u64| reports.iter().map(f).sum::<u64>();
        let mut out = Self::from_counts(sum(|r| r.tp), sum(|r| r.fp), sum(|r| r.fn_), sum(|r| r.tn));
        out.iou_threshold = reports.first().and_then(|r| r.iou_threshold);
        out
    }
}

/// Temporal intersection over union; 0 for disjoint spans.
pub fn iou(a: &TimeSpan, b: &TimeSpan) -> f64 {
    let inter = a.intersection_s(b);
    if inter <= 0.0 {
        return 0.0;
    }
    inter / (a.duration_s() + b.duration_s() - inter)
}

/// Centre time of frame `f` on a grid of `res` seconds.
pub fn frame_center(f: usize, res: f64) -> f64 {
    (f as f64 + 0.5) * res
}

pub fn frame_count(duration_s: f64, res: f64) -> usize {
    ((duration_s / res) - 1e-9).ceil().max(0.0) as usize
}

/// Frames `[first, last)` whose centres fall inside `span`.
fn frame_range(span: &TimeSpan, res: f64, n: usize) -> (usize, usize) {
    let lower = |t: f64| {
        // first frame with centre >= t
        let mut f = ((t / res) - 0.5).ceil().max(0.0) as usize;
        while f > 0 && frame_center(f - 1, res) >= t {
            f -= 1;
        }
        while f < n && frame_center(f, res) < t {
            f += 1;
        }
        f.min(n)
    };
    (lower(span.start_s), lower(span.end_s))
}

/// Rasterizes spans onto a frame grid; a frame is set when its centre lies
/// inside any span.
pub fn rasterize(spans: &[TimeSpan], duration_s: f64, res: f64) -> Vec<bool> {
    let n = frame_count(duration_s, res);
    let mut grid = vec![false; n];
    for s in spans {
        let (a, b) = frame_range(s, res, n);
        for g in &mut grid[a..b.max(a)] {
            *g = true;
        }
    }
    grid
}

/// Frame-level agreement between predicted and reference spans.
pub fn temporal_metrics(pred: &[TimeSpan], gt: &[TimeSpan], duration_s: f64, resolution_s: f64) -> MetricsReport {
    let p = rasterize(pred, duration_s, resolution_s);
    let g = rasterize(gt, duration_s, resolution_s);
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (a, b) in p.iter().zip(&g) {
        match (a, b) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    MetricsReport::from_counts(tp, fp, fn_, tn)
}

/// Number of one-to-one matches found greedily in descending IoU order,
/// counting only pairs with IoU >= `iou_thr`.
pub fn greedy_matches(pred: &[TimeSpan], gt: &[TimeSpan], iou_thr: f64) -> u64 {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in pred.iter().enumerate() {
        for (j, g) in gt.iter().enumerate() {
            let v = iou(p, g);
            if v >= iou_thr && v > 0.0 {
                pairs.push((v, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_p = vec![false; pred.len()];
    let mut used_g = vec![false; gt.len()];
    let mut tp = 0;
    for (_, i, j) in pairs {
        if !used_p[i] && !used_g[j] {
            used_p[i] = true;
            used_g[j] = true;
            tp += 1;
        }
    }
    tp
}

/// Event-level precision and recall at an IoU threshold.
pub fn detection_metrics(pred: &[TimeSpan], gt: &[TimeSpan], iou_thr: f64) -> Result<MetricsReport> {
    if !(iou_thr > 0.0 && iou_thr <= 1.0) {
        return Err(Error::InvalidArgument(format!("IoU threshold {iou_thr} outside (0, 1]")));
    }
    let tp = greedy_matches(pred, gt, iou_thr);
    let mut r = MetricsReport::from_counts(tp, pred.len() as u64 - tp, gt.len() as u64 - tp, 0);
    r.iou_threshold = Some(iou_thr);
    Ok(r)
}

/// Binary metrics with `true` (funny) as the positive class.
pub fn classification_metrics(preds: &[bool], gts: &[bool]) -> Result<MetricsReport> {
    if preds.len() != gts.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} labels",
            preds.len(),
            gts.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::InvalidArgument("no predictions to score".into()));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (p, g) in preds.iter().zip(gts) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(MetricsReport::from_counts(tp, fp, fn_, tn))
}
