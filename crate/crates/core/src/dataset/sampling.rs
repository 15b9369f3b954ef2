use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::laughter::LaughterAnnotation;

/// Clip window in source time; `start_s` is negative when the clip begins
/// before the media and must be zero-padded on the left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipWindow {
    pub start_s: f64,
    pub end_s: f64,
}

impl ClipWindow {
    pub fn new(start_s: f64, end_s: f64) -> Self {
        Self { start_s, end_s }
    }

    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }

    /// Seconds of silence to prepend.
    pub fn pad_left_s(&self) -> f64 {
        (-self.start_s).max(0.0)
    }

    /// Open-interval overlap with `[a, b)`.
    pub fn overlaps(&self, a: f64, b: f64) -> bool {
        self.start_s < b && self.end_s > a
    }
}

/// One `n_s` window ending at each laughter onset. Onsets at 0 have no
/// preceding media, and windows that would contain an earlier laughter are
/// dropped, so no positive holds any laughter.
pub fn extract_positives(ann: &LaughterAnnotation, n_s: f64) -> Vec<ClipWindow> {
    let spans = ann.laughter_spans();
    spans
        .iter()
        .filter(|s| s.start_s > 0.0)
        .map(|s| ClipWindow::new(s.start_s - n_s, s.start_s))
        .filter(|w| !spans.iter().any(|e| w.overlaps(e.start_s, e.end_s)))
        .collect()
}

/// Sorted, disjoint half-open intervals.
#[derive(Debug, Clone, Default)]
struct IntervalSet(Vec<(f64, f64)>);

impl IntervalSet {
    fn span(a: f64, b: f64) -> Self {
        if b > a {
            Self(vec![(a, b)])
        } else {
            Self(Vec::new())
        }
    }

    fn remove(&mut self, a: f64, b: f64) {
        let mut out = Vec::with_capacity(self.0.len() + 1);
        for &(s, e) in &self.0 {
            if b <= s || a >= e {
                out.push((s, e));
                continue;
            }
            if a > s {
                out.push((s, a));
            }
            if b < e {
                out.push((b, e));
            }
        }
        self.0 = out;
    }

    fn measure(&self) -> f64 {
        self.0.iter().map(|(s, e)| e - s).sum()
    }

    /// Point at distance `u` into the set, counting lengths left to right.
    fn locate(&self, mut u: f64) -> Option<f64> {
        for &(s, e) in &self.0 {
            if u < e - s {
                return Some(s + u);
            }
            u -= e - s;
        }
        self.0.last().map(|(_, e)| *e)
    }
}

/// Start times in `[0, duration - n_s]` whose window touches no laughter and
/// is not followed by a laughter onset within `guard_s`. Draws are uniform
/// over the remaining valid starts and never overlap each other.
pub fn sample_negatives(
    ann: &LaughterAnnotation,
    duration_s: f64,
    n_s: f64,
    count: usize,
    seed: u64,
    guard_s: f64,
) -> Vec<ClipWindow> {
    // The last start is included, so the set is grown by a tiny closing margin.
    let last = duration_s - n_s;
    if last < 0.0 || count == 0 {
        return Vec::new();
    }
    let closing = 1e-9;
    let mut valid = IntervalSet::span(0.0, last + closing);
    for s in ann.laughter_spans() {
        valid.remove(s.start_s - n_s - guard_s, s.end_s);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let total = valid.measure();
        if total <= 0.0 {
            break;
        }
        let Some(start) = valid.locate(rng.random::<f64>() * total) else { break };
        let start = start.min(last);
        out.push(ClipWindow::new(start, start + n_s));
        valid.remove(start - n_s, start + n_s);
    }
    out.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    out
}
