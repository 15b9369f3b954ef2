//! Classification and laughter-detection metrics.

mod metrics;
mod report;

pub use metrics::{
    classification_metrics, detection_metrics, frame_center, frame_count, greedy_matches, iou,
    rasterize, temporal_metrics, MetricsReport,
};
pub use report::{evaluate_laughter, LaughterReport};
