//! Unsupervised laughter detection: voice removal, energy peaks and
//! clustering of background segments into laughter and music.

mod annotation;
mod features;
mod kmeans;
mod peaks;
mod pipeline;

pub use annotation::{read_annotations, write_annotation, Event, EventKind, LaughterAnnotation};
pub use features::{
    column_mean_std, featurizer_registry, segment_features, standardize_columns, ExternalFeatures,
    MelStats, SegmentFeaturizer,
};
pub use kmeans::{kmeans, ClusterResult, MAX_ITERATIONS};
pub use peaks::{detect_energy_peaks, window_rms, PeakConfig};
pub use pipeline::{
    detect_laughter, detect_laughter_files, label_corpus, media_id_of, music_cluster,
    segment_media, select_laughter_clusters, ClusterConfig, DetectorConfig, SegmentedMedia,
};
