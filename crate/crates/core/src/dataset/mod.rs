//! Funny / not-funny clip extraction, augmentation and dataset storage.

mod media;
mod sampling;
mod store;
mod transcript;

pub use media::{apply_augment, augment, cut_clip, pad_or_crop, AugmentConfig, AugmentDraw, ClipMedia};
pub use sampling::{extract_positives, sample_negatives, ClipWindow};
pub use store::{
    build_media_clips, encode_clip, read_media_manifest, ClipRecord, Dataset, DatasetConfig, FeaturePaths, Label,
    LoadedMedia, MediaEntry, MANIFEST_FILE,
};
pub use transcript::{Transcript, TranscriptLine};
