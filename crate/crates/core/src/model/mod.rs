//! Projection heads, cross-attention fusion and the funny / not-funny classifier.

mod config;
mod contrib;
mod network;

pub use config::ModelConfig;
pub use contrib::{attention_csv, contribution_registry, contributions_csv, AttentionMean, ContributionMeasure, Occlusion, OutputNorm};
pub use network::{
    caf_cross_fuse, caf_self_attend, classify, classify_pooled, cross_attend, funny_probability, head_names, project,
    self_attend, BatchForward, ClipTokens, FunnyNet, Inference, SampleTrace,
};
