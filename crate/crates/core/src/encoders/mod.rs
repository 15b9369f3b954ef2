//! Per-modality feature providers producing raw token sequences.
//!
//! Every provider maps one clip input to an `m x D_raw` token matrix. The
//! built-in providers are small deterministic summaries; `precomputed`
//! passes through matrices computed elsewhere.

mod frames;
mod providers;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use frames::FrameStack;
pub use providers::{
    chunk_bounds, encode_audio_stub, encode_text_stub, encode_visual_stub, fnv1a64, provider_registry,
    FeatureProvider, HashBow, IntensityHistogram, MelChunkStats, Precomputed, ProviderInput, HISTOGRAM_BINS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Visual,
    Text,
    Audio,
}

impl Modality {
    /// Conventional stacking order.
    pub const ALL: [Modality; 3] = [Modality::Visual, Modality::Text, Modality::Audio];

    pub fn key(self) -> &'static str {
        match self {
            Modality::Visual => "v",
            Modality::Text => "t",
            Modality::Audio => "a",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Modality::Visual => 0,
            Modality::Text => 1,
            Modality::Audio => 2,
        }
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Modality::Visual => "visual",
            Modality::Text => "text",
            Modality::Audio => "audio",
        })
    }
}

/// Token sequence of one modality before projection.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFeatures {
    pub modality: Modality,
    pub tokens: Matrix,
}

impl RawFeatures {
    /// Rejects empty or non-finite token matrices.
    pub fn new(modality: Modality, tokens: Matrix) -> Result<Self> {
        if tokens.rows() == 0 || tokens.cols() == 0 {
            return Err(Error::Dimension(format!(
                "{modality} features need at least one token, got {}x{}",
                tokens.rows(),
                tokens.cols()
            )));
        }
        if !tokens.is_finite() {
            return Err(Error::Numeric(format!("{modality} features contain non-finite values")));
        }
        Ok(Self { modality, tokens })
    }

    pub fn zero_token(modality: Modality, dim: usize) -> Self {
        Self {
            modality,
            tokens: Matrix::zeros(1, dim),
        }
    }

    pub fn token_count(&self) -> usize {
        self.tokens.rows()
    }

    pub fn dim(&self) -> usize {
        self.tokens.cols()
    }
}

/// Reads precomputed tokens from a matrix file, checking the width if given.
pub fn load_feature_file(path: &std::path::Path, modality: Modality, expected_dim: Option<usize>) -> Result<RawFeatures> {
    let m = crate::fnwm::read_matrix(path)?;
    if let Some(d) = expected_dim {
        if m.cols() != d {
            return Err(Error::Dimension(format!(
                "{}: {modality} features are {}-d, expected {d}",
                path.display(),
                m.cols()
            )));
        }
    }
    RawFeatures::new(modality, m)
}
