use std::sync::Arc;

use super::{FrameStack, Modality, RawFeatures};
use crate::error::{Error, Result};
use crate::laughter::column_mean_std;
use crate::matrix::Matrix;
use crate::registry::{Named, Registry};

pub const HISTOGRAM_BINS: usize = 64;

/// One modality's clip-level input handed to a provider.
#[derive(Debug, Clone, Copy)]
pub enum ProviderInput<'a> {
    Mel(&'a Matrix),
    Frames(&'a FrameStack),
    Text(&'a str),
    Tokens(&'a Matrix),
}

pub trait FeatureProvider: Named + Send + Sync {
    /// Token width this provider emits for inputs of width `input_cols`.
    fn dim(&self, input_cols: usize) -> usize;
    fn encode(&self, modality: Modality, input: ProviderInput<'_>, m: usize) -> Result<RawFeatures>;
}

fn wrong_input(provider: &str, input: &ProviderInput<'_>) -> Error {
    let kind = match input {
        ProviderInput::Mel(_) => "mel spectrogram",
        ProviderInput::Frames(_) => "frame stack",
        ProviderInput::Text(_) => "text",
        ProviderInput::Tokens(_) => "token matrix",
    };
    Error::Config(format!("feature provider `{provider}` cannot encode a {kind}"))
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidArgument("token count m must be at least 1".into()));
    }
    Ok(())
}

/// `m` contiguous index ranges over `n` items. When `n < m` ranges repeat
/// single items so that exactly `m` ranges come back.
pub fn chunk_bounds(n: usize, m: usize) -> Vec<(usize, usize)> {
    (0..m)
        .map(|j| {
            let a = j * n / m;
            let b = ((j + 1) * n / m).max(a + 1).min(n.max(1));
            (a, b)
        })
        .collect()
}

/// Per-chunk mean and std of log-Mel frames.
#[derive(Debug, Clone, Default)]
pub struct MelChunkStats;

impl Named for MelChunkStats {
    fn name(&self) -> &'static str {
        "mel-stats"
    }
}

pub fn encode_audio_stub(mel: &Matrix, m: usize) -> Result<RawFeatures> {
    check_m(m)?;
    if mel.rows() == 0 {
        return Ok(RawFeatures::zero_token(Modality::Audio, 2 * mel.cols()));
    }
    let mut tokens = Matrix::zeros(m, 2 * mel.cols());
    for (j, (a, b)) in chunk_bounds(mel.rows(), m).into_iter().enumerate() {
        let chunk = Matrix::from_vec(b - a, mel.cols(), mel.as_slice()[a * mel.cols()..b * mel.cols()].to_vec())?;
        tokens.row_mut(j).copy_from_slice(&column_mean_std(&chunk));
    }
    RawFeatures::new(Modality::Audio, tokens)
}

impl FeatureProvider for MelChunkStats {
    fn dim(&self, input_cols: usize) -> usize {
        2 * input_cols
    }

    fn encode(&self, modality: Modality, input: ProviderInput<'_>, m: usize) -> Result<RawFeatures> {
        match input {
            ProviderInput::Mel(mel) => Ok(RawFeatures {
                modality,
                ..encode_audio_stub(mel, m)?
            }),
            other => Err(wrong_input(self.name(), &other)),
        }
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Signed hashed bag of words. Word `w` adds `±1` at `fnv1a64(w) % dim`,
/// negative when the hash's top bit is set; word `i` goes to token `i % m`.
#[derive(Debug, Clone)]
pub struct HashBow {
    pub dim: usize,
}

impl Named for HashBow {
    fn name(&self) -> &'static str {
        "hash-bow"
    }
}

pub fn encode_text_stub(transcript: &str, m: usize, dim: usize) -> Result<RawFeatures> {
    check_m(m)?;
    if dim < 8 {
        return Err(Error::InvalidArgument(format!("text feature width {dim} is below 8")));
    }
    let lower = transcript.to_lowercase();
    let words: Vec<&str> = lower.split_whitespace().collect();
    if words.is_empty() {
        return Ok(RawFeatures::zero_token(Modality::Text, dim));
    }
    let mut tokens = Matrix::zeros(m, dim);
    for (i, w) in words.iter().enumerate() {
        let h = fnv1a64(w.as_bytes());
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        let row = tokens.row_mut(i % m);
        row[(h % dim as u64) as usize] += sign;
    }
    RawFeatures::new(Modality::Text, tokens)
}

impl FeatureProvider for HashBow {
    fn dim(&self, _input_cols: usize) -> usize {
        self.dim
    }

    fn encode(&self, modality: Modality, input: ProviderInput<'_>, m: usize) -> Result<RawFeatures> {
        match input {
            ProviderInput::Text(s) => Ok(RawFeatures {
                modality,
                ..encode_text_stub(s, m, self.dim)?
            }),
            other => Err(wrong_input(self.name(), &other)),
        }
    }
}

/// Per-frame 64-bin intensity histogram plus mean absolute change from the
/// previous frame, averaged over `m` chunks of frames.
#[derive(Debug, Clone, Default)]
pub struct IntensityHistogram;

impl Named for IntensityHistogram {
    fn name(&self) -> &'static str {
        "histogram"
    }
}

fn histogram_bin(v: f32) -> usize {
    ((v * HISTOGRAM_BINS as f32).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1)
}

pub fn encode_visual_stub(frames: &FrameStack, m: usize) -> Result<RawFeatures> {
    check_m(m)?;
    let dim = HISTOGRAM_BINS + 1;
    if frames.is_empty() {
        return Ok(RawFeatures::zero_token(Modality::Visual, dim));
    }
    let px = (frames.height * frames.width) as f32;
    let per_frame: Vec<Vec<f32>> = (0..frames.len())
        .map(|i| {
            let f = frames.frame(i);
            let mut row = vec![0.0f32; dim];
            for v in f {
                row[histogram_bin(*v)] += 1.0;
            }
            row[..HISTOGRAM_BINS].iter_mut().for_each(|c| *c /= px);
            if i > 0 {
                let prev = frames.frame(i - 1);
                let diff: f32 = f.iter().zip(prev).map(|(a, b)| (a - b).abs()).sum();
                row[HISTOGRAM_BINS] = diff / px;
            }
            row
        })
        .collect();
    let mut tokens = Matrix::zeros(m, dim);
    for (j, (a, b)) in chunk_bounds(per_frame.len(), m).into_iter().enumerate() {
        let out = tokens.row_mut(j);
        for row in &per_frame[a..b] {
            for (o, v) in out.iter_mut().zip(row) {
                *o += *v / (b - a) as f32;
            }
        }
    }
    RawFeatures::new(Modality::Visual, tokens)
}

impl FeatureProvider for IntensityHistogram {
    fn dim(&self, _input_cols: usize) -> usize {
        HISTOGRAM_BINS + 1
    }

    fn encode(&self, modality: Modality, input: ProviderInput<'_>, m: usize) -> Result<RawFeatures> {
        match input {
            ProviderInput::Frames(f) => Ok(RawFeatures {
                modality,
                ..encode_visual_stub(f, m)?
            }),
            other => Err(wrong_input(self.name(), &other)),
        }
    }
}

/// Tokens computed elsewhere, used as-is; `m` is ignored.
#[derive(Debug, Clone, Default)]
pub struct Precomputed;

impl Named for Precomputed {
    fn name(&self) -> &'static str {
        "precomputed"
    }
}

impl FeatureProvider for Precomputed {
    fn dim(&self, input_cols: usize) -> usize {
        input_cols
    }

    fn encode(&self, modality: Modality, input: ProviderInput<'_>, _m: usize) -> Result<RawFeatures> {
        match input {
            ProviderInput::Tokens(t) => RawFeatures::new(modality, t.clone()),
            other => Err(wrong_input(self.name(), &other)),
        }
    }
}

pub fn provider_registry(text_dim: usize) -> Registry<dyn FeatureProvider> {
    let mut reg: Registry<dyn FeatureProvider> = Registry::new("feature provider");
    reg.register(Arc::new(MelChunkStats))
        .register(Arc::new(HashBow { dim: text_dim }))
        .register(Arc::new(IntensityHistogram))
        .register(Arc::new(Precomputed));
    reg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunk_bounds_cover_everything_once() {
        for n in 1..30 {
            for m in 1..10 {
                let b = chunk_bounds(n, m);
                assert_eq!(b.len(), m);
                if n >= m {
                    assert_eq!(b[0].0, 0);
                    assert_eq!(b[m - 1].1, n);
                    assert!(b.windows(2).all(|w| w[0].1 == w[1].0));
                }
                assert!(b.iter().all(|(a, e)| a < e && *e <= n));
            }
        }
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn empty_inputs_give_one_zero_token() {
        let t = encode_text_stub("  \n\t", 4, 16).unwrap();
        assert_eq!((t.token_count(), t.dim()), (1, 16));
        assert!(t.tokens.as_slice().iter().all(|v| *v == 0.0));
        let f = FrameStack::new(2, 2, Matrix::zeros(0, 4)).unwrap();
        assert_eq!(encode_visual_stub(&f, 3).unwrap().token_count(), 1);
    }

    #[test]
    fn providers_reject_foreign_inputs() {
        let reg = provider_registry(32);
        let err = reg.get("hash-bow").unwrap().encode(Modality::Text, ProviderInput::Tokens(&Matrix::zeros(1, 2)), 1);
        assert!(matches!(err, Err(Error::Config(_))));
        assert!(encode_text_stub("x", 1, 4).is_err());
        assert!(encode_audio_stub(&Matrix::zeros(3, 2), 0).is_err());
    }
}
