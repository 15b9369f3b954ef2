use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    apply_augment, cut_clip, extract_positives, pad_or_crop, sample_negatives, AugmentConfig, AugmentDraw, ClipMedia,
    ClipWindow, Transcript,
};
use crate::audio::{load_wav, resample, MelAnalyzer, MelParams};
use crate::encoders::{provider_registry, FrameStack, Modality, ProviderInput, RawFeatures};
use crate::error::{Error, Result};
use crate::fnwm;
use crate::laughter::LaughterAnnotation;
use crate::model::{ClipTokens, ModelConfig};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    NotFunny,
    Funny,
}

impl Label {
    /// Class index; funny is the positive class 1.
    pub fn index(self) -> usize {
        match self {
            Label::NotFunny => 0,
            Label::Funny => 1,
        }
    }

    pub fn is_funny(self) -> bool {
        self == Label::Funny
    }
}

/// One media file listed in an input manifest. Relative paths are resolved
/// against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediaEntry {
    pub media_id: String,
    pub wav_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_height: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript_path: Option<PathBuf>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn read_media_manifest(path: &Path) -> Result<Vec<MediaEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut entries: Vec<MediaEntry> =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    for e in &mut entries {
        e.wav_path = resolve(base, &e.wav_path);
        e.frames_path = e.frames_path.as_deref().map(|p| resolve(base, p));
        e.transcript_path = e.transcript_path.as_deref().map(|p| resolve(base, p));
        if e.frames_path.is_some() && (e.frame_height.is_none() || e.frame_width.is_none()) {
            return Err(Error::Format(format!("{}: frames need frame_height and frame_width", e.media_id)));
        }
    }
    Ok(entries)
}

/// Encoded-feature files of one clip, relative to the dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePaths {
    pub visual: String,
    pub text: String,
    pub audio: String,
}

/// Output manifest entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub clip_id: String,
    pub media_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wav_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_height: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript_path: Option<String>,
    pub span: ClipWindow,
    pub label: Label,
    /// Seed of the augmentation draw when this clip is an augmented copy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augment_seed: Option<u64>,
    pub features: FeaturePaths,
}

/// Clips with their encoded tokens.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub records: Vec<ClipRecord>,
    pub tokens: Vec<ClipTokens>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
const FEATURE_DIR: &str = "features";

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: ClipRecord, tokens: ClipTokens) {
        self.records.push(record);
        self.tokens.push(tokens);
    }

    pub fn extend(&mut self, other: Dataset) {
        self.records.extend(other.records);
        self.tokens.extend(other.tokens);
    }

    pub fn labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.label.index()).collect()
    }

    /// Feature paths a clip with this id gets when saved.
    pub fn feature_paths(clip_id: &str) -> FeaturePaths {
        let f = |k: &str| format!("{FEATURE_DIR}/{clip_id}.{k}.fnwm");
        FeaturePaths {
            visual: f("v"),
            text: f("t"),
            audio: f("a"),
        }
    }

    /// Writes `manifest.json` and one matrix file per clip and modality.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let fdir = dir.join(FEATURE_DIR);
        fs::create_dir_all(&fdir).map_err(|e| Error::io(&fdir, e))?;
        for (r, t) in self.records.iter().zip(&self.tokens) {
            for (rel, m) in [(&r.features.visual, &t.visual), (&r.features.text, &t.text), (&r.features.audio, &t.audio)] {
                fnwm::write_matrix(&dir.join(rel), m)?;
            }
        }
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&self.records)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let records: Vec<ClipRecord> =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let tokens = records
            .iter()
            .map(|r| {
                let read = |rel: &str| fnwm::read_matrix(&dir.join(rel));
                Ok(ClipTokens::new(read(&r.features.visual)?, read(&r.features.text)?, read(&r.features.audio)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { records, tokens })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Clip length in seconds.
    pub n_s: f64,
    pub fps: f64,
    /// Negatives drawn per positive.
    pub neg_ratio: f64,
    /// No laughter may start within this many seconds after a negative clip.
    pub guard_s: f64,
    /// Extra augmented copies of each clip.
    pub augment_copies: usize,
    pub augment: AugmentConfig,
    pub audio_provider: String,
    pub visual_provider: String,
    pub text_provider: String,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_s: 8.0,
            fps: 1.0,
            neg_ratio: 1.0,
            guard_s: 1.0,
            augment_copies: 0,
            augment: AugmentConfig::default(),
            audio_provider: "mel-stats".into(),
            visual_provider: "histogram".into(),
            text_provider: "hash-bow".into(),
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.n_s > 0.0 && self.fps > 0.0) {
            return Err(Error::Config("dataset.n_s and dataset.fps must be positive".into()));
        }
        if !(self.neg_ratio >= 0.0 && self.guard_s >= 0.0) {
            return Err(Error::Config("dataset.neg_ratio and dataset.guard_s must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Encodes one clip's media into per-modality tokens.
pub fn encode_clip(media: &ClipMedia, mel: &MelAnalyzer, cfg: &DatasetConfig, model: &ModelConfig) -> Result<ClipTokens> {
    let reg = provider_registry(model.text_dim);
    let spec = mel.analyze(&media.audio)?;
    let audio = reg.get(&cfg.audio_provider)?.encode(Modality::Audio, ProviderInput::Mel(&spec), model.m_audio)?;
    let visual = match &media.frames {
        Some(f) => reg.get(&cfg.visual_provider)?.encode(Modality::Visual, ProviderInput::Frames(f), model.m_visual)?,
        None => RawFeatures::zero_token(Modality::Visual, model.visual_dim),
    };
    let text = reg
        .get(&cfg.text_provider)?
        .encode(Modality::Text, ProviderInput::Text(&media.transcript), model.m_text)?;
    Ok(ClipTokens::from_raw(visual, text, audio))
}

/// One media file decoded and resampled to the mel rate.
#[derive(Debug, Clone)]
pub struct LoadedMedia {
    pub samples: Vec<f32>,
    pub sample_rate_hz: u32,
    pub frames: Option<FrameStack>,
    pub transcript: Transcript,
}

impl LoadedMedia {
    pub fn open(entry: &MediaEntry, mel: &MelParams) -> Result<Self> {
        let wav = load_wav(&entry.wav_path)?;
        let mono = resample(&wav.mixdown(), mel.sample_rate_hz)?;
        let frames = match (&entry.frames_path, entry.frame_height, entry.frame_width) {
            (Some(p), Some(h), Some(w)) => Some(FrameStack::new(h, w, fnwm::read_matrix(p)?)?),
            (None, _, _) => None,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "{}: frames need frame_height and frame_width",
                    entry.media_id
                )))
            }
        };
        let transcript = match &entry.transcript_path {
            Some(p) => Transcript::read(p)?,
            None => Transcript::default(),
        };
        Ok(Self {
            sample_rate_hz: mono.sample_rate_hz(),
            samples: mono.samples()?.to_vec(),
            frames,
            transcript,
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// The `n_s`-second clip for `w`.
    pub fn clip(&self, w: &ClipWindow, cfg: &DatasetConfig) -> Result<ClipMedia> {
        let media = cut_clip(
            &self.samples,
            self.sample_rate_hz,
            self.frames.as_ref(),
            cfg.fps,
            self.transcript.text_for(w),
            w,
        )?;
        pad_or_crop(media, cfg.n_s)
    }
}

/// Positive and negative clips of one media file, plus augmented copies.
pub fn build_media_clips(
    entry: &MediaEntry,
    ann: &LaughterAnnotation,
    cfg: &DatasetConfig,
    mel: &MelParams,
    model: &ModelConfig,
    seed: u64,
) -> Result<Dataset> {
    cfg.validate()?;
    let loaded = LoadedMedia::open(entry, mel)?;
    let duration = loaded.duration_s();
    let analyzer = MelAnalyzer::new(mel)?;
    let media_seed = derive_seed(seed, &entry.media_id);

    let positives = extract_positives(ann, cfg.n_s);
    let n_neg = (positives.len() as f64 * cfg.neg_ratio).round() as usize;
    let negatives = sample_negatives(ann, duration, cfg.n_s, n_neg, derive_seed(media_seed, "negatives"), cfg.guard_s);

    let mut out = Dataset::default();
    let windows = positives
        .iter()
        .map(|w| (w, Label::Funny, "pos"))
        .chain(negatives.iter().map(|w| (w, Label::NotFunny, "neg")));
    let mut counters = [0usize; 2];
    for (w, label, tag) in windows {
        let i = counters[label.index()];
        counters[label.index()] += 1;
        let base_id = format!("{}-{tag}-{i:04}", entry.media_id);
        let media = loaded.clip(w, cfg)?;
        let record = |clip_id: String, augment_seed: Option<u64>| ClipRecord {
            features: Dataset::feature_paths(&clip_id),
            clip_id,
            media_id: entry.media_id.clone(),
            wav_path: Some(entry.wav_path.display().to_string()),
            frames_path: entry.frames_path.as_ref().map(|p| p.display().to_string()),
            frame_height: entry.frame_height,
            frame_width: entry.frame_width,
            transcript_path: entry.transcript_path.as_ref().map(|p| p.display().to_string()),
            span: *w,
            label,
            augment_seed,
        };
        out.push(record(base_id.clone(), None), encode_clip(&media, &analyzer, cfg, model)?);
        for k in 0..cfg.augment_copies {
            let s = derive_seed(media_seed, &format!("{base_id}-aug{k}"));
            let draw = AugmentDraw::sample(&cfg.augment, media.sample_rate_hz, s);
            let aug = apply_augment(&media, &draw);
            out.push(record(format!("{base_id}-aug{k}"), Some(s)), encode_clip(&aug, &analyzer, cfg, model)?);
        }
    }
    Ok(out)
}
