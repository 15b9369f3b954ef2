//! Deterministic synthetic corpora with known ground truth.
//!
//! The laughter corpus is a set of stereo soundtracks: a centred voice,
//! side-panned laughter bursts and one panned music bed. The funny corpus is
//! feature-level: raw token matrices whose label is a planted function of
//! the audio and text tokens.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::audio::{save_wav, SampleFormat, Waveform};
use crate::dataset::{ClipRecord, ClipWindow, Dataset, Label, MediaEntry};
use crate::error::{Error, Result};
use crate::laughter::{write_annotation, Event, EventKind, LaughterAnnotation};
use crate::matrix::Matrix;
use crate::model::{ClipTokens, ModelConfig};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaughterCorpusConfig {
    pub files: usize,
    pub duration_s: f64,
    pub sample_rate_hz: u32,
    pub laughs_per_file: usize,
    pub seed: u64,
}

impl Default for LaughterCorpusConfig {
    fn default() -> Self {
        Self {
            files: 10,
            duration_s: 60.0,
            sample_rate_hz: 16_000,
            laughs_per_file: 5,
            seed: 0,
        }
    }
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt()
}

fn normalize_rms(x: &mut [f64], target: f64) {
    let r = rms(x);
    if r > 0.0 {
        x.iter_mut().for_each(|v| *v *= target / r);
    }
}

fn fade(x: &mut [f64], n: usize) {
    let n = n.min(x.len() / 2);
    let len = x.len();
    for i in 0..n {
        let g = 0.5 - 0.5 * (PI * i as f64 / n as f64).cos();
        x[i] *= g;
        x[len - 1 - i] *= g;
    }
}

/// Band-passed noise with a syllabic "ha-ha" envelope.
fn laugh(rng: &mut ChaCha8Rng, n: usize, sr: f64) -> Vec<f64> {
    let fc = rng.random_range(900.0..1100.0);
    let q = 1.2;
    let w = 2.0 * PI * fc / sr;
    let alpha = w.sin() / (2.0 * q);
    let (b0, b2) = (alpha, -alpha);
    let (a0, a1, a2) = (1.0 + alpha, -2.0 * w.cos(), 1.0 - alpha);
    let rate = rng.random_range(4.0..5.0);
    let phase = rng.random_range(0.0..2.0 * PI);
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    let mut out: Vec<f64> = (0..n)
        .map(|i| {
            let x: f64 = StandardNormal.sample(rng);
            let y = (b0 * x + b2 * x2 - a1 * y1 - a2 * y2) / a0;
            x2 = x1;
            x1 = x;
            y2 = y1;
            y1 = y;
            let t = i as f64 / sr;
            y * (0.7 + 0.3 * (2.0 * PI * rate * t + phase).sin())
        })
        .collect();
    fade(&mut out, (0.03 * sr) as usize);
    normalize_rms(&mut out, 0.12 * 10f64.powf(rng.random_range(-2.0..2.0) / 20.0));
    out
}

/// Sustained three-note chord with a random timbre.
fn music(rng: &mut ChaCha8Rng, n: usize, sr: f64) -> Vec<f64> {
    let root = rng.random_range(110.0..440.0);
    let intervals = [[0.0, 4.0, 7.0], [0.0, 3.0, 7.0], [0.0, 5.0, 9.0]][rng.random_range(0..3)];
    let decay: f64 = rng.random_range(0.3..0.8);
    let trem = rng.random_range(0.5..3.0);
    let mut out: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let mut s = 0.0;
            for iv in intervals {
                let f = root * 2f64.powf(iv / 12.0);
                for h in 1..=5 {
                    let fh = f * h as f64;
                    if fh < sr / 2.0 {
                        s += decay.powi(h - 1) * (2.0 * PI * fh * t).sin();
                    }
                }
            }
            s * (0.85 + 0.15 * (2.0 * PI * trem * t).sin())
        })
        .collect();
    fade(&mut out, (0.05 * sr) as usize);
    normalize_rms(&mut out, 0.08 * 10f64.powf(rng.random_range(-2.0..2.0) / 20.0));
    out
}

/// Harmonic "speech" with syllable and phrase gating.
fn voice(rng: &mut ChaCha8Rng, n: usize, sr: f64) -> Vec<f64> {
    let f0 = rng.random_range(110.0..220.0);
    let mut gate = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let talk = (rng.random_range(1.0..4.0) * sr) as usize;
        let pause = (rng.random_range(0.2..1.2) * sr) as usize;
        for g in gate.iter_mut().skip(i).take(talk) {
            *g = 1.0;
        }
        i += talk + pause;
    }
    let syll = rng.random_range(3.0..5.0);
    let mut phase = 0.0;
    let mut out: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let f = f0 * (1.0 + 0.05 * (2.0 * PI * 0.7 * t).sin());
            phase += 2.0 * PI * f / sr;
            let s: f64 = (1..=10).map(|k| (k as f64 * phase).sin() / k as f64).sum();
            let env = (2.0 * PI * syll * t).sin().max(0.0).sqrt();
            s * env * gate[i]
        })
        .collect();
    normalize_rms(&mut out, 0.15);
    out
}

/// Places `dur` seconds somewhere in `[lo, hi - dur]` at least `gap` from
/// every placed event.
fn place(rng: &mut ChaCha8Rng, placed: &[(f64, f64)], dur: f64, lo: f64, hi: f64, gap: f64) -> Option<f64> {
    for _ in 0..10_000 {
        let s = rng.random_range(lo..(hi - dur).max(lo + 1e-9));
        if placed.iter().all(|(a, b)| s + dur + gap <= *a || s >= b + gap) {
            return Some(s);
        }
    }
    None
}

/// One soundtrack and its ground truth.
pub fn synth_soundtrack(media_id: &str, cfg: &LaughterCorpusConfig, seed: u64) -> Result<(Waveform, LaughterAnnotation)> {
    let sr = cfg.sample_rate_hz as f64;
    let n = (cfg.duration_s * sr).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut left = voice(&mut rng, n, sr);
    let mut right = left.clone();
    let mut placed: Vec<(f64, f64)> = Vec::new();
    let mut events = Vec::new();

    let mix = |rng: &mut ChaCha8Rng, sig: &[f64], start: f64, left: &mut [f64], right: &mut [f64]| {
        let pan = rng.random_range(0.5..0.9) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        let (gl, gr) = ((1.0 + pan) / 2.0, (1.0 - pan) / 2.0);
        let at = (start * sr).round() as usize;
        for (i, v) in sig.iter().enumerate() {
            if at + i < left.len() {
                left[at + i] += gl * v;
                right[at + i] += gr * v;
            }
        }
    };

    let too_short = || Error::InvalidArgument(format!("{}s is too short for the requested events", cfg.duration_s));
    let mdur = rng.random_range(4.0..8.0);
    let ms = place(&mut rng, &placed, mdur, 1.0, cfg.duration_s - 1.0, 2.0).ok_or_else(too_short)?;
    let sig = music(&mut rng, (mdur * sr) as usize, sr);
    mix(&mut rng, &sig, ms, &mut left, &mut right);
    placed.push((ms, ms + mdur));
    events.push(Event::new(ms, ms + sig.len() as f64 / sr, EventKind::Music));

    for _ in 0..cfg.laughs_per_file {
        let dur = rng.random_range(1.0..3.0);
        let s = place(&mut rng, &placed, dur, 1.0, cfg.duration_s - 1.0, 2.0).ok_or_else(too_short)?;
        let sig = laugh(&mut rng, (dur * sr) as usize, sr);
        mix(&mut rng, &sig, s, &mut left, &mut right);
        placed.push((s, s + dur));
        events.push(Event::new(s, s + sig.len() as f64 / sr, EventKind::Laughter));
    }

    let floor = Normal::new(0.0, 3e-4).expect("valid sigma");
    let to_f32 = |x: Vec<f64>, rng: &mut ChaCha8Rng| -> Vec<f32> {
        x.into_iter().map(|v| (v + floor.sample(rng)).clamp(-1.0, 1.0) as f32).collect()
    };
    let l = to_f32(left, &mut rng);
    let r = to_f32(right, &mut rng);
    let w = Waveform::new(vec![l, r], cfg.sample_rate_hz)?;
    let ann = LaughterAnnotation::new(media_id, events).with_duration(cfg.duration_s);
    Ok((w, ann))
}

/// Paths written by [`write_laughter_corpus`].
#[derive(Debug, Clone)]
pub struct LaughterCorpusFiles {
    pub wavs: Vec<PathBuf>,
    pub annotations: Vec<PathBuf>,
    /// All ground truth in one list.
    pub ground_truth: PathBuf,
    /// Media manifest for dataset building.
    pub manifest: PathBuf,
}

/// Writes `audio/<id>.wav`, `gt/<id>.json`, `ground_truth.json` and `media.json` under `dir`.
pub fn write_laughter_corpus(dir: &Path, cfg: &LaughterCorpusConfig) -> Result<LaughterCorpusFiles> {
    let audio = dir.join("audio");
    let gt = dir.join("gt");
    for d in [&audio, &gt] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let mut files = LaughterCorpusFiles {
        wavs: Vec::new(),
        annotations: Vec::new(),
        ground_truth: dir.join("ground_truth.json"),
        manifest: dir.join("media.json"),
    };
    let mut all = Vec::new();
    let mut media = Vec::new();
    for i in 0..cfg.files {
        let id = format!("synth-{i:03}");
        let (w, ann) = synth_soundtrack(&id, cfg, derive_seed(cfg.seed, &id))?;
        let wav = audio.join(format!("{id}.wav"));
        save_wav(&wav, &w, SampleFormat::Pcm16)?;
        let ap = gt.join(format!("{id}.json"));
        write_annotation(&ap, &ann)?;
        media.push(MediaEntry {
            media_id: id.clone(),
            wav_path: PathBuf::from("audio").join(format!("{id}.wav")),
            frames_path: None,
            frame_height: None,
            frame_width: None,
            transcript_path: None,
        });
        files.wavs.push(wav);
        files.annotations.push(ap);
        all.push(ann);
    }
    let write_json = |p: &Path, text: String| fs::write(p, text + "\n").map_err(|e| Error::io(p, e));
    write_json(&files.ground_truth, serde_json::to_string_pretty(&all)?)?;
    write_json(&files.manifest, serde_json::to_string_pretty(&media)?)?;
    Ok(files)
}

/// Which modalities carry the planted label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantedSignal {
    /// Label from the sum of an audio score and a text score.
    #[default]
    AudioText,
    /// Label from the audio score alone; text carries noise only.
    AudioOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FunnyCorpusConfig {
    pub train: usize,
    pub test: usize,
    pub seed: u64,
    pub signal: PlantedSignal,
    /// Length of the planted direction relative to unit per-entry noise.
    pub strength: f64,
    /// Minimum |score| kept, so the classes are separable.
    pub margin: f64,
}

impl Default for FunnyCorpusConfig {
    fn default() -> Self {
        Self {
            train: 2000,
            test: 500,
            seed: 0,
            signal: PlantedSignal::AudioText,
            strength: 3.0,
            margin: 0.5,
        }
    }
}

fn unit_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| (x / n) as f32).collect()
}

fn noisy_tokens(rng: &mut ChaCha8Rng, rows: usize, dim: usize, dir: &[f32], coef: f64) -> Matrix {
    let mut m = Matrix::zeros(rows, dim);
    for r in 0..rows {
        for (j, v) in m.row_mut(r).iter_mut().enumerate() {
            let noise: f64 = StandardNormal.sample(rng);
            let planted = dir.get(j).map_or(0.0, |d| coef * *d as f64);
            *v = (noise + planted) as f32;
        }
    }
    m
}

/// Train and test splits; token shapes follow `model`.
pub fn synth_funny_corpus(cfg: &FunnyCorpusConfig, model: &ModelConfig) -> Result<(Dataset, Dataset)> {
    let mut dirs = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "directions"));
    let audio_dir = unit_direction(&mut dirs, model.audio_dim);
    let text_dir = unit_direction(&mut dirs, model.text_dim);
    let make = |split: &str, count: usize| -> Result<Dataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, split));
        let mut data = Dataset::default();
        while data.len() < count {
            let z: f64 = StandardNormal.sample(&mut rng);
            let ea: f64 = StandardNormal.sample(&mut rng);
            let et: f64 = StandardNormal.sample(&mut rng);
            let a = z + 0.5 * ea;
            let t = match cfg.signal {
                PlantedSignal::AudioText => z + 0.5 * et,
                PlantedSignal::AudioOnly => et,
            };
            let score = match cfg.signal {
                PlantedSignal::AudioText => a + t,
                PlantedSignal::AudioOnly => a,
            };
            if score.abs() < cfg.margin {
                continue;
            }
            let label = if score > 0.0 { Label::Funny } else { Label::NotFunny };
            let tokens = ClipTokens::new(
                noisy_tokens(&mut rng, model.m_visual, model.visual_dim, &[], 0.0),
                noisy_tokens(&mut rng, model.m_text, model.text_dim, &text_dir, cfg.strength * t),
                noisy_tokens(&mut rng, model.m_audio, model.audio_dim, &audio_dir, cfg.strength * a),
            );
            let clip_id = format!("{split}-{:05}", data.len());
            data.push(
                ClipRecord {
                    features: Dataset::feature_paths(&clip_id),
                    clip_id,
                    media_id: format!("synth-funny-{split}"),
                    wav_path: None,
                    frames_path: None,
                    frame_height: None,
                    frame_width: None,
                    transcript_path: None,
                    span: ClipWindow::new(0.0, 8.0),
                    label,
                    augment_seed: None,
                },
                tokens,
            );
        }
        Ok(data)
    };
    Ok((make("train", cfg.train)?, make("test", cfg.test)?))
}
