use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ClipWindow;
use crate::encoders::FrameStack;
use crate::error::Result;

/// Raw media of one clip, prior to encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipMedia {
    pub audio: Vec<f32>,
    pub sample_rate_hz: u32,
    pub frames: Option<FrameStack>,
    pub fps: f64,
    pub transcript: String,
}

/// Cuts `window` out of mono `audio` (and `frames`, sampled at `fps`),
/// zero-filling audio outside the media and clamping frame indices.
pub fn cut_clip(
    audio: &[f32],
    sample_rate_hz: u32,
    frames: Option<&FrameStack>,
    fps: f64,
    transcript: String,
    window: &ClipWindow,
) -> Result<ClipMedia> {
    let sr = sample_rate_hz as f64;
    let a = (window.start_s * sr).round() as i64;
    let b = (window.end_s * sr).round() as i64;
    let clip: Vec<f32> = (a..b)
        .map(|i| {
            if i >= 0 && (i as usize) < audio.len() {
                audio[i as usize]
            } else {
                0.0
            }
        })
        .collect();
    let frames = match frames {
        Some(f) if !f.is_empty() => {
            let first = (window.start_s * fps).round() as isize;
            let n = (window.duration_s() * fps).round() as isize;
            Some(f.select(&(first..first + n).collect::<Vec<_>>())?)
        }
        _ => None,
    };
    Ok(ClipMedia {
        audio: clip,
        sample_rate_hz,
        frames,
        fps,
        transcript,
    })
}

/// Keeps the final `n_s` seconds, or pads at the end: zeros for audio,
/// repeats of the last frame for frames. The transcript is untouched.
pub fn pad_or_crop(mut clip: ClipMedia, n_s: f64) -> Result<ClipMedia> {
    let n = (n_s * clip.sample_rate_hz as f64).round() as usize;
    if clip.audio.len() > n {
        clip.audio.drain(..clip.audio.len() - n);
    } else {
        clip.audio.resize(n, 0.0);
    }
    if let Some(f) = clip.frames.take() {
        let nf = (n_s * clip.fps).round() as isize;
        let have = f.len() as isize;
        let idx: Vec<isize> = if have >= nf {
            (have - nf..have).collect()
        } else {
            (0..nf).collect()
        };
        clip.frames = Some(f.select(&idx)?);
    }
    Ok(clip)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub max_shift_s: f64,
    pub max_noise_sigma: f64,
    pub flip_p: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            max_shift_s: 0.5,
            max_noise_sigma: 0.005,
            flip_p: 0.5,
        }
    }
}

/// Random choices behind one augmentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentDraw {
    /// Circular shift in samples; positive moves audio later.
    pub shift_samples: i64,
    pub noise_sigma: f64,
    pub flip_horizontal: bool,
    pub flip_vertical: bool,
    /// Quarter turns.
    pub rotation: u32,
    pub noise_seed: u64,
}

impl AugmentDraw {
    pub fn identity() -> Self {
        Self {
            shift_samples: 0,
            noise_sigma: 0.0,
            flip_horizontal: false,
            flip_vertical: false,
            rotation: 0,
            noise_seed: 0,
        }
    }

    pub fn sample(cfg: &AugmentConfig, sample_rate_hz: u32, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let max = (cfg.max_shift_s * sample_rate_hz as f64).round() as i64;
        Self {
            shift_samples: rng.random_range(-max..=max),
            noise_sigma: rng.random::<f64>() * cfg.max_noise_sigma,
            flip_horizontal: rng.random::<f64>() < cfg.flip_p,
            flip_vertical: rng.random::<f64>() < cfg.flip_p,
            rotation: rng.random_range(0..4u32),
            noise_seed: rng.random(),
        }
    }
}

pub fn apply_augment(clip: &ClipMedia, d: &AugmentDraw) -> ClipMedia {
    let mut out = clip.clone();
    let n = out.audio.len();
    if n > 0 {
        let k = d.shift_samples.rem_euclid(n as i64) as usize;
        out.audio.rotate_right(k);
    }
    if d.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, d.noise_sigma).expect("finite sigma");
        let mut rng = ChaCha8Rng::seed_from_u64(d.noise_seed);
        for s in &mut out.audio {
            *s += normal.sample(&mut rng) as f32;
        }
    }
    if let Some(f) = out.frames.take() {
        let mut f = if d.flip_horizontal { f.flip_horizontal() } else { f };
        if d.flip_vertical {
            f = f.flip_vertical();
        }
        out.frames = Some(f.rotate90(d.rotation));
    }
    out
}

/// Seeded training-time augmentation; label and transcript are untouched.
pub fn augment(clip: &ClipMedia, cfg: &AugmentConfig, seed: u64) -> (ClipMedia, AugmentDraw) {
    let d = AugmentDraw::sample(cfg, clip.sample_rate_hz, seed);
    (apply_augment(clip, &d), d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn media(secs: f64) -> ClipMedia {
        let n = (secs * 100.0) as usize;
        let frames = FrameStack::new(2, 2, Matrix::from_vec(secs as usize, 4, (0..secs as usize * 4).map(|v| v as f32).collect()).unwrap()).unwrap();
        ClipMedia {
            audio: (0..n).map(|i| i as f32 + 1.0).collect(),
            sample_rate_hz: 100,
            frames: Some(frames),
            fps: 1.0,
            transcript: "x".into(),
        }
    }

    #[test]
    fn crop_keeps_the_tail() {
        let c = pad_or_crop(media(12.0), 8.0).unwrap();
        assert_eq!(c.audio.len(), 800);
        assert_eq!(c.audio[0], 401.0);
        assert_eq!(c.frames.as_ref().unwrap().len(), 8);
        assert_eq!(c.frames.unwrap().frame(0)[0], 16.0);
    }

    #[test]
    fn pad_appends_zeros_and_repeats_last_frame() {
        let c = pad_or_crop(media(5.0), 8.0).unwrap();
        assert_eq!(c.audio.len(), 800);
        assert_eq!(c.audio[499], 500.0);
        assert!(c.audio[500..].iter().all(|v| *v == 0.0));
        let f = c.frames.unwrap();
        assert_eq!(f.len(), 8);
        assert_eq!(f.frame(7), f.frame(4));
        assert_eq!(c.transcript, "x");
    }

    #[test]
    fn exact_length_is_identity() {
        let m = media(8.0);
        assert_eq!(pad_or_crop(m.clone(), 8.0).unwrap(), m);
    }

    #[test]
    fn cut_pads_left_before_media_start() {
        let m = media(10.0);
        let c = cut_clip(&m.audio, 100, m.frames.as_ref(), 1.0, String::new(), &ClipWindow::new(-2.0, 3.0)).unwrap();
        assert_eq!(c.audio.len(), 500);
        assert!(c.audio[..200].iter().all(|v| *v == 0.0));
        assert_eq!(c.audio[200], 1.0);
        assert_eq!(c.frames.unwrap().len(), 5);
    }

    #[test]
    fn identity_draw_and_double_flip() {
        let m = media(8.0);
        assert_eq!(apply_augment(&m, &AugmentDraw::identity()), m);
        let flip = AugmentDraw { flip_horizontal: true, ..AugmentDraw::identity() };
        assert_eq!(apply_augment(&apply_augment(&m, &flip), &flip), m);
        let cfg = AugmentConfig::default();
        assert_eq!(augment(&m, &cfg, 3), augment(&m, &cfg, 3));
        let (a, d) = augment(&m, &cfg, 3);
        assert!(d.shift_samples.abs() <= 50 && d.noise_sigma <= 0.005);
        assert_eq!(a.transcript, m.transcript);
    }
}
