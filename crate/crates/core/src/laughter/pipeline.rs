use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::{featurizer_registry, standardize_columns, SegmentFeaturizer};
use super::kmeans::{kmeans, ClusterResult};
use super::peaks::{detect_energy_peaks, PeakConfig};
use super::{Event, EventKind, LaughterAnnotation};
use crate::audio::{load_wav, remove_voice, resample_with, resampler_registry, MelParams, Waveform};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::span::TimeSpan;

/// Clustering stage settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub k: usize,
    pub seed: u64,
    /// Registered segment featurizer name.
    pub featurizer: String,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            k: 2,
            seed: 0,
            featurizer: "mel-stats".into(),
        }
    }
}

/// Index of the cluster treated as music: the one with the fewest members,
/// ties going to the smaller total duration. `None` when fewer than two
/// clusters are populated.
pub fn music_cluster(cr: &ClusterResult, spans: &[TimeSpan]) -> Option<usize> {
    let sizes = cr.cluster_sizes();
    let mut durations = vec![0.0f64; cr.k];
    for (s, &a) in spans.iter().zip(&cr.assignments) {
        durations[a] += s.duration_s();
    }
    let populated: Vec<usize> = (0..cr.k).filter(|&c| sizes[c] > 0).collect();
    if populated.len() < 2 {
        return None;
    }
    populated.into_iter().min_by(|&a, &b| {
        sizes[a]
            .cmp(&sizes[b])
            .then(durations[a].total_cmp(&durations[b]))
            .then(a.cmp(&b))
    })
}

/// Labels the smallest cluster as music and everything else as laughter.
pub fn select_laughter_clusters(
    media_id: &str,
    cr: &ClusterResult,
    spans: &[TimeSpan],
) -> Result<LaughterAnnotation> {
    if cr.assignments.len() != spans.len() {
        return Err(Error::Dimension(format!(
            "{} assignments for {} spans",
            cr.assignments.len(),
            spans.len()
        )));
    }
    let music = music_cluster(cr, spans);
    let events = spans
        .iter()
        .zip(&cr.assignments)
        .map(|(s, &a)| Event {
            start_s: s.start_s,
            end_s: s.end_s,
            kind: if Some(a) == music { EventKind::Music } else { EventKind::Laughter },
        })
        .collect();
    Ok(LaughterAnnotation::new(media_id, events))
}

/// Background segments of one file with their unstandardized descriptors.
#[derive(Debug, Clone)]
pub struct SegmentedMedia {
    pub media_id: String,
    pub duration_s: f64,
    pub spans: Vec<TimeSpan>,
    pub rows: Matrix,
}

/// Steps (i) and (ii): voice removal, energy peaks and segment descriptors.
pub fn segment_media(
    media_id: &str,
    w: &Waveform,
    peaks: &PeakConfig,
    mel: &MelParams,
    featurizer: &dyn SegmentFeaturizer,
    resampler: &str,
) -> Result<SegmentedMedia> {
    let resampler = resampler_registry().get(resampler)?;
    let w = resample_with(w, mel.sample_rate_hz, resampler.as_ref())?;
    let background = remove_voice(&w)?;
    let spans = detect_energy_peaks(&background, peaks)?;
    let rows = featurizer.rows(&background, &spans, mel)?;
    Ok(SegmentedMedia {
        media_id: media_id.to_string(),
        duration_s: w.duration_s(),
        spans,
        rows,
    })
}

/// Step (iii) over a whole corpus: descriptors are standardized jointly and
/// clustered together, then each file gets its own annotation.
///
/// When the corpus has fewer segments than `k`, `k` is reduced to the
/// segment count.
pub fn label_corpus(media: &[SegmentedMedia], k: usize, seed: u64) -> Result<Vec<LaughterAnnotation>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let parts: Vec<&Matrix> = media.iter().map(|m| &m.rows).filter(|m| m.rows() > 0).collect();
    let all_spans: Vec<TimeSpan> = media.iter().flat_map(|m| m.spans.iter().copied()).collect();
    let mut out = Vec::with_capacity(media.len());
    if all_spans.is_empty() {
        for m in media {
            out.push(LaughterAnnotation::new(m.media_id.clone(), Vec::new()).with_duration(m.duration_s));
        }
        return Ok(out);
    }
    let mut x = Matrix::vstack(&parts)?;
    standardize_columns(&mut x);
    let k = k.min(x.rows());
    let cr = kmeans(&x, k, seed)?;
    let music = music_cluster(&cr, &all_spans);
    log::debug!(
        "clustered {} segments into {k} clusters, music cluster {music:?}",
        x.rows()
    );

    let mut offset = 0;
    for m in media {
        let n = m.spans.len();
        let events = m
            .spans
            .iter()
            .zip(&cr.assignments[offset..offset + n])
            .map(|(s, &a)| Event {
                start_s: s.start_s,
                end_s: s.end_s,
                kind: if Some(a) == music { EventKind::Music } else { EventKind::Laughter },
            })
            .collect();
        offset += n;
        out.push(LaughterAnnotation::new(m.media_id.clone(), events).with_duration(m.duration_s));
    }
    Ok(out)
}

/// Full detector settings for [`detect_laughter_files`].
#[derive(Debug, Clone, Default)]
pub struct DetectorConfig {
    pub peaks: PeakConfig,
    pub mel: MelParams,
    pub cluster: ClusterConfig,
    pub resampler: String,
}

impl DetectorConfig {
    pub fn new(peaks: PeakConfig, mel: MelParams, k: usize, seed: u64) -> Self {
        Self {
            peaks,
            mel,
            cluster: ClusterConfig {
                k,
                seed,
                ..Default::default()
            },
            resampler: "sinc".into(),
        }
    }
}

pub fn media_id_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Runs the three-step detector over several files, clustering jointly.
pub fn detect_laughter_files(paths: &[&Path], cfg: &DetectorConfig) -> Result<Vec<LaughterAnnotation>> {
    let featurizer = featurizer_registry().get(&cfg.cluster.featurizer)?;
    let media = paths
        .iter()
        .map(|p| {
            let w = load_wav(p)?;
            segment_media(&media_id_of(p), &w, &cfg.peaks, &cfg.mel, featurizer.as_ref(), &cfg.resampler)
        })
        .collect::<Result<Vec<_>>>()?;
    label_corpus(&media, cfg.cluster.k, cfg.cluster.seed)
}

/// Detects laughter in a single stereo or 5.1 WAV file.
pub fn detect_laughter(
    path: impl AsRef<Path>,
    cfg: &PeakConfig,
    p: &MelParams,
    k: usize,
    seed: u64,
) -> Result<LaughterAnnotation> {
    let cfg = DetectorConfig::new(cfg.clone(), p.clone(), k, seed);
    let mut anns = detect_laughter_files(&[path.as_ref()], &cfg)?;
    Ok(anns.remove(0))
}
