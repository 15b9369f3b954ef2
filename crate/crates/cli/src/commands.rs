use std::fs;
use std::path::{Path, PathBuf};

use funnynet::audio::{load_wav, MelParams};
use funnynet::config::RunConfig;
use funnynet::dataset::{build_media_clips, read_media_manifest, Dataset, LoadedMedia, MediaEntry};
use funnynet::eval::{classification_metrics, evaluate_laughter};
use funnynet::laughter::{
    featurizer_registry, label_corpus, media_id_of, read_annotations, LaughterAnnotation, SegmentedMedia,
};
use funnynet::model::{attention_csv, contribution_registry, contributions_csv, FunnyNet};
use funnynet::predict::{predict_timeline, timeline_csv};
use funnynet::synth::{synth_funny_corpus, write_laughter_corpus, FunnyCorpusConfig, LaughterCorpusConfig};
use funnynet::train::{predict_probabilities, train};
use funnynet::{Error, Result};
use log::info;
use serde::Serialize;

use crate::par::par_map;
use crate::{Cli, Command, CorpusKind};

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize + ?Sized>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

/// Writes to `out`, or stdout when unset.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn segment_files(wavs: &[PathBuf], cfg: &RunConfig, jobs: usize) -> Result<Vec<SegmentedMedia>> {
    let det = cfg.detector();
    let featurizer = featurizer_registry().get(&det.cluster.featurizer)?;
    par_map(wavs, jobs, |p| {
        let w = load_wav(p)?;
        funnynet::laughter::segment_media(&media_id_of(p), &w, &det.peaks, &det.mel, featurizer.as_ref(), &det.resampler)
    })
    .into_iter()
    .collect()
}

fn parse_k_range(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidArgument(format!("k range `{s}` is not of the form lo..hi"));
    let (lo, hi) = s.split_once("..").ok_or_else(bad)?;
    let lo: usize = lo.trim().parse().map_err(|_| bad())?;
    let hi: usize = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
    if lo == 0 || hi < lo {
        return Err(Error::InvalidArgument(format!("k range `{s}` must satisfy 1 <= lo <= hi")));
    }
    Ok((lo, hi))
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::load_or_default(cli.config.as_deref())?;
    let jobs = cli.jobs.max(1);
    match cli.command {
        Command::DetectLaughter { wavs, k, seed, out, out_dir } => {
            if let Some(k) = k {
                cfg.cluster.k = k;
            }
            if let Some(s) = seed {
                cfg.cluster.seed = s;
            }
            let media = segment_files(&wavs, &cfg, jobs)?;
            let anns = label_corpus(&media, cfg.cluster.k, cfg.cluster.seed)?;
            if let Some(dir) = &out_dir {
                for a in &anns {
                    write_text(&dir.join(format!("{}.json", a.media_id)), &to_json(a)?)?;
                }
            }
            if out.is_some() || out_dir.is_none() {
                emit(out.as_deref(), &to_json(&anns)?)?;
            }
        }
        Command::BuildDataset { manifest, ann, n_sec, neg_ratio, seed, out } => {
            if let Some(n) = n_sec {
                cfg.dataset.n_s = n;
            }
            if let Some(r) = neg_ratio {
                cfg.dataset.neg_ratio = r;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let entries = read_media_manifest(&manifest)?;
            if entries.is_empty() {
                return Err(Error::InvalidArgument(format!("{}: no media entries", manifest.display())));
            }
            let anns = read_annotations(&ann)?;
            let pairs = entries
                .iter()
                .map(|e| {
                    anns.iter()
                        .find(|a| a.media_id == e.media_id)
                        .map(|a| (e, a))
                        .ok_or_else(|| Error::Format(format!("no annotation for media `{}`", e.media_id)))
                })
                .collect::<Result<Vec<(&MediaEntry, &LaughterAnnotation)>>>()?;
            let parts = par_map(&pairs, jobs, |(e, a)| {
                build_media_clips(e, a, &cfg.dataset, &cfg.mel, &cfg.model, cfg.seed)
            });
            let mut data = Dataset::default();
            for p in parts {
                data.extend(p?);
            }
            data.save(&out)?;
            let funny = data.labels().iter().filter(|l| **l == 1).count();
            info!("{} clips ({funny} funny) written to {}", data.len(), out.display());
        }
        Command::SynthCorpus { kind, files, duration, train, test, signal, seed, out } => match kind {
            CorpusKind::Laughter => {
                let c = LaughterCorpusConfig {
                    files,
                    duration_s: duration,
                    seed,
                    ..Default::default()
                };
                write_laughter_corpus(&out, &c)?;
            }
            CorpusKind::Funny => {
                let c = FunnyCorpusConfig {
                    train,
                    test,
                    seed,
                    signal: signal.into(),
                    ..Default::default()
                };
                let (tr, te) = synth_funny_corpus(&c, &cfg.model)?;
                tr.save(&out.join("train"))?;
                te.save(&out.join("test"))?;
                write_text(&out.join("corpus.json"), &to_json(&c)?)?;
            }
        },
        Command::Train { dataset, out, log, seed, epochs } => {
            if let Some(s) = seed {
                cfg.train.seed = s;
            }
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            cfg.validate()?;
            let data = Dataset::load(&dataset)?;
            let outcome = train(&data, &cfg.model, &cfg.loss, &cfg.train)?;
            outcome.model.save(&out)?;
            let log = log.unwrap_or_else(|| PathBuf::from(format!("{}.log.csv", out.display())));
            write_text(&log, &outcome.log_csv())?;
            info!("best epoch {} of {}", outcome.best_epoch, outcome.log.len());
        }
        Command::Evaluate { dataset, checkpoint, out } => {
            let model = FunnyNet::load(&checkpoint)?;
            let data = Dataset::load(&dataset)?;
            let probs = predict_probabilities(&model, &data.tokens, cfg.eval.batch_size)?;
            let preds: Vec<bool> = probs.iter().map(|p| *p >= 0.5).collect();
            let gts: Vec<bool> = data.labels().iter().map(|l| *l == 1).collect();
            emit(out.as_deref(), &to_json(&classification_metrics(&preds, &gts)?)?)?;
        }
        Command::EvalLaughter { pred, gt, out } => {
            let preds = read_annotations(&pred)?;
            let gts = read_annotations(&gt)?;
            let report = evaluate_laughter(&preds, &gts, cfg.eval.resolution_s, &cfg.eval.iou_thresholds)?;
            print!("{}", report.to_table());
            if let Some(p) = out {
                write_text(&p, &to_json(&report)?)?;
            }
        }
        Command::Predict { wav, checkpoint, frames, frame_height, frame_width, transcript, stride, out } => {
            let model = FunnyNet::load(&checkpoint)?;
            let entry = MediaEntry {
                media_id: media_id_of(&wav),
                wav_path: wav,
                frames_path: frames,
                frame_height,
                frame_width,
                transcript_path: transcript,
            };
            let mel: &MelParams = &cfg.mel;
            let media = LoadedMedia::open(&entry, mel)?;
            let stride = stride.unwrap_or(cfg.eval.stride_s);
            let points = predict_timeline(&model, &media, &cfg.dataset, mel, stride, cfg.eval.batch_size)?;
            emit(out.as_deref(), &timeline_csv(&points))?;
        }
        Command::SweepClusters { wavs, gt, k_range, out } => {
            let (lo, hi) = parse_k_range(&k_range)?;
            let gts = read_annotations(&gt)?;
            let media = segment_files(&wavs, &cfg, jobs)?;
            let thresholds = &cfg.eval.iou_thresholds;
            let mut csv = String::from("k,temporal_f1");
            for t in thresholds {
                csv.push_str(&format!(",detection_f1@{t}"));
            }
            csv.push('\n');
            for k in lo..=hi {
                let preds = label_corpus(&media, k, cfg.cluster.seed)?;
                let r = evaluate_laughter(&preds, &gts, cfg.eval.resolution_s, thresholds)?;
                csv.push_str(&format!("{k},{:.6}", r.temporal.f1));
                for d in &r.detection {
                    csv.push_str(&format!(",{:.6}", d.f1));
                }
                csv.push('\n');
            }
            emit(out.as_deref(), &csv)?;
        }
        Command::ExportAttention { dataset, checkpoint, clips, measure, out } => {
            let model = FunnyNet::load(&checkpoint)?;
            let data = Dataset::load(&dataset)?;
            let measure = contribution_registry().get(measure.as_deref().unwrap_or(&cfg.eval.contribution))?;
            let selected: Vec<usize> = if clips.is_empty() {
                (0..data.len()).collect()
            } else {
                clips
                    .iter()
                    .map(|id| {
                        data.records
                            .iter()
                            .position(|r| &r.clip_id == id)
                            .ok_or_else(|| Error::InvalidArgument(format!("no clip `{id}` in {}", dataset.display())))
                    })
                    .collect::<Result<_>>()?
            };
            let results = par_map(&selected, jobs, |&i| model.infer(&data.tokens[i]));
            let mut rows = Vec::with_capacity(selected.len());
            for (&i, inf) in selected.iter().zip(results) {
                let inf = inf?;
                let id = &data.records[i].clip_id;
                write_text(&out.join("attention").join(format!("{id}.csv")), &attention_csv(&inf))?;
                rows.push((id.clone(), measure.weights(&inf)));
            }
            write_text(&out.join("contributions.csv"), &contributions_csv(&rows))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_range_parsing() {
        assert_eq!(parse_k_range("1..12").unwrap(), (1, 12));
        assert_eq!(parse_k_range("2..=4").unwrap(), (2, 4));
        assert!(parse_k_range("0..3").is_err());
        assert!(parse_k_range("5..3").is_err());
        assert!(parse_k_range("3").is_err());
    }
}
