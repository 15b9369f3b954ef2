use funnynet::audio::MelParams;
use funnynet::eval::evaluate_laughter;
use funnynet::laughter::{detect_laughter_files, read_annotations, DetectorConfig, PeakConfig};
use funnynet::synth::{write_laughter_corpus, LaughterCorpusConfig};

#[test]
fn detector_recovers_planted_laughter() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = LaughterCorpusConfig::default();
    let files = write_laughter_corpus(dir.path(), &cfg).unwrap();
    let paths: Vec<&std::path::Path> = files.wavs.iter().map(|p| p.as_path()).collect();
    let det = DetectorConfig::new(PeakConfig::default(), MelParams::default(), 2, 0);
    let preds = detect_laughter_files(&paths, &det).unwrap();
    let gts = read_annotations(&files.ground_truth).unwrap();
    let report = evaluate_laughter(&preds, &gts, 0.01, &[0.3]).unwrap();
    assert!(report.detection[0].f1 >= 0.90, "{:?}", report.detection[0]);
    assert!(report.temporal.f1 >= 0.85, "{:?}", report.temporal);
}

#[test]
fn detections_are_ordered_inside_the_file_and_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = LaughterCorpusConfig { files: 3, duration_s: 45.0, laughs_per_file: 4, seed: 7, ..Default::default() };
    let files = write_laughter_corpus(dir.path(), &cfg).unwrap();
    let paths: Vec<&std::path::Path> = files.wavs.iter().map(|p| p.as_path()).collect();
    let det = DetectorConfig::new(PeakConfig::default(), MelParams::default(), 2, 3);
    let first = detect_laughter_files(&paths, &det).unwrap();
    assert_eq!(first, detect_laughter_files(&paths, &det).unwrap());
    for ann in &first {
        let spans = ann.laughter_spans();
        for s in &spans {
            assert!(s.start_s >= 0.0 && s.end_s <= cfg.duration_s + 1e-9 && s.start_s < s.end_s, "{s:?}");
        }
        for w in spans.windows(2) {
            assert!(w[0].end_s <= w[1].start_s, "{w:?}");
        }
    }
}
