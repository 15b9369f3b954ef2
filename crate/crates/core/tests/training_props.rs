use funnynet::losses::LossConfig;
use funnynet::model::{contribution_registry, ModelConfig};
use funnynet::synth::{synth_funny_corpus, FunnyCorpusConfig, PlantedSignal};
use funnynet::train::{evaluate_model, train, TrainConfig};

fn narrow(width: usize) -> ModelConfig {
    ModelConfig { n_proj: width, hidden: width, d: width, ..ModelConfig::default() }
}

#[test]
fn training_is_bit_reproducible() {
    let model = narrow(16);
    let corpus = FunnyCorpusConfig { train: 64, test: 16, seed: 5, ..Default::default() };
    let (tr, _) = synth_funny_corpus(&corpus, &model).unwrap();
    let cfg = TrainConfig { epochs: 2, batch_size: 8, seed: 9, ..Default::default() };
    let a = train(&tr, &model, &LossConfig::default(), &cfg).unwrap();
    let b = train(&tr, &model, &LossConfig::default(), &cfg).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.log, b.log);
}

#[test]
fn audio_only_signal_gets_the_largest_audio_weight() {
    let model = narrow(32);
    let corpus = FunnyCorpusConfig { train: 600, test: 100, seed: 1, signal: PlantedSignal::AudioOnly, ..Default::default() };
    let (tr, te) = synth_funny_corpus(&corpus, &model).unwrap();
    let out = train(&tr, &model, &LossConfig::default(), &TrainConfig::default()).unwrap();
    let acc = evaluate_model(&out.model, &te, 64).unwrap().accuracy;
    assert!(acc > 0.9);
    let measure = contribution_registry().get("occlusion").unwrap();
    let wins = te
        .tokens
        .iter()
        .filter(|clip| {
            let w = measure.weights(&out.model.infer(clip).unwrap());
            w[2] > w[0] && w[2] > w[1]
        })
        .count();
    assert!(wins * 10 >= te.tokens.len() * 7, "{wins}/{}", te.tokens.len());
}
