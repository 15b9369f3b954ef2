//! Mini-batch training of the fusion classifier.

use std::fmt::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::{classification_metrics, MetricsReport};
use crate::losses::{batch_loss, LossConfig};
use crate::model::{ClipTokens, FunnyNet, ModelConfig};
use crate::nn::{seeded_rng, AdamConfig, AdamState, Tape};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    /// Upper bound on passes over the training clips.
    pub epochs: usize,
    pub seed: u64,
    /// Share of the training clips held out for early stopping; 0 disables it.
    pub val_fraction: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            batch_size: 32,
            epochs: 50,
            seed: 0,
            val_fraction: 0.1,
            patience: 3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("train.lr, train.batch_size and train.epochs must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config(format!("train.val_fraction {} outside [0, 1)", self.val_fraction)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub loss_ss: f64,
    pub loss_cls: f64,
    pub train_accuracy: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: FunnyNet,
    pub log: Vec<EpochLog>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
}

impl TrainOutcome {
    pub fn log_csv(&self) -> String {
        let mut out = String::from("epoch,loss,loss_ss,loss_cls,train_accuracy,val_accuracy\n");
        for e in &self.log {
            let val = e.val_accuracy.map(|v| format!("{v:.6}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{:.6},{val}",
                e.epoch, e.loss, e.loss_ss, e.loss_cls, e.train_accuracy
            );
        }
        out
    }
}

/// Funny probabilities in eval mode, `batch` clips at a time.
pub fn predict_probabilities(model: &FunnyNet, clips: &[ClipTokens], batch: usize) -> Result<Vec<f32>> {
    let mut out = Vec::with_capacity(clips.len());
    for chunk in clips.chunks(batch.max(1)) {
        out.extend(model.predict(chunk)?);
    }
    Ok(out)
}

/// Binary metrics with funny as the positive class, thresholding at 0.5.
pub fn evaluate_model(model: &FunnyNet, data: &Dataset, batch: usize) -> Result<MetricsReport> {
    let probs = predict_probabilities(model, &data.tokens, batch)?;
    let preds: Vec<bool> = probs.iter().map(|p| *p > 0.5).collect();
    let gts: Vec<bool> = data.records.iter().map(|r| r.label.is_funny()).collect();
    classification_metrics(&preds, &gts)
}

fn split_validation(n: usize, cfg: &TrainConfig) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded_rng(derive_seed(cfg.seed, "validation-split")));
    let n_val = ((n as f64) * cfg.val_fraction).floor() as usize;
    let n_val = if n - n_val < 1 { 0 } else { n_val };
    let val = idx.split_off(n - n_val);
    (idx, val)
}

/// Trains a fresh model. With a validation share, the parameters of the best
/// validation epoch are kept and training stops after `patience` epochs
/// without improvement.
pub fn train(data: &Dataset, model_cfg: &ModelConfig, loss_cfg: &LossConfig, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    loss_cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("no training clips".into()));
    }
    let mut model = FunnyNet::new(model_cfg.clone(), derive_seed(cfg.seed, "init"))?;
    let labels = data.labels();
    let (train_idx, val_idx) = split_validation(data.len(), cfg);
    let val_clips: Vec<ClipTokens> = val_idx.iter().map(|i| data.tokens[*i].clone()).collect();
    let val_labels: Vec<bool> = val_idx.iter().map(|i| labels[*i] == 1).collect();

    let sizes: Vec<usize> = model.params.tensors().iter().map(|t| t.values.len()).collect();
    let names: Vec<String> = model.params.names().to_vec();
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut adam = AdamState::new(AdamConfig { lr: cfg.lr, ..AdamConfig::default() }, &sizes);

    let mut log = Vec::new();
    let mut best: Option<(f64, usize, FunnyNet)> = None;
    let mut order = train_idx.clone();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut seeded_rng(derive_seed(cfg.seed, &format!("shuffle-{epoch}"))));
        let (mut sum, mut sum_ss, mut sum_cls, mut correct) = (0.0, 0.0, 0.0, 0usize);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<ClipTokens> = chunk.iter().map(|i| data.tokens[*i].clone()).collect();
            let y: Vec<usize> = chunk.iter().map(|i| labels[*i]).collect();
            let mut tape = Tape::<f32>::train(derive_seed(cfg.seed, &format!("dropout-{epoch}-{b}")));
            let vars = model.params.load_into(&mut tape);
            let fwd = model.forward(&mut tape, &vars, &batch)?;
            let terms = batch_loss(&mut tape, &fwd, &y, loss_cfg)?;
            let total = tape.scalar(terms.total) as f64;
            if !total.is_finite() {
                return Err(Error::Numeric(format!("non-finite loss {total} at epoch {epoch}, batch {b}")));
            }
            let w = chunk.len() as f64;
            sum += total * w;
            sum_ss += tape.scalar(terms.ss) as f64 * w;
            sum_cls += tape.scalar(terms.cls) as f64 * w;
            for (z, label) in tape.value(fwd.logits).values.chunks(2).zip(&y) {
                correct += usize::from((z[1] > z[0]) == (*label == 1));
            }
            let mut grads = tape.backward(terms.total)?;
            let owned: Vec<Vec<f32>> = vars
                .all()
                .iter()
                .zip(&sizes)
                .map(|(v, n)| grads.take(*v).unwrap_or_else(|| vec![0.0; *n]))
                .collect();
            let grad_refs: Vec<&[f32]> = owned.iter().map(Vec::as_slice).collect();
            let mut param_refs: Vec<&mut [f32]> =
                model.params.tensors_mut().iter_mut().map(|t| t.values.as_mut_slice()).collect();
            adam.step(&mut param_refs, &grad_refs, &name_refs)?;
        }
        let n = order.len() as f64;
        let val_accuracy = if val_clips.is_empty() {
            None
        } else {
            let probs = predict_probabilities(&model, &val_clips, 64)?;
            let hits = probs.iter().zip(&val_labels).filter(|(p, l)| (**p > 0.5) == **l).count();
            Some(hits as f64 / val_clips.len() as f64)
        };
        log.push(EpochLog {
            epoch,
            loss: sum / n,
            loss_ss: sum_ss / n,
            loss_cls: sum_cls / n,
            train_accuracy: correct as f64 / n,
            val_accuracy,
        });
        log::info!(
            "epoch {epoch}: loss {:.4} (ss {:.4}, cls {:.4}), train acc {:.4}, val acc {:?}",
            sum / n,
            sum_ss / n,
            sum_cls / n,
            correct as f64 / n,
            val_accuracy
        );
        if let Some(acc) = val_accuracy {
            if best.as_ref().is_none_or(|(b, _, _)| acc > *b) {
                best = Some((acc, epoch, model.clone()));
            } else if epoch - best.as_ref().map_or(0, |b| b.1) >= cfg.patience {
                break;
            }
            if acc >= 1.0 {
                break;
            }
        }
    }
    let (model, best_epoch) = match best {
        Some((_, e, m)) => (m, e),
        None => (model, log.len()),
    };
    Ok(TrainOutcome { model, log, best_epoch })
}
