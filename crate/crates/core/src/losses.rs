//! Contrastive, self-supervised, classification and combined objectives.

use serde::{Deserialize, Serialize};

use crate::encoders::Modality;
use crate::error::{Error, Result};
use crate::model::BatchForward;
use crate::nn::{Real, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SsSignMode {
    /// Plain mean of the three pairwise contrastive losses.
    #[default]
    MeanOfLosses,
    /// The same mean with a leading minus sign.
    Negated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub tau: f64,
    pub lambda_ss: f64,
    pub lambda_cls: f64,
    pub ss_sign_mode: SsSignMode,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            tau: 0.1,
            lambda_ss: 1.0,
            lambda_cls: 1.0,
            ss_sign_mode: SsSignMode::MeanOfLosses,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::Config(format!("loss.tau must be positive, got {}", self.tau)));
        }
        if !(self.lambda_ss >= 0.0 && self.lambda_cls >= 0.0) {
            return Err(Error::Config("loss weights must be nonnegative".into()));
        }
        Ok(())
    }
}

/// InfoNCE over a batch: row `i` of `anchors` should match row `i` of
/// `candidates` against every candidate in the batch, positive included.
/// Both inputs are `(1, B, n)` row-pooled embeddings.
pub fn contrastive_loss<T: Real>(tape: &mut Tape<T>, anchors: Var, candidates: Var, tau: f64) -> Result<Var> {
    let (sa, sc) = (tape.shape(anchors), tape.shape(candidates));
    if sa.rows != sc.rows || sa.rows == 0 {
        return Err(Error::Dimension(format!("contrastive batches {sa:?} vs {sc:?}")));
    }
    let s = tape.cosine(anchors, candidates)?;
    let s = tape.scale(s, T::from_f64(1.0 / tau));
    let log_p = tape.row_log_softmax(s);
    let diag: Vec<usize> = (0..sa.rows).collect();
    let pos = tape.pick_cols(log_p, &diag)?;
    let mean = tape.mean_all(pos);
    Ok(tape.scale(mean, -T::ONE))
}

/// Pairs (v, a), (v, t), (t, a) averaged; sign per `cfg.ss_sign_mode`.
pub fn self_supervised_loss<T: Real>(
    tape: &mut Tape<T>,
    visual: Var,
    text: Var,
    audio: Var,
    cfg: &LossConfig,
) -> Result<Var> {
    let va = contrastive_loss(tape, visual, audio, cfg.tau)?;
    let vt = contrastive_loss(tape, visual, text, cfg.tau)?;
    let ta = contrastive_loss(tape, text, audio, cfg.tau)?;
    let s = tape.add(va, vt)?;
    let s = tape.add(s, ta)?;
    let sign = match cfg.ss_sign_mode {
        SsSignMode::MeanOfLosses => 1.0,
        SsSignMode::Negated => -1.0,
    };
    Ok(tape.scale(s, T::from_f64(sign / 3.0)))
}

/// Mean softmax cross-entropy of `(1, B, 2)` logits.
pub fn classification_loss<T: Real>(tape: &mut Tape<T>, logits: Var, labels: &[usize]) -> Result<Var> {
    let s = tape.shape(logits);
    if s.batch * s.rows != labels.len() || labels.iter().any(|l| *l >= s.cols) {
        return Err(Error::Dimension(format!("{} labels for logits {s:?}", labels.len())));
    }
    let log_p = tape.row_log_softmax(logits);
    let picked = tape.pick_cols(log_p, labels)?;
    let mean = tape.mean_all(picked);
    Ok(tape.scale(mean, -T::ONE))
}

/// `λ_ss · L_ss + λ_cls · L_cls`.
pub fn total_loss<T: Real>(tape: &mut Tape<T>, ss: Var, cls: Var, cfg: &LossConfig) -> Result<Var> {
    let a = tape.scale(ss, T::from_f64(cfg.lambda_ss));
    let b = tape.scale(cls, T::from_f64(cfg.lambda_cls));
    tape.add(a, b)
}

/// The three loss nodes of one batch.
#[derive(Debug, Clone, Copy)]
pub struct LossTerms {
    pub total: Var,
    pub ss: Var,
    pub cls: Var,
}

pub fn batch_loss<T: Real>(tape: &mut Tape<T>, fwd: &BatchForward, labels: &[usize], cfg: &LossConfig) -> Result<LossTerms> {
    let p = |m: Modality| fwd.pooled[m.index()];
    let ss = self_supervised_loss(tape, p(Modality::Visual), p(Modality::Text), p(Modality::Audio), cfg)?;
    let cls = classification_loss(tape, fwd.logits, labels)?;
    let total = total_loss(tape, ss, cls, cfg)?;
    Ok(LossTerms { total, ss, cls })
}
