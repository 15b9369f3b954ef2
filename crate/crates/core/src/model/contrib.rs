use std::fmt::Write;
use std::sync::Arc;

use super::Inference;
use crate::encoders::Modality;
use crate::registry::{Named, Registry};

/// Turns one clip's attention into per-modality weights (visual, text, audio)
/// that are nonnegative and sum to one.
pub trait ContributionMeasure: Named + Send + Sync {
    fn weights(&self, inf: &Inference) -> [f64; 3];
}

fn normalize(raw: [f64; 3]) -> [f64; 3] {
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return [1.0 / 3.0; 3];
    }
    raw.map(|v| v / total)
}

/// Mean of all entries of each cross-attention map.
///
/// Every map is row-stochastic, so the mean is `1 / m_i` regardless of input.
#[derive(Debug, Clone, Default)]
pub struct AttentionMean;

impl Named for AttentionMean {
    fn name(&self) -> &'static str {
        "attention-mean"
    }
}

impl ContributionMeasure for AttentionMean {
    fn weights(&self, inf: &Inference) -> [f64; 3] {
        normalize(inf.cross.each_ref().map(|a| {
            let s = a.as_slice();
            s.iter().map(|v| *v as f64).sum::<f64>() / s.len().max(1) as f64
        }))
    }
}

/// Mean row norm of each modality's attended output `A_i · V_i`.
#[derive(Debug, Clone, Default)]
pub struct OutputNorm;

impl Named for OutputNorm {
    fn name(&self) -> &'static str {
        "output-norm"
    }
}

impl ContributionMeasure for OutputNorm {
    fn weights(&self, inf: &Inference) -> [f64; 3] {
        normalize(inf.cross_out.each_ref().map(|o| {
            let norms: f64 = o
                .iter_rows()
                .map(|r| r.iter().map(|v| (*v as f64).powi(2)).sum::<f64>().sqrt())
                .sum();
            norms / o.rows().max(1) as f64
        }))
    }
}

/// Logit change when a modality's cross-attention output is dropped.
#[derive(Debug, Clone, Default)]
pub struct Occlusion;

impl Named for Occlusion {
    fn name(&self) -> &'static str {
        "occlusion"
    }
}

impl ContributionMeasure for Occlusion {
    fn weights(&self, inf: &Inference) -> [f64; 3] {
        normalize(inf.occlusion.map(|v| v as f64))
    }
}

pub fn contribution_registry() -> Registry<dyn ContributionMeasure> {
    let mut reg: Registry<dyn ContributionMeasure> = Registry::new("contribution measure");
    reg.register(Arc::new(AttentionMean)).register(Arc::new(OutputNorm)).register(Arc::new(Occlusion));
    reg
}

/// Long-format attention weights: `block,query_row,key_col,weight`.
pub fn attention_csv(inf: &Inference) -> String {
    let mut out = String::from("block,query_row,key_col,weight\n");
    let blocks = Modality::ALL
        .iter()
        .map(|m| (format!("cross_{m}"), &inf.cross[m.index()]))
        .chain(std::iter::once(("self".to_string(), &inf.self_attention)));
    for (name, a) in blocks {
        for (r, row) in a.iter_rows().enumerate() {
            for (c, w) in row.iter().enumerate() {
                let _ = writeln!(out, "{name},{r},{c},{w}");
            }
        }
    }
    out
}

/// `clip_id,w_v,w_t,w_a`, one line per clip.
pub fn contributions_csv(rows: &[(String, [f64; 3])]) -> String {
    let mut out = String::from("clip_id,w_v,w_t,w_a\n");
    for (id, w) in rows {
        let _ = writeln!(out, "{id},{:.6},{:.6},{:.6}", w[0], w[1], w[2]);
    }
    out
}
