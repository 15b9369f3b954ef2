use serde::{Deserialize, Serialize};

use crate::encoders::Modality;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Shared projection width.
    pub n_proj: usize,
    /// Projection head hidden width.
    pub hidden: usize,
    /// Attention key/query/value width.
    pub d: usize,
    pub dropout: f64,
    pub m_visual: usize,
    pub m_text: usize,
    pub m_audio: usize,
    /// Raw token widths entering the projection heads.
    pub visual_dim: usize,
    pub text_dim: usize,
    pub audio_dim: usize,
    /// Average each modality's raw tokens into one before projection.
    pub pooled_mode: bool,
    /// Order of the modality blocks in the stacked query.
    pub stack_order: [Modality; 3],
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_proj: 512,
            hidden: 512,
            d: 512,
            dropout: 0.1,
            m_visual: 8,
            m_text: 4,
            m_audio: 8,
            visual_dim: 65,
            text_dim: 256,
            audio_dim: 128,
            pooled_mode: false,
            stack_order: Modality::ALL,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("n_proj", self.n_proj),
            ("hidden", self.hidden),
            ("d", self.d),
            ("m_visual", self.m_visual),
            ("m_text", self.m_text),
            ("m_audio", self.m_audio),
            ("visual_dim", self.visual_dim),
            ("text_dim", self.text_dim),
            ("audio_dim", self.audio_dim),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("model.{name} must be positive")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("model.dropout {} outside [0, 1)", self.dropout)));
        }
        let mut order = self.stack_order;
        order.sort();
        if order != Modality::ALL {
            return Err(Error::Config(format!(
                "model.stack_order must list each modality once, got {:?}",
                self.stack_order
            )));
        }
        Ok(())
    }

    pub fn raw_dim(&self, m: Modality) -> usize {
        match m {
            Modality::Visual => self.visual_dim,
            Modality::Text => self.text_dim,
            Modality::Audio => self.audio_dim,
        }
    }

    pub fn tokens(&self, m: Modality) -> usize {
        match m {
            Modality::Visual => self.m_visual,
            Modality::Text => self.m_text,
            Modality::Audio => self.m_audio,
        }
    }

    /// Small dimensions for oracle tests.
    pub fn toy(width: usize, m: usize, raw: usize) -> Self {
        Self {
            n_proj: width,
            hidden: width,
            d: width,
            m_visual: m,
            m_text: m,
            m_audio: m,
            visual_dim: raw,
            text_dim: raw,
            audio_dim: raw,
            ..Self::default()
        }
    }
}
