//! Multimodal funny-moment detection toolkit.
//!
//! The crate covers the whole pipeline: an unsupervised laughter detector
//! that labels soundtracks ([`laughter`]), a clip builder that turns laughter
//! onsets into funny / not-funny samples ([`dataset`]), pluggable per-modality
//! feature providers ([`encoders`]), a small reverse-mode autodiff kernel
//! ([`nn`]), the cross-attention fusion classifier ([`model`]) with its
//! contrastive and classification losses ([`losses`]), and event / frame
//! level evaluation ([`eval`]).

pub mod audio;
pub mod config;
pub mod dataset;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod laughter;
pub mod fnwm;
pub mod losses;
pub mod matrix;
pub mod model;
pub mod nn;
pub mod predict;
pub mod registry;
pub mod seed;
pub mod span;
pub mod synth;
pub mod train;

pub use error::{Error, ErrorClass, Result};
pub use matrix::Matrix;
pub use span::TimeSpan;
