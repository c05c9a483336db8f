//! Multimodal ambivalence/hesitancy recognition toolkit.
//!
//! Feature post-processing for pre-extracted embeddings, handcrafted audio and
//! text statistics, native probabilistic learners, a BCE-calibrated committee
//! with one member per modality combination, and a particle swarm search for
//! hard-voting weights.

pub mod audio_stats;
pub mod cli;
pub mod committee;
pub mod data_model;
pub mod ensemble_pso;
pub mod error;
pub mod feature_ops;
pub mod fixtures;
pub mod learners;
pub mod metrics;
pub mod pipeline;
pub mod text_behavior;

pub use error::{Error, Result};
