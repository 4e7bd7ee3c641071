//! Tweet-mining pipeline for disease surveillance: corpus handling, text
//! normalization, a two-stage relevance/category classifier cascade,
//! cross-validated evaluation, annotator agreement, topic extraction and
//! dataset profiling.

pub mod agreement;
pub mod cascade;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod learners;
pub mod pipeline;
pub mod profile;
pub mod rng;
pub mod synth;
pub mod textprep;
pub mod topics;

pub use error::{Error, Result};
