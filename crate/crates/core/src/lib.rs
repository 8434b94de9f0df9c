//! Group-level emotion classification over multi-layer tweet networks.
//!
//! A group of same-label tweets becomes a three-layer network (hashtags,
//! keyword chains, whole tweets). Each layer runs through two graph
//! convolutions and is pooled to one vector; the three vectors are
//! concatenated and classified into one of six emotions.

pub mod autodiff;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod gnn;
pub mod label;
pub mod mln;
pub mod preprocess;
pub mod seed;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
pub use label::{EmotionLabel, Sentiment, NUM_CLASSES};
