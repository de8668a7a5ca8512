//! Emotion mining and reaction-distribution prediction for social media
//! posts: a lexicon-based emotion miner with negation handling and an SVM
//! fallback, CNN and LSTM predictors over word embeddings, and a linear
//! regression ensemble combining both.

pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod fallback;
pub mod lexicon;
pub mod miner;
pub mod models;
pub mod numerics;
pub mod pipeline;
pub mod textprep;

pub use error::{Error, Result};
