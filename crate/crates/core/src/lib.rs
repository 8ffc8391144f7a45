//! Video anomaly detection by bidirectional spatiotemporal-LSTM frame prediction.

pub mod config;
pub mod data;
pub mod discriminator;
pub mod error;
pub mod generator;
pub mod harness;
pub mod losses;
pub mod scoring;
pub mod numerics;
pub mod pipeline;
pub mod stlstm;
pub mod training;

pub use error::{Error, Result};
