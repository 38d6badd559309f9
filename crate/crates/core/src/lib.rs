//! Unsupervised segmentation of multichannel motion time series into activities,
//! transitions and repeating motion primitives, with primitive clustering,
//! symmetry analysis and evaluation measures.

pub mod activity;
pub mod clustering;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod ingest;
pub mod kdtree;
pub mod neighborhood;
pub mod pipeline;
pub mod primitives;
pub mod render;
pub mod sweep;
pub mod symmetry;
pub mod synth;

pub use error::{Error, Result};
