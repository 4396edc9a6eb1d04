//! Multiple-input autoencoders (MIAE) for heterogeneous tabular data, the
//! L2,1 feature-selection variant (MIAEFS), downstream tree classifiers and
//! the detection and representation-quality metrics used to evaluate them.

pub mod dataset;
pub mod downstream;
mod error;
pub mod layers;
pub mod metrics;
pub mod miae;
pub mod miaefs;
pub mod model_io;
pub mod numerics;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
