//! sEMG hand-gesture classification pipeline.
//!
//! Raw three-channel windows are summarized by time-domain features, the
//! feature table is augmented with LSTM-generated synthetic subjects, and
//! gestures are classified either by a static/dynamic master network routing
//! to per-type slave networks or by a flat ten-class network.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below name the double-precision instantiations the CLI uses.

pub mod dataset;
pub mod dnn;
mod error;
pub mod experiment;
pub mod features;
pub mod hierarchy;
pub mod linalg;
pub mod lstm;
pub mod quantizer;
pub mod report;
mod scalar;
pub mod signal;
pub mod table;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use signal::{generate_synthetic_recordings, Gesture, GestureLabel, GestureType, Segment};

pub type Segment64 = signal::Segment<f64>;
pub type FeatureVector64 = features::FeatureVector<f64>;
pub type FeatureVector32 = features::FeatureVector<f32>;
pub type QuantizerModel64 = quantizer::QuantizerModel<f64>;
pub type Network64 = dnn::Network<f64>;
pub type Network32 = dnn::Network<f32>;
pub type LabeledMatrix64 = dnn::LabeledMatrix<f64>;
pub type GeneratorModel64 = lstm::GeneratorModel<f64>;
pub type MasterSlaveModel64 = hierarchy::MasterSlaveModel<f64>;
pub type FlatModel64 = hierarchy::FlatModel<f64>;
