//! Continuous-time network, integrated with forward Euler steps.

pub mod analysis;
pub mod encoder;
pub mod error_layer;
pub mod layer;
pub mod network;
pub mod params;

pub use analysis::{gaussian_derivative, predicted_rate};
pub use encoder::{data_spikes, hazard_rate_hz, label_spikes, DataLayer};
pub use error_layer::{step_error, ErrorDrive, ErrorLayerState};
pub use layer::{Dendrite, FeedbackMatrix, LayerState, LifLayer, StepCtx, Synapses};
pub use network::ContinuousNet;
pub use params::{ContinuousParams, DataEncoderParams, NeuronParams, NoiseParams};
