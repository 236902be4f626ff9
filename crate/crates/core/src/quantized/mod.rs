//! Fixed-point model of the digital learning core.

pub mod layer;
pub mod network;
pub mod params;

pub use layer::{
    qdata_spikes, qstep_error, qstep_hidden, Blankout, QDendrite, QFeedback, QSynapses,
    QuantErrorState, QuantLayerState,
};
pub use network::QuantNet;
pub use params::QuantParams;
