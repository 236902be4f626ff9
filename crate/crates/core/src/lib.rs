//! Spiking networks trained online with event-driven random
//! backpropagation, in continuous and fixed-point form, with a dense
//! reference network and an experiment harness.

pub mod checkpoint;
pub mod continuous;
pub mod data;
pub mod error;
pub mod fixedpoint;
pub mod harness;
pub mod network;
pub mod plasticity;
pub mod quantized;
pub mod refnet;
pub mod rng;
pub mod spike;

pub use checkpoint::{Checkpoint, LayerWeights};
pub use data::{Dataset, Mnist, Order, Split};
pub use error::{Error, Result};
pub use fixedpoint::ShiftExp;
pub use network::{Counters, SpikingNetwork};
pub use spike::{SpikeEvent, SpikeLogWriter};
