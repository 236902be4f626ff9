//! Interface shared by the continuous and quantized spiking networks.

use crate::checkpoint::Checkpoint;
use crate::error::Result;

/// Running activity counters of a network.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Counters {
    /// Spikes per population, data layer first.
    pub spikes: Vec<u64>,
    pub error_pos: u64,
    pub error_neg: u64,
    /// Spikes times feed-forward fan-out.
    pub synops: u64,
    /// Individual weight increments applied.
    pub weight_updates: u64,
    /// State values clipped to 16 bits (quantized model only).
    pub saturations: u64,
}

impl Counters {
    pub fn new(populations: usize) -> Self {
        Self {
            spikes: vec![0; populations],
            ..Self::default()
        }
    }
}

/// A layered spiking network driven one time step at a time.
pub trait SpikingNetwork: Clone + Send + Sync {
    /// Population sizes, data layer first, prediction layer last.
    fn arch(&self) -> &[usize];
    fn dt_ms(&self) -> f64;
    /// Number of steps simulated so far.
    fn now(&self) -> u64;
    /// Switch the data layer to a new image and the teacher to a new label.
    fn present(&mut self, pixels: &[f64], label: Option<usize>) -> Result<()>;
    fn set_plasticity(&mut self, on: bool);
    /// Disabling the error layer also silences the dendrites.
    fn set_error_layer(&mut self, on: bool);
    fn step(&mut self) -> Result<()>;
    /// Spikes emitted in the last step by population `layer` (0 = data).
    fn spikes(&self, layer: usize) -> &[u32];
    fn counters(&self) -> &Counters;
    fn reset_counters(&mut self);
    fn checkpoint(&self) -> Checkpoint;
    /// Spikes emitted by the prediction layer in the last step.
    fn output(&self) -> &[u32] {
        self.spikes(self.arch().len() - 1)
    }
    /// Synaptic time constant in steps, used for first-spike offsets.
    fn tau_syn_steps(&self) -> u64;
}

pub(crate) fn parse_arch_dims(arch: &[usize]) -> Result<()> {
    if arch.len() < 2 || arch.contains(&0) {
        return Err(crate::Error::Config(format!(
            "invalid architecture {arch:?}"
        )));
    }
    Ok(())
}
