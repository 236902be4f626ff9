//! Experiment driver: configuration, presentation protocols and metrics.

pub mod config;
pub mod metrics;
pub mod protocol;
pub mod run;

pub use config::{Model, Rule, RunConfig};
pub use metrics::{EpochMetrics, FirstSpikeMetrics, Metrics};
pub use protocol::{
    argmax, evaluate_first_spike, evaluate_rate, plurality, train_epoch, EpochStats, EvalResult,
    FirstSpikeConfig, FirstSpikeResult, SpikeSink, Timing,
};
pub use run::{train_network, AnyNet};
