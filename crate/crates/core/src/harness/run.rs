//! End-to-end runs driven by a [`RunConfig`].

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use crate::checkpoint::Checkpoint;
use crate::continuous::ContinuousNet;
use crate::data::{Dataset, Mnist, Order};
use crate::error::{Error, Result};
use crate::network::SpikingNetwork;
use crate::quantized::QuantNet;
use crate::refnet::{sgd_train, write_curve_csv, DenseNet};
use crate::spike::SpikeLogWriter;

use super::config::{Model, RunConfig};
use super::metrics::{EpochMetrics, FirstSpikeMetrics, Metrics};
use super::protocol::{
    evaluate_first_spike, evaluate_rate, train_epoch, FirstSpikeConfig, SpikeSink,
};

/// A spiking network of either kind.
#[derive(Debug, Clone)]
pub enum AnyNet {
    Continuous(ContinuousNet),
    Quantized(QuantNet),
}

macro_rules! with_net {
    ($net:expr, $n:ident => $body:expr) => {
        match $net {
            AnyNet::Continuous($n) => $body,
            AnyNet::Quantized($n) => $body,
        }
    };
}

impl AnyNet {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        match cfg.model {
            Model::Continuous => Ok(AnyNet::Continuous(ContinuousNet::new(
                &cfg.arch,
                cfg.continuous.clone(),
                cfg.seed,
            )?)),
            Model::Quantized => Ok(AnyNet::Quantized(QuantNet::new(
                &cfg.arch,
                cfg.quantized.clone(),
                cfg.seed,
            )?)),
            Model::Refnet => Err(Error::Config("refnet is not a spiking model".into())),
        }
    }

    pub fn load_checkpoint(&mut self, ck: &Checkpoint) -> Result<()> {
        with_net!(self, n => n.load_checkpoint(ck))
    }

    pub fn checkpoint(&self) -> Checkpoint {
        with_net!(self, n => n.checkpoint())
    }
}

fn subsets(cfg: &RunConfig, mnist: &Mnist) -> (Dataset, Dataset) {
    let train = cfg
        .n_train
        .map_or_else(|| mnist.train.clone(), |n| mnist.train.subset(n));
    let test = cfg
        .n_test
        .map_or_else(|| mnist.test.clone(), |n| mnist.test.subset(n));
    (train, test)
}

/// Fraction of 8-bit weights strictly inside (-128, 127).
pub fn weights_inside(ck: &Checkpoint) -> Option<f64> {
    let Checkpoint::Quant(layers) = ck else {
        return None;
    };
    let (mut inside, mut total) = (0usize, 0usize);
    for l in layers {
        inside += l.w.iter().filter(|&&w| w > i8::MIN && w < i8::MAX).count();
        total += l.w.len();
    }
    Some(inside as f64 / total.max(1) as f64)
}

fn write_timing(dir: &Path, seconds: &[f64]) -> Result<()> {
    std::fs::write(
        dir.join("timing.json"),
        serde_json::to_vec_pretty(&serde_json::json!({ "epoch_seconds": seconds }))?,
    )?;
    Ok(())
}

/// Train `net` for `cfg.epochs` epochs, evaluating on `test` after each.
///
/// With `out`, the resolved configuration, per-epoch metrics, the latest
/// checkpoint and optionally the training spike log are written there.
pub fn train_network<N: SpikingNetwork>(
    net: &mut N,
    cfg: &RunConfig,
    train: &Dataset,
    test: &Dataset,
    out: Option<&Path>,
) -> Result<Metrics> {
    let mut metrics = Metrics {
        model: cfg.model.name().into(),
        rule: cfg.rule.name().into(),
        arch: cfg.arch.clone(),
        seed: cfg.seed,
        ..Metrics::default()
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.txt"), cfg.to_text())?;
        net.checkpoint().save(&dir.join("checkpoint.bin"))?;
        metrics.save(dir)?;
    }
    let mut log = match (out, cfg.spike_log) {
        (Some(dir), true) => Some(SpikeLogWriter::new(BufWriter::new(File::create(
            dir.join("spikes.bin"),
        )?))),
        _ => None,
    };
    let mut seconds = Vec::new();
    for epoch in 0..cfg.epochs {
        let t0 = Instant::now();
        net.reset_counters();
        let sink = log.as_mut().map(|l| l as &mut dyn SpikeSink);
        let stats = train_epoch(
            net,
            train,
            Order::Shuffled {
                seed: cfg.seed,
                epoch: epoch as u64,
            },
            &cfg.timing,
            sink,
        )?;
        let c = net.counters().clone();
        let mut row = EpochMetrics {
            epoch,
            samples: stats.samples,
            train_error: stats.train_error,
            weight_updates: c.weight_updates,
            error_pos: c.error_pos,
            error_neg: c.error_neg,
            saturations: c.saturations,
            spikes: c.spikes,
            weights_inside: weights_inside(&net.checkpoint()),
            ..EpochMetrics::default()
        };
        if !test.is_empty() {
            let ev = evaluate_rate(net, test, cfg.timing.t_test_ms, cfg.eval_threads)?;
            row.test_error = Some(ev.error_rate());
            row.test_silent = Some(ev.silent);
            row.synops_per_sample = Some(ev.synops as f64 / ev.samples as f64);
        }
        metrics.epochs.push(row);
        seconds.push(t0.elapsed().as_secs_f64());
        if let Some(dir) = out {
            net.checkpoint().save(&dir.join("checkpoint.bin"))?;
            metrics.save(dir)?;
            write_timing(dir, &seconds)?;
        }
    }
    if let Some(l) = log {
        use std::io::Write;
        l.into_inner().flush()?;
    }
    Ok(metrics)
}

/// First-spike evaluation with the offset set to twice the synaptic time
/// constant.
pub fn first_spike<N: SpikingNetwork>(
    net: &N,
    cfg: &RunConfig,
    test: &Dataset,
) -> Result<FirstSpikeMetrics> {
    let fs = FirstSpikeConfig {
        k_max: cfg.first_spike_k,
        t_offset_ms: 2.0 * net.tau_syn_steps() as f64 * net.dt_ms(),
        t_test_ms: cfg.timing.t_test_ms,
        t_random_ms: cfg.t_random_ms,
        shards: cfg.eval_threads,
        seed: cfg.seed,
    };
    let r = evaluate_first_spike(net, test, &fs)?;
    Ok(FirstSpikeMetrics {
        samples: r.samples,
        error: r.error_curve(),
        synops_per_sample: r.synops.clone(),
        no_spike: r.no_spike,
        full_window_error: r.all_spikes_errors as f64 / r.samples.max(1) as f64,
    })
}

/// Train the configured model on MNIST.
pub fn train(cfg: &RunConfig, mnist: &Mnist, out: Option<&Path>) -> Result<Metrics> {
    let (train, test) = subsets(cfg, mnist);
    if cfg.model == Model::Refnet {
        return train_dense(cfg, &train, &test, out);
    }
    let mut net = AnyNet::build(cfg)?;
    with_net!(&mut net, n => train_network(n, cfg, &train, &test, out))
}

fn train_dense(
    cfg: &RunConfig,
    train: &Dataset,
    test: &Dataset,
    out: Option<&Path>,
) -> Result<Metrics> {
    let mut net = DenseNet::new(&cfg.arch, cfg.seed)?;
    let t0 = Instant::now();
    let curve = sgd_train(&mut net, train, Some(test), &cfg.sgd(), None)?;
    let metrics = Metrics {
        model: cfg.model.name().into(),
        rule: cfg.rule.name().into(),
        arch: cfg.arch.clone(),
        seed: cfg.seed,
        epochs: curve
            .iter()
            .map(|r| EpochMetrics {
                epoch: r.epoch,
                samples: train.len(),
                train_error: r.train_error,
                test_error: r.test_error,
                ..EpochMetrics::default()
            })
            .collect(),
        first_spike: None,
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.txt"), cfg.to_text())?;
        write_curve_csv(File::create(dir.join("curve.csv"))?, &curve)?;
        metrics.save(dir)?;
        write_timing(dir, &[t0.elapsed().as_secs_f64()])?;
    }
    Ok(metrics)
}

/// Evaluate a checkpoint on the test set, by spike counts and optionally
/// by first spikes.
pub fn evaluate(cfg: &RunConfig, ck: &Checkpoint, mnist: &Mnist, first: bool) -> Result<Metrics> {
    let (_, test) = subsets(cfg, mnist);
    let mut net = AnyNet::build(cfg)?;
    net.load_checkpoint(ck)?;
    let ev = with_net!(&net, n => evaluate_rate(n, &test, cfg.timing.t_test_ms, cfg.eval_threads))?;
    let first_spike = if first {
        Some(with_net!(&net, n => first_spike(n, cfg, &test))?)
    } else {
        None
    };
    Ok(Metrics {
        model: cfg.model.name().into(),
        rule: cfg.rule.name().into(),
        arch: cfg.arch.clone(),
        seed: cfg.seed,
        epochs: vec![EpochMetrics {
            test_error: Some(ev.error_rate()),
            test_silent: Some(ev.silent),
            synops_per_sample: Some(ev.synops as f64 / ev.samples.max(1) as f64),
            spikes: ev.spikes,
            weights_inside: weights_inside(ck),
            ..EpochMetrics::default()
        }],
        first_spike,
    })
}
