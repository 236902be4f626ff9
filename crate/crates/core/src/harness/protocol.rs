//! Presentation protocols: online training, rate-coded evaluation and
//! first-spike evaluation.

use std::io::Write;

use crate::data::{Dataset, Order};
use crate::error::Result;
use crate::network::SpikingNetwork;
use crate::rng::{to_unit, CounterRng, Stream};
use crate::spike::SpikeLogWriter;

/// Timing of one presentation protocol, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub t_train_ms: f64,
    pub t_gate_ms: f64,
    pub t_test_ms: f64,
}

impl Default for Timing {
    fn default() -> Self {
        Self {
            t_train_ms: 250.0,
            t_gate_ms: 50.0,
            t_test_ms: 500.0,
        }
    }
}

/// Receives every spike of every population.
pub trait SpikeSink {
    fn record(&mut self, step: u64, layer: u8, neurons: &[u32]) -> Result<()>;
}

impl<W: Write> SpikeSink for SpikeLogWriter<W> {
    fn record(&mut self, step: u64, layer: u8, neurons: &[u32]) -> Result<()> {
        SpikeLogWriter::record(self, step, layer, neurons)?;
        Ok(())
    }
}

fn steps(ms: f64, dt: f64) -> u64 {
    crate::continuous::params::steps_for(ms, dt)
}

fn to_pixels(bytes: &[u8], out: &mut Vec<f64>) {
    out.clear();
    out.extend(bytes.iter().map(|&b| b as f64 / 255.0));
}

/// Index of the largest count; ties go to the lowest index.
pub fn argmax(counts: &[u64]) -> usize {
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best
}

fn step_logged<N: SpikingNetwork>(net: &mut N, log: &mut Option<&mut dyn SpikeSink>) -> Result<()> {
    net.step()?;
    if let Some(sink) = log {
        let t = net.now() - 1;
        for layer in 0..net.arch().len() {
            let s = net.spikes(layer);
            if !s.is_empty() {
                sink.record(t, layer as u8, s)?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpochStats {
    pub samples: usize,
    /// Fraction of samples whose output spike count disagreed with the label.
    pub train_error: f64,
    /// Weight increments that landed inside a gate window; always zero.
    pub gated_updates: u64,
}

/// Present every sample of `data` once in the given order, learning online.
///
/// Plasticity is switched off for the first `t_gate_ms` of each sample.
/// The network state carries over from one sample to the next.
pub fn train_epoch<N: SpikingNetwork>(
    net: &mut N,
    data: &Dataset,
    order: Order,
    timing: &Timing,
    mut log: Option<&mut dyn SpikeSink>,
) -> Result<EpochStats> {
    let dt = net.dt_ms();
    let (t_train, t_gate) = (steps(timing.t_train_ms, dt), steps(timing.t_gate_ms, dt));
    let n_out = *net.arch().last().unwrap();
    let mut stats = EpochStats::default();
    let mut wrong = 0usize;
    let mut pixels = Vec::new();
    net.set_error_layer(true);
    for (img, label) in data.stream(order) {
        to_pixels(img, &mut pixels);
        net.present(&pixels, Some(label))?;
        let mut counts = vec![0u64; n_out];
        net.set_plasticity(false);
        let before = net.counters().weight_updates;
        for k in 0..t_train {
            if k == t_gate {
                stats.gated_updates += net.counters().weight_updates - before;
                net.set_plasticity(true);
            }
            step_logged(net, &mut log)?;
            for &o in net.output() {
                counts[o as usize] += 1;
            }
        }
        if t_gate >= t_train {
            stats.gated_updates += net.counters().weight_updates - before;
        }
        wrong += (argmax(&counts) != label) as usize;
        stats.samples += 1;
    }
    net.set_plasticity(false);
    stats.train_error = if stats.samples == 0 {
        0.0
    } else {
        wrong as f64 / stats.samples as f64
    };
    Ok(stats)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalResult {
    pub samples: usize,
    pub errors: usize,
    /// Samples with no output spike at all.
    pub silent: usize,
    pub spikes: Vec<u64>,
    pub synops: u64,
    pub predictions: Vec<u8>,
}

impl EvalResult {
    pub fn error_rate(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.errors as f64 / self.samples as f64
        }
    }

    fn merge(&mut self, other: EvalResult) {
        self.samples += other.samples;
        self.errors += other.errors;
        self.silent += other.silent;
        if self.spikes.is_empty() {
            self.spikes = other.spikes;
        } else {
            for (a, b) in self.spikes.iter_mut().zip(other.spikes) {
                *a += b;
            }
        }
        self.synops += other.synops;
        self.predictions.extend(other.predictions);
    }
}

/// Split `0..n` into `shards` contiguous ranges.
fn shard_ranges(n: usize, shards: usize) -> Vec<std::ops::Range<usize>> {
    let shards = shards.clamp(1, n.max(1));
    (0..shards)
        .map(|s| s * n / shards..(s + 1) * n / shards)
        .collect()
}

/// Run `work` on a clone of `net` for each shard, in parallel, and merge
/// the results in shard order. Every shard continues from the state of
/// `net`, so results depend on the shard count but not on scheduling.
fn sharded<N, R, F>(net: &N, n: usize, shards: usize, work: F) -> Result<Vec<R>>
where
    N: SpikingNetwork,
    R: Send,
    F: Fn(&mut N, std::ops::Range<usize>) -> Result<R> + Sync,
{
    let ranges = shard_ranges(n, shards);
    std::thread::scope(|s| {
        let handles: Vec<_> = ranges
            .into_iter()
            .map(|r| {
                let mut local = net.clone();
                let work = &work;
                s.spawn(move || work(&mut local, r))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("evaluation worker panicked"))
            .collect()
    })
}

/// Classify every sample by its output spike count over `t_test_ms`, with
/// plasticity and the error layer off. `net` itself is not modified.
pub fn evaluate_rate<N: SpikingNetwork>(
    net: &N,
    data: &Dataset,
    t_test_ms: f64,
    shards: usize,
) -> Result<EvalResult> {
    let t_test = steps(t_test_ms, net.dt_ms());
    let n_out = *net.arch().last().unwrap();
    let parts = sharded(net, data.len(), shards, |net, range| {
        net.set_plasticity(false);
        net.set_error_layer(false);
        net.reset_counters();
        let mut res = EvalResult::default();
        let mut pixels = Vec::new();
        for i in range {
            to_pixels(data.image_bytes(i), &mut pixels);
            net.present(&pixels, None)?;
            let mut counts = vec![0u64; n_out];
            for _ in 0..t_test {
                net.step()?;
                for &o in net.output() {
                    counts[o as usize] += 1;
                }
            }
            let pred = argmax(&counts);
            res.samples += 1;
            res.errors += (pred != data.label(i)) as usize;
            res.silent += counts.iter().all(|&c| c == 0) as usize;
            res.predictions.push(pred as u8);
        }
        res.spikes = net.counters().spikes.clone();
        res.synops = net.counters().synops;
        Ok(res)
    })?;
    let mut out = EvalResult::default();
    for p in parts {
        out.merge(p);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstSpikeConfig {
    /// Largest number of output spikes considered.
    pub k_max: usize,
    /// Output spikes earlier than this after onset are ignored.
    pub t_offset_ms: f64,
    pub t_test_ms: f64,
    /// Random-pattern stimulation before each sample (0 disables).
    pub t_random_ms: f64,
    pub shards: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstSpikeResult {
    pub samples: usize,
    /// `errors[k - 1]`: misclassified samples when deciding on the first `k` spikes.
    pub errors: Vec<usize>,
    /// Mean SynOps from stimulus onset to the `k`-th output spike, or to the
    /// end of the window when fewer spikes occur.
    pub synops: Vec<f64>,
    /// Samples with no output spike after the offset.
    pub no_spike: usize,
    /// Error of the count over all spikes after the offset.
    pub all_spikes_errors: usize,
}

impl FirstSpikeResult {
    pub fn error_curve(&self) -> Vec<f64> {
        self.errors
            .iter()
            .map(|&e| e as f64 / self.samples.max(1) as f64)
            .collect()
    }
}

/// Plurality vote over a spike sequence, ties to the lowest class.
pub fn plurality(classes: &[u32], n_classes: usize) -> Option<usize> {
    if classes.is_empty() {
        return None;
    }
    let mut counts = vec![0u64; n_classes];
    for &c in classes {
        counts[c as usize] += 1;
    }
    Some(argmax(&counts))
}

/// Classify each sample from its first `k = 1..=k_max` output spikes.
pub fn evaluate_first_spike<N: SpikingNetwork>(
    net: &N,
    data: &Dataset,
    cfg: &FirstSpikeConfig,
) -> Result<FirstSpikeResult> {
    let dt = net.dt_ms();
    let t_test = steps(cfg.t_test_ms, dt);
    let t_offset = steps(cfg.t_offset_ms, dt);
    let t_random = steps(cfg.t_random_ms, dt);
    let n_in = net.arch()[0];
    let n_out = *net.arch().last().unwrap();
    let k_max = cfg.k_max;
    let rng = CounterRng::new(cfg.seed);
    let parts = sharded(net, data.len(), cfg.shards, |net, range| {
        net.set_plasticity(false);
        net.set_error_layer(false);
        let mut errors = vec![0usize; k_max];
        let mut synops = vec![0f64; k_max];
        let (mut no_spike, mut all_err, mut samples) = (0, 0, 0);
        let mut pixels = Vec::new();
        for i in range {
            if t_random > 0 {
                let noise: Vec<f64> = (0..n_in)
                    .map(|p| to_unit(rng.draw(Stream::Probe, i as u64, p as u64)))
                    .collect();
                net.present(&noise, None)?;
                for _ in 0..t_random {
                    net.step()?;
                }
            }
            to_pixels(data.image_bytes(i), &mut pixels);
            net.present(&pixels, None)?;
            let start = net.counters().synops;
            let mut seq: Vec<u32> = Vec::new();
            let mut at_k: Vec<u64> = Vec::new();
            for t in 0..t_test {
                net.step()?;
                if t >= t_offset {
                    for &o in net.output() {
                        seq.push(o);
                        if at_k.len() < k_max {
                            at_k.push(net.counters().synops - start);
                        }
                    }
                }
            }
            let total = net.counters().synops - start;
            let label = data.label(i);
            samples += 1;
            if seq.is_empty() {
                no_spike += 1;
            }
            for k in 1..=k_max {
                let pred = plurality(&seq[..k.min(seq.len())], n_out);
                errors[k - 1] += (pred != Some(label)) as usize;
                synops[k - 1] += at_k.get(k - 1).copied().unwrap_or(total) as f64;
            }
            all_err += (plurality(&seq, n_out) != Some(label)) as usize;
        }
        Ok((samples, errors, synops, no_spike, all_err))
    })?;
    let mut out = FirstSpikeResult {
        samples: 0,
        errors: vec![0; k_max],
        synops: vec![0.0; k_max],
        no_spike: 0,
        all_spikes_errors: 0,
    };
    for (s, e, so, ns, ae) in parts {
        out.samples += s;
        for k in 0..k_max {
            out.errors[k] += e[k];
            out.synops[k] += so[k];
        }
        out.no_spike += ns;
        out.all_spikes_errors += ae;
    }
    for s in &mut out.synops {
        *s /= out.samples.max(1) as f64;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0, 3, 3, 1]), 1);
        assert_eq!(argmax(&[0, 0, 0]), 0);
        assert_eq!(argmax(&[1, 0, 5]), 2);
    }

    #[test]
    fn plurality_vote() {
        assert_eq!(plurality(&[], 10), None);
        assert_eq!(plurality(&[4], 10), Some(4));
        assert_eq!(plurality(&[4, 2], 10), Some(2));
        assert_eq!(plurality(&[4, 2, 4], 10), Some(4));
    }

    #[test]
    fn shards_cover_range() {
        for (n, s) in [(10, 3), (5, 8), (0, 4), (1000, 7)] {
            let r = shard_ranges(n, s);
            let flat: Vec<usize> = r.into_iter().flatten().collect();
            assert_eq!(flat, (0..n).collect::<Vec<_>>());
        }
    }
}
