//! Input and teacher spike generation.

use crate::error::{Error, Result};
use crate::rng::{geometric, to_unit, CounterRng, Stream};

use super::params::DataEncoderParams;

/// Exponential hazard (Hz) of a data neuron outside its refractory period.
pub fn hazard_rate_hz(d: f64, enc: &DataEncoderParams) -> f64 {
    1000.0 / enc.tau_refr_ms * (enc.beta * d + enc.gamma).exp()
}

pub fn check_pixels(pixels: &[f64]) -> Result<()> {
    match pixels.iter().position(|p| !(0.0..=1.0).contains(p)) {
        Some(index) => Err(Error::Pixel {
            index,
            value: pixels[index],
        }),
        None => Ok(()),
    }
}

/// One step of per-neuron Bernoulli sampling of the hazard process.
///
/// `last_spike_ms[n]` is the time of neuron `n`'s last spike (or `None`);
/// it is updated for neurons that fire.
pub fn data_spikes(
    pixels: &[f64],
    last_spike_ms: &mut [Option<f64>],
    t_ms: f64,
    dt_ms: f64,
    enc: &DataEncoderParams,
    rng: &CounterRng,
    step: u64,
) -> Result<Vec<u32>> {
    check_pixels(pixels)?;
    let mut out = Vec::new();
    for (n, &d) in pixels.iter().enumerate() {
        if let Some(t0) = last_spike_ms[n] {
            // small slack so that an exact multiple of dt is not lost to rounding
            if t_ms - t0 < enc.tau_refr_ms - 1e-9 {
                continue;
            }
        }
        let p = hazard_rate_hz(d, enc) * 1e-3 * dt_ms;
        if to_unit(rng.draw(Stream::Probe, step, n as u64)) < p {
            out.push(n as u32);
            last_spike_ms[n] = Some(t_ms);
        }
    }
    Ok(out)
}

/// Regular teacher train: the label neuron spikes whenever the global step
/// is a multiple of `period_steps`, so equal consecutive labels produce one
/// uninterrupted train.
#[inline]
pub fn label_spikes(label: Option<usize>, step: u64, period_steps: u64) -> Option<u32> {
    match label {
        Some(l) if period_steps > 0 && step.is_multiple_of(period_steps) => Some(l as u32),
        _ => None,
    }
}

const WHEEL: usize = 1 << 12;

/// Event-driven data population.
///
/// Waiting times are drawn as geometric variables, which has the same law
/// as an independent Bernoulli trial on every non-refractory step. Pending
/// waits are redrawn when the input changes (the geometric law is
/// memoryless), so a new image takes effect immediately.
#[derive(Debug, Clone, PartialEq)]
pub struct DataLayer {
    id: u64,
    prob: Vec<f64>,
    next: Vec<u64>,
    last: Vec<Option<u64>>,
    draws: Vec<u64>,
    generation: Vec<u32>,
    wheel: Vec<Vec<(u32, u32)>>,
    refr_steps: u64,
}

impl DataLayer {
    pub fn new(id: u64, n: usize, refr_steps: u64) -> Self {
        Self {
            id,
            prob: vec![0.0; n],
            next: vec![u64::MAX; n],
            last: vec![None; n],
            draws: vec![0; n],
            generation: vec![0; n],
            wheel: vec![Vec::new(); WHEEL],
            refr_steps,
        }
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    fn schedule(&mut self, rng: &CounterRng, n: usize, from: u64) {
        self.generation[n] = self.generation[n].wrapping_add(1);
        let q = self.prob[n];
        if q <= 0.0 {
            self.next[n] = u64::MAX;
            return;
        }
        let c = self.draws[n];
        self.draws[n] += 1;
        let x = rng.draw(Stream::Data, (self.id << 32) | n as u64, c);
        let at = from.saturating_add(geometric(x, q));
        self.next[n] = at;
        if at != u64::MAX {
            self.wheel[at as usize % WHEEL].push((n as u32, self.generation[n]));
        }
    }

    fn eligible_from(&self, n: usize, step: u64) -> u64 {
        match self.last[n] {
            Some(t) => step.max(t + self.refr_steps),
            None => step,
        }
    }

    /// Per-step spike probabilities, one per neuron, from `step` on.
    pub fn set_probabilities(&mut self, probs: &[f64], step: u64, rng: &CounterRng) {
        assert_eq!(probs.len(), self.len());
        self.prob.copy_from_slice(probs);
        for n in 0..self.len() {
            let from = self.eligible_from(n, step);
            self.schedule(rng, n, from);
        }
    }

    /// Hazard-encode an image from `step` on.
    pub fn set_pixels(
        &mut self,
        pixels: &[f64],
        enc: &DataEncoderParams,
        dt_ms: f64,
        step: u64,
        rng: &CounterRng,
    ) -> Result<()> {
        check_pixels(pixels)?;
        if pixels.len() != self.len() {
            return Err(Error::Shape(format!(
                "{} pixels for {} data neurons",
                pixels.len(),
                self.len()
            )));
        }
        let probs: Vec<f64> = pixels
            .iter()
            .map(|&d| (hazard_rate_hz(d, enc) * 1e-3 * dt_ms).min(1.0))
            .collect();
        self.set_probabilities(&probs, step, rng);
        Ok(())
    }

    /// Spikes at `step`. Steps must be visited in increasing order.
    pub fn spikes_at(&mut self, step: u64, rng: &CounterRng, out: &mut Vec<u32>) {
        out.clear();
        let slot = step as usize % WHEEL;
        let mut bucket = std::mem::take(&mut self.wheel[slot]);
        let mut keep = Vec::new();
        for (n, gen) in bucket.drain(..) {
            let ni = n as usize;
            if gen != self.generation[ni] {
                continue;
            }
            if self.next[ni] == step {
                out.push(n);
                self.last[ni] = Some(step);
                self.schedule(rng, ni, step + self.refr_steps.max(1));
            } else if self.next[ni] > step {
                keep.push((n, gen));
            }
        }
        let w = &mut self.wheel[slot];
        w.extend(keep);
        if w.capacity() == 0 {
            *w = bucket;
        }
        out.sort_unstable();
    }
}
