use crate::checkpoint::{Checkpoint, LayerWeights};
use crate::error::{Error, Result};
use crate::network::{parse_arch_dims, Counters, SpikingNetwork};
use crate::plasticity::boxcar;
use crate::rng::CounterRng;

use super::encoder::{label_spikes, DataLayer};
use super::error_layer::{step_error, ErrorDrive, ErrorLayerState};
use super::layer::{Dendrite, FeedbackMatrix, LifLayer, StepCtx, Synapses};
use super::params::ContinuousParams;

/// Feed-forward spiking network trained online with eRBP.
///
/// Within one step the data layer fires first, then every layer integrates
/// the spikes its predecessor emitted in the same step. The error pairs
/// integrate prediction and label spikes last, and their spikes reach the
/// dendrites in the following step. Plasticity uses the post-integration
/// dendritic potential and synaptic current.
#[derive(Debug, Clone)]
pub struct ContinuousNet {
    params: ContinuousParams,
    arch: Vec<usize>,
    rng: CounterRng,
    data: DataLayer,
    layers: Vec<LifLayer>,
    weights: Vec<Synapses>,
    feedback: Vec<FeedbackMatrix>,
    error: ErrorLayerState,
    now: u64,
    label: Option<usize>,
    plastic: bool,
    error_on: bool,
    spikes: Vec<Vec<u32>>,
    err_pos: Vec<u32>,
    err_neg: Vec<u32>,
    next_pos: Vec<u32>,
    next_neg: Vec<u32>,
    delta: Vec<f64>,
    counters: Counters,
}

impl ContinuousNet {
    /// `arch` lists population sizes from the data layer to the prediction
    /// layer, e.g. `[784, 100, 10]`.
    pub fn new(arch: &[usize], params: ContinuousParams, seed: u64) -> Result<Self> {
        parse_arch_dims(arch)?;
        params.validate()?;
        let rng = CounterRng::new(seed);
        let n_classes = *arch.last().unwrap();
        let weights = arch
            .windows(2)
            .enumerate()
            .map(|(l, d)| Synapses::uniform(d[0], d[1], params.init_scale, &rng, l as u64))
            .collect();
        let feedback = arch[1..arch.len() - 1]
            .iter()
            .enumerate()
            .map(|(l, &n)| FeedbackMatrix::random(n, n_classes, &rng, l as u64))
            .collect();
        let mut layers: Vec<LifLayer> = arch[1..]
            .iter()
            .enumerate()
            .map(|(l, &n)| LifLayer::new(l as u64 + 1, n))
            .collect();
        let ctx = StepCtx {
            step: 0,
            dt_ms: params.dt_ms,
            neuron: &params.neuron,
            noise: &params.noise,
            rng: &rng,
            refr_steps: params.refr_steps(),
        };
        for l in &mut layers {
            l.start_background(&ctx);
        }
        let mut data = DataLayer::new(0, arch[0], params.data_refr_steps());
        data.set_probabilities(&vec![0.0; arch[0]], 0, &rng);
        Ok(Self {
            arch: arch.to_vec(),
            rng,
            data,
            layers,
            weights,
            feedback,
            error: ErrorLayerState::new(n_classes),
            now: 0,
            label: None,
            plastic: true,
            error_on: true,
            spikes: vec![Vec::new(); arch.len()],
            err_pos: Vec::new(),
            err_neg: Vec::new(),
            next_pos: Vec::new(),
            next_neg: Vec::new(),
            delta: Vec::new(),
            counters: Counters::new(arch.len()),
            params,
        })
    }

    pub fn params(&self) -> &ContinuousParams {
        &self.params
    }

    pub fn weights(&self) -> &[Synapses] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Synapses] {
        &mut self.weights
    }

    pub fn layers(&self) -> &[LifLayer] {
        &self.layers
    }

    pub fn feedback(&self) -> &[FeedbackMatrix] {
        &self.feedback
    }

    pub fn error_state(&self) -> &ErrorLayerState {
        &self.error
    }

    /// Error spikes emitted in the last step (positive, negative).
    pub fn error_spikes(&self) -> (&[u32], &[u32]) {
        (&self.err_pos, &self.err_neg)
    }

    /// Replace the weights with those of a float checkpoint.
    pub fn load_checkpoint(&mut self, ck: &Checkpoint) -> Result<()> {
        let Checkpoint::Float(layers) = ck else {
            return Err(Error::Checkpoint(
                "expected a floating-point checkpoint".into(),
            ));
        };
        if layers.len() != self.weights.len() {
            return Err(Error::Checkpoint("layer count mismatch".into()));
        }
        for (s, l) in self.weights.iter_mut().zip(layers) {
            if (l.n_pre, l.n_post) != (s.n_pre, s.n_post) {
                return Err(Error::Checkpoint("layer shape mismatch".into()));
            }
            s.w = l.to_pre_major();
        }
        Ok(())
    }

    /// Drive the data layer with explicit per-step spike probabilities.
    pub fn present_probabilities(&mut self, probs: &[f64], label: Option<usize>) -> Result<()> {
        if probs.len() != self.arch[0] || probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Shape(
                "probabilities must match the data layer and lie in [0, 1]".into(),
            ));
        }
        self.data.set_probabilities(probs, self.now, &self.rng);
        self.label = label;
        Ok(())
    }

    fn apply_plasticity(&mut self, l: usize) -> u64 {
        let cfg = &self.params.plasticity;
        let pre = &self.spikes[l];
        if pre.is_empty() {
            return 0;
        }
        let st = &self.layers[l].state;
        self.delta.clear();
        let mut open = 0u64;
        for (&u, &i) in st.u.iter().zip(&st.i) {
            if u != 0.0 && boxcar(i, cfg) {
                self.delta.push(cfg.eta * u);
                open += 1;
            } else {
                self.delta.push(0.0);
            }
        }
        if open == 0 {
            return 0;
        }
        let syn = &mut self.weights[l];
        let n_post = syn.n_post;
        for &j in pre {
            let row = &mut syn.w[j as usize * n_post..(j as usize + 1) * n_post];
            for (w, d) in row.iter_mut().zip(&self.delta) {
                *w += d;
            }
        }
        open * pre.len() as u64
    }
}

impl SpikingNetwork for ContinuousNet {
    fn arch(&self) -> &[usize] {
        &self.arch
    }

    fn dt_ms(&self) -> f64 {
        self.params.dt_ms
    }

    fn now(&self) -> u64 {
        self.now
    }

    fn present(&mut self, pixels: &[f64], label: Option<usize>) -> Result<()> {
        if let Some(l) = label {
            if l >= *self.arch.last().unwrap() {
                return Err(Error::Config(format!("label {l} out of range")));
            }
        }
        self.data.set_pixels(
            pixels,
            &self.params.encoder,
            self.params.dt_ms,
            self.now,
            &self.rng,
        )?;
        self.label = label;
        Ok(())
    }

    fn set_plasticity(&mut self, on: bool) {
        self.plastic = on;
    }

    fn set_error_layer(&mut self, on: bool) {
        self.error_on = on;
        if !on {
            self.err_pos.clear();
            self.err_neg.clear();
        }
    }

    fn step(&mut self) -> Result<()> {
        let p = &self.params;
        let ctx = StepCtx {
            step: self.now,
            dt_ms: p.dt_ms,
            neuron: &p.neuron,
            noise: &p.noise,
            rng: &self.rng,
            refr_steps: p.refr_steps(),
        };
        self.data
            .spikes_at(self.now, &self.rng, &mut self.spikes[0]);
        let top = self.layers.len() - 1;
        for l in 0..self.layers.len() {
            let dendrite = if l == top {
                Dendrite::OneToOne(p.w_e_na)
            } else {
                Dendrite::Random(&self.feedback[l])
            };
            let (before, after) = self.spikes.split_at_mut(l + 1);
            self.layers[l].step(
                &ctx,
                &before[l],
                &self.weights[l],
                &self.err_pos,
                &self.err_neg,
                dendrite,
                &mut after[0],
            )?;
        }

        if self.error_on {
            let label = label_spikes(self.label, self.now, p.data_refr_steps());
            let label: &[u32] = match &label {
                Some(k) => std::slice::from_ref(k),
                None => &[],
            };
            let bias_mv = if self.label.is_none() {
                p.error_bias_mv_per_ms * p.dt_ms
            } else {
                0.0
            };
            let drive = ErrorDrive {
                kick_mv: 1000.0 * p.w_l_na / p.neuron.c_pf,
                v_t_mv: p.v_t_e_mv,
                bias_mv,
            };
            step_error(
                &mut self.error,
                &self.spikes[top + 1],
                label,
                &drive,
                &mut self.next_pos,
                &mut self.next_neg,
            );
            std::mem::swap(&mut self.err_pos, &mut self.next_pos);
            std::mem::swap(&mut self.err_neg, &mut self.next_neg);
            self.counters.error_pos += self.err_pos.len() as u64;
            self.counters.error_neg += self.err_neg.len() as u64;
        }

        if self.plastic && self.params.plasticity.enabled {
            for l in 0..self.layers.len() {
                self.counters.weight_updates += self.apply_plasticity(l);
            }
        }

        for (k, s) in self.spikes.iter().enumerate() {
            self.counters.spikes[k] += s.len() as u64;
            if k + 1 < self.arch.len() {
                self.counters.synops += (s.len() * self.arch[k + 1]) as u64;
            }
        }
        self.now += 1;
        Ok(())
    }

    fn spikes(&self, layer: usize) -> &[u32] {
        &self.spikes[layer]
    }

    fn counters(&self) -> &Counters {
        &self.counters
    }

    fn reset_counters(&mut self) {
        self.counters = Counters::new(self.arch.len());
    }

    fn checkpoint(&self) -> Checkpoint {
        Checkpoint::Float(
            self.weights
                .iter()
                .map(|s| LayerWeights::from_pre_major(s.n_pre, s.n_post, &s.w))
                .collect(),
        )
    }

    fn tau_syn_steps(&self) -> u64 {
        self.params.steps(self.params.neuron.tau_syn_ms)
    }
}
