use crate::checkpoint::{Checkpoint, LayerWeights};
use crate::continuous::encoder::{check_pixels, label_spikes, DataLayer};
use crate::error::{Error, Result};
use crate::fixedpoint::{clip_weight, diamond};
use crate::network::{parse_arch_dims, Counters, SpikingNetwork};
use crate::plasticity::qboxcar;
use crate::rng::CounterRng;

use super::layer::{
    qstep_hidden, Blankout, QDendrite, QFeedback, QSynapses, QuantErrorState, QuantLayerState,
};
use super::params::QuantParams;

/// Fixed-point counterpart of the continuous network, with the same step
/// order: data, layers in sequence, error pairs, plasticity.
#[derive(Debug, Clone)]
pub struct QuantNet {
    params: QuantParams,
    arch: Vec<usize>,
    rng: CounterRng,
    data: DataLayer,
    layers: Vec<QuantLayerState>,
    weights: Vec<QSynapses>,
    feedback: Vec<QFeedback>,
    error: QuantErrorState,
    now: u64,
    label: Option<usize>,
    plastic: bool,
    error_on: bool,
    spikes: Vec<Vec<u32>>,
    err_pos: Vec<u32>,
    err_neg: Vec<u32>,
    next_pos: Vec<u32>,
    next_neg: Vec<u32>,
    acc: Vec<i32>,
    delta: Vec<i32>,
    counters: Counters,
}

impl QuantNet {
    pub fn new(arch: &[usize], params: QuantParams, seed: u64) -> Result<Self> {
        parse_arch_dims(arch)?;
        params.validate()?;
        let rng = CounterRng::new(seed);
        let n_classes = *arch.last().unwrap();
        let weights = arch
            .windows(2)
            .enumerate()
            .map(|(l, d)| QSynapses::uniform(d[0], d[1], params.init_scale, &rng, l as u64))
            .collect();
        let feedback = arch[1..arch.len() - 1]
            .iter()
            .enumerate()
            .map(|(l, &n)| QFeedback::random(n, n_classes, params.feedback_bound, &rng, l as u64))
            .collect();
        let mut data = DataLayer::new(0, arch[0], 0);
        data.set_probabilities(&vec![0.0; arch[0]], 0, &rng);
        Ok(Self {
            layers: arch[1..].iter().map(|&n| QuantLayerState::new(n)).collect(),
            arch: arch.to_vec(),
            rng,
            data,
            weights,
            feedback,
            error: QuantErrorState::new(n_classes),
            now: 0,
            label: None,
            plastic: true,
            error_on: true,
            spikes: vec![Vec::new(); arch.len()],
            err_pos: Vec::new(),
            err_neg: Vec::new(),
            next_pos: Vec::new(),
            next_neg: Vec::new(),
            acc: Vec::new(),
            delta: Vec::new(),
            counters: Counters::new(arch.len()),
            params,
        })
    }

    pub fn params(&self) -> &QuantParams {
        &self.params
    }

    pub fn weights(&self) -> &[QSynapses] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [QSynapses] {
        &mut self.weights
    }

    pub fn layers(&self) -> &[QuantLayerState] {
        &self.layers
    }

    pub fn feedback(&self) -> &[QFeedback] {
        &self.feedback
    }

    pub fn error_state(&self) -> &QuantErrorState {
        &self.error
    }

    pub fn error_spikes(&self) -> (&[u32], &[u32]) {
        (&self.err_pos, &self.err_neg)
    }

    pub fn load_checkpoint(&mut self, ck: &Checkpoint) -> Result<()> {
        let Checkpoint::Quant(layers) = ck else {
            return Err(Error::Checkpoint("expected a quantized checkpoint".into()));
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

    fn apply_plasticity(&mut self, l: usize) -> u64 {
        let cfg = &self.params.plasticity;
        let pre = &self.spikes[l];
        if pre.is_empty() {
            return 0;
        }
        let st = &self.layers[l];
        self.delta.clear();
        let mut open = 0u64;
        for (&u, &i) in st.u.iter().zip(&st.i) {
            let t = diamond(cfg.eta, u as i32);
            if t != 0 && qboxcar(i as i32, cfg) {
                self.delta.push(t);
                open += 1;
            } else {
                self.delta.push(0);
            }
        }
        if open == 0 {
            return 0;
        }
        let syn = &mut self.weights[l];
        let n_post = syn.n_post;
        for &j in pre {
            let row = &mut syn.w[j as usize * n_post..(j as usize + 1) * n_post];
            for (w, &d) in row.iter_mut().zip(&self.delta) {
                if d != 0 {
                    *w = clip_weight(*w as i32 + d);
                }
            }
        }
        open * pre.len() as u64
    }
}

impl SpikingNetwork for QuantNet {
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
        check_pixels(pixels)?;
        if pixels.len() != self.arch[0] {
            return Err(Error::Shape(format!(
                "{} pixels for {} data neurons",
                pixels.len(),
                self.arch[0]
            )));
        }
        let probs: Vec<f64> = pixels
            .iter()
            .map(|&d| self.params.data_rate * d / 1000.0)
            .collect();
        self.data.set_probabilities(&probs, self.now, &self.rng);
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
        self.data
            .spikes_at(self.now, &self.rng, &mut self.spikes[0]);
        let top = self.layers.len() - 1;
        for l in 0..self.layers.len() {
            let dendrite = if l == top {
                QDendrite::OneToOne(p.w_e)
            } else {
                QDendrite::Random(&self.feedback[l])
            };
            let (before, after) = self.spikes.split_at_mut(l + 1);
            let blank = Blankout {
                rng: &self.rng,
                step: self.now,
                layer: l as u64 + 1,
            };
            self.counters.saturations += qstep_hidden(
                &mut self.layers[l],
                &before[l],
                &self.weights[l],
                &self.err_pos,
                &self.err_neg,
                dendrite,
                p,
                blank,
                &mut self.acc,
                &mut after[0],
            )?;
        }

        if self.error_on {
            let label = label_spikes(self.label, self.now, p.data_refr_steps as u64);
            let label: &[u32] = match &label {
                Some(k) => std::slice::from_ref(k),
                None => &[],
            };
            super::layer::qstep_error(
                &mut self.error,
                &self.spikes[top + 1],
                label,
                p,
                0,
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
        Checkpoint::Quant(
            self.weights
                .iter()
                .map(|s| LayerWeights::from_pre_major(s.n_pre, s.n_post, &s.w))
                .collect(),
        )
    }

    fn tau_syn_steps(&self) -> u64 {
        // time for the synaptic leak to shed 1 - 1/e of the current
        ((-(self.params.a_syn.get() as f64)).exp2()).round() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plasticity::qerbp_update;

    fn run(net: &mut QuantNet, steps: u64) {
        for _ in 0..steps {
            net.step().unwrap();
        }
    }

    #[test]
    fn construction_and_shapes() {
        let net = QuantNet::new(&[784, 100, 10], QuantParams::default(), 1).unwrap();
        assert_eq!(net.weights().len(), 2);
        assert_eq!((net.weights()[1].n_pre, net.weights()[1].n_post), (100, 10));
        assert!(net.feedback()[0].g.iter().all(|g| g.abs() <= 64));
        assert!(QuantNet::new(&[5], QuantParams::default(), 1).is_err());
        let bad = QuantParams {
            v_reset: 40000,
            ..QuantParams::default()
        };
        assert!(QuantNet::new(&[5, 3, 2], bad, 1).is_err());
    }

    #[test]
    fn runs_are_reproducible() {
        let mut a = QuantNet::new(&[20, 8, 3], QuantParams::default(), 5).unwrap();
        let mut b = a.clone();
        let img: Vec<f64> = (0..20).map(|k| k as f64 / 19.0).collect();
        for net in [&mut a, &mut b] {
            net.present(&img, Some(1)).unwrap();
            run(net, 5000);
        }
        assert_eq!(a.checkpoint(), b.checkpoint());
        assert_eq!(a.counters(), b.counters());
        assert!(a.counters().spikes[0] > 0);
    }

    #[test]
    fn network_update_matches_reference_rule() {
        let params = QuantParams {
            p_blankout: 1.0,
            ..QuantParams::default()
        };
        let mut net = QuantNet::new(&[12, 5, 2], params.clone(), 9).unwrap();
        net.present(&[1.0; 12], Some(1)).unwrap();
        for _ in 0..6000 {
            let w_before = net.weights()[1].clone();
            net.step().unwrap();
            let pre = net.spikes(1).to_vec();
            let st = &net.layers()[1];
            let mut expected = w_before.clone();
            for post in 0..2 {
                let mut row = w_before.incoming(post);
                qerbp_update(
                    &mut row,
                    &pre,
                    st.u[post] as i32,
                    st.i[post] as i32,
                    &params.plasticity,
                );
                for (j, w) in row.into_iter().enumerate() {
                    expected.set(j, post, w);
                }
            }
            assert_eq!(net.weights()[1], expected);
        }
    }

    #[test]
    fn evaluation_mode_has_no_error_activity() {
        let mut net = QuantNet::new(&[20, 8, 3], QuantParams::default(), 2).unwrap();
        net.set_error_layer(false);
        net.set_plasticity(false);
        let before = net.checkpoint();
        net.present(&[1.0; 20], None).unwrap();
        run(&mut net, 3000);
        assert_eq!(net.counters().error_pos + net.counters().error_neg, 0);
        assert!(net.layers().iter().all(|l| l.u.iter().all(|&u| u == 0)));
        assert_eq!(net.checkpoint(), before);
    }

    #[test]
    fn checkpoint_reload() {
        let mut a = QuantNet::new(&[6, 4, 2], QuantParams::default(), 1).unwrap();
        let b = QuantNet::new(&[6, 4, 2], QuantParams::default(), 2).unwrap();
        a.load_checkpoint(&b.checkpoint()).unwrap();
        assert_eq!(a.checkpoint(), b.checkpoint());
        let ck = Checkpoint::from_bytes(&b.checkpoint().to_bytes()).unwrap();
        assert_eq!(ck, b.checkpoint());
    }
}
