//! Hidden and prediction neurons: current-based leaky integrate-and-fire
//! soma plus a leaky dendritic compartment that only feeds plasticity.

use crate::error::{Error, Result};
use crate::rng::{bernoulli_threshold, geometric, CounterRng, Stream};

use super::params::{NeuronParams, NoiseParams};

/// Dense synapse block stored presynaptic-major: `w[pre * n_post + post]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Synapses {
    pub n_pre: usize,
    pub n_post: usize,
    pub w: Vec<f64>,
}

impl Synapses {
    pub fn zeros(n_pre: usize, n_post: usize) -> Self {
        Self {
            n_pre,
            n_post,
            w: vec![0.0; n_pre * n_post],
        }
    }

    /// `U(±sqrt(scale / (n_pre + n_post)))`.
    pub fn uniform(n_pre: usize, n_post: usize, scale: f64, rng: &CounterRng, tag: u64) -> Self {
        let bound = (scale / (n_pre + n_post) as f64).sqrt();
        let w = (0..n_pre * n_post)
            .map(|k| rng.symmetric(Stream::Init, tag, k as u64, bound))
            .collect();
        Self { n_pre, n_post, w }
    }

    #[inline]
    pub fn get(&self, pre: usize, post: usize) -> f64 {
        self.w[pre * self.n_post + post]
    }

    #[inline]
    pub fn set(&mut self, pre: usize, post: usize, v: f64) {
        self.w[pre * self.n_post + post] = v;
    }

    #[inline]
    pub fn outgoing(&self, pre: usize) -> &[f64] {
        &self.w[pre * self.n_post..(pre + 1) * self.n_post]
    }

    /// Incoming weights of one postsynaptic neuron.
    pub fn incoming(&self, post: usize) -> Vec<f64> {
        (0..self.n_pre).map(|j| self.get(j, post)).collect()
    }
}

/// Fixed random error-to-dendrite weights, hidden neuron × class.
///
/// Positive and negative error neurons of a class reach a hidden neuron
/// through synapses of equal magnitude and opposite sign.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackMatrix {
    pub n_hidden: usize,
    pub n_classes: usize,
    pub g_pos: Vec<f64>,
    pub g_neg: Vec<f64>,
}

impl FeedbackMatrix {
    /// `g ~ U(±sqrt(6 / (N_E + N_H)))` with `N_E = 2 * n_classes` error neurons.
    pub fn random(n_hidden: usize, n_classes: usize, rng: &CounterRng, tag: u64) -> Self {
        let bound = (6.0 / (2 * n_classes + n_hidden) as f64).sqrt();
        let g: Vec<f64> = (0..n_hidden * n_classes)
            .map(|k| rng.symmetric(Stream::Feedback, tag, k as u64, bound))
            .collect();
        Self {
            n_hidden,
            n_classes,
            g_pos: g.clone(),
            g_neg: g,
        }
    }

    #[inline]
    pub fn g(&self, hidden: usize, class: usize) -> (f64, f64) {
        let k = hidden * self.n_classes + class;
        (self.g_pos[k], self.g_neg[k])
    }

    /// Net weight a hidden neuron receives over both synapses of every pair.
    pub fn net_weight(&self, hidden: usize) -> f64 {
        (0..self.n_classes)
            .map(|k| {
                let (p, n) = self.g(hidden, k);
                p - n
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    /// Somatic membrane potential (mV).
    pub v: Vec<f64>,
    /// Dendritic potential (mV).
    pub u: Vec<f64>,
    /// Total synaptic current (nA).
    pub i: Vec<f64>,
    /// Step index until which the soma is held at reset.
    pub refr_until: Vec<u64>,
}

impl LayerState {
    pub fn new(n: usize) -> Self {
        Self {
            v: vec![0.0; n],
            u: vec![0.0; n],
            i: vec![0.0; n],
            refr_until: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

/// Source of the dendritic drive.
#[derive(Debug, Clone, Copy)]
pub enum Dendrite<'a> {
    /// Hidden layers: random projection of the error pairs.
    Random(&'a FeedbackMatrix),
    /// Prediction layer: one error pair per neuron with weight `w_e`.
    OneToOne(f64),
}

/// Per-step context shared by all layers.
#[derive(Debug, Clone, Copy)]
pub struct StepCtx<'a> {
    pub step: u64,
    pub dt_ms: f64,
    pub neuron: &'a NeuronParams,
    pub noise: &'a NoiseParams,
    pub rng: &'a CounterRng,
    pub refr_steps: u64,
}

/// A population of two-compartment neurons with its background-noise
/// schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct LifLayer {
    pub id: u64,
    pub state: LayerState,
    /// Constant extra current per neuron (nA).
    pub bias_na: Vec<f64>,
    next_bg: Vec<u64>,
    bg_draws: Vec<u64>,
}

impl LifLayer {
    pub fn new(id: u64, n: usize) -> Self {
        Self {
            id,
            state: LayerState::new(n),
            bias_na: vec![0.0; n],
            next_bg: vec![u64::MAX; n],
            bg_draws: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.state.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state.is_empty()
    }

    /// Schedule background events from `step` on. Must be called before the
    /// first step when background noise is enabled.
    pub fn start_background(&mut self, ctx: &StepCtx) {
        let q = bg_prob(ctx);
        for n in 0..self.len() {
            self.next_bg[n] = self.draw_bg(ctx.rng, n, q, ctx.step);
        }
    }

    fn draw_bg(&mut self, rng: &CounterRng, n: usize, q: f64, from: u64) -> u64 {
        if q <= 0.0 {
            return u64::MAX;
        }
        let c = self.bg_draws[n];
        self.bg_draws[n] += 1;
        let x = rng.draw(Stream::Background, (self.id << 32) | n as u64, c);
        from.saturating_add(geometric(x, q))
    }

    /// Advance one step. `inputs` are this step's presynaptic spikes,
    /// `err_pos`/`err_neg` the error spikes arriving at the dendrites.
    /// Emitted spikes are written to `out`.
    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &mut self,
        ctx: &StepCtx,
        inputs: &[u32],
        syn: &Synapses,
        err_pos: &[u32],
        err_neg: &[u32],
        dendrite: Dendrite,
        out: &mut Vec<u32>,
    ) -> Result<()> {
        let n = self.len();
        if syn.n_post != n {
            return Err(Error::Shape(format!(
                "synapses feed {} neurons, layer has {n}",
                syn.n_post
            )));
        }
        if let Dendrite::Random(fb) = dendrite {
            if fb.n_hidden != n {
                return Err(Error::Shape(format!(
                    "feedback for {} neurons, layer has {n}",
                    fb.n_hidden
                )));
            }
        }
        out.clear();
        let NeuronParams {
            c_pf,
            g_v_ns,
            g_u_ns,
            v_t_mv,
            tau_syn_ms,
            ..
        } = *ctx.neuron;
        let dt = ctx.dt_ms;
        let st = &mut self.state;

        // synaptic current
        let i_decay = 1.0 - dt / tau_syn_ms;
        for x in st.i.iter_mut() {
            *x *= i_decay;
        }
        match bernoulli_threshold(ctx.noise.p_blankout) {
            None => {
                for &j in inputs {
                    let row = syn.outgoing(j as usize);
                    for (x, w) in st.i.iter_mut().zip(row) {
                        *x += w;
                    }
                }
            }
            Some(thr) => {
                for &j in inputs {
                    let row = syn.outgoing(j as usize);
                    let key = ctx
                        .rng
                        .key(Stream::Blankout, ctx.step, (self.id << 32) | j as u64);
                    for (post, (x, w)) in st.i.iter_mut().zip(row).enumerate() {
                        if CounterRng::lane(key, post as u64) < thr {
                            *x += w;
                        }
                    }
                }
            }
        }

        // dendrite
        let u_decay = 1.0 - dt * g_u_ns / c_pf;
        for x in st.u.iter_mut() {
            *x *= u_decay;
        }
        let kick = 1000.0 / c_pf;
        match dendrite {
            Dendrite::Random(fb) => {
                for &k in err_pos {
                    for (h, x) in st.u.iter_mut().enumerate() {
                        *x += kick * fb.g_pos[h * fb.n_classes + k as usize];
                    }
                }
                for &k in err_neg {
                    for (h, x) in st.u.iter_mut().enumerate() {
                        *x -= kick * fb.g_neg[h * fb.n_classes + k as usize];
                    }
                }
            }
            Dendrite::OneToOne(w_e) => {
                for &k in err_pos {
                    if let Some(x) = st.u.get_mut(k as usize) {
                        *x += kick * w_e;
                    }
                }
                for &k in err_neg {
                    if let Some(x) = st.u.get_mut(k as usize) {
                        *x -= kick * w_e;
                    }
                }
            }
        }

        // soma
        let a = dt / c_pf;
        let bg_kick = 1000.0 * ctx.noise.sigma_w_na / c_pf;
        let q = bg_prob(ctx);
        for h in 0..n {
            let mut noise = 0.0;
            if self.next_bg[h] == ctx.step {
                noise = bg_kick;
                let c = self.bg_draws[h];
                self.bg_draws[h] += 1;
                let x = ctx
                    .rng
                    .draw(Stream::Background, (self.id << 32) | h as u64, c);
                self.next_bg[h] = ctx.step.saturating_add(1 + geometric(x, q));
            }
            if ctx.step < st.refr_until[h] {
                st.v[h] = 0.0;
                continue;
            }
            let v = st.v[h];
            let v = v + a * (-g_v_ns * v + 1000.0 * (st.i[h] + self.bias_na[h])) + noise;
            if v >= v_t_mv {
                st.v[h] = 0.0;
                st.refr_until[h] = ctx.step + ctx.refr_steps;
                out.push(h as u32);
            } else {
                st.v[h] = v;
            }
        }
        Ok(())
    }
}

fn bg_prob(ctx: &StepCtx) -> f64 {
    if ctx.noise.sigma_w_na == 0.0 {
        0.0
    } else {
        (ctx.noise.bg_rate_hz * 1e-3 * ctx.dt_ms).min(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx<'a>(
        step: u64,
        neuron: &'a NeuronParams,
        noise: &'a NoiseParams,
        rng: &'a CounterRng,
    ) -> StepCtx<'a> {
        StepCtx {
            step,
            dt_ms: 0.1,
            neuron,
            noise,
            rng,
            refr_steps: 39,
        }
    }

    #[test]
    fn passive_decay_is_one_euler_step() {
        let p = NeuronParams::default();
        let noise = NoiseParams::silent();
        let rng = CounterRng::new(0);
        let mut l = LifLayer::new(1, 1);
        l.state.v[0] = 50.0;
        let syn = Synapses::zeros(1, 1);
        let fb = FeedbackMatrix::random(1, 10, &rng, 0);
        let mut out = vec![];
        l.step(
            &ctx(0, &p, &noise, &rng),
            &[],
            &syn,
            &[],
            &[],
            Dendrite::Random(&fb),
            &mut out,
        )
        .unwrap();
        assert!((l.state.v[0] - 45.0).abs() < 1e-12);
        assert!(out.is_empty());
    }

    #[test]
    fn threshold_crossing_spikes_resets_and_holds() {
        let p = NeuronParams::default();
        let noise = NoiseParams::silent();
        let rng = CounterRng::new(0);
        let mut l = LifLayer::new(1, 1);
        // after one leak step this lands exactly on threshold
        l.state.v[0] = 100.0 / 0.9;
        let syn = Synapses::zeros(1, 1);
        let mut out = vec![];
        let d = Dendrite::OneToOne(0.09);
        l.step(&ctx(10, &p, &noise, &rng), &[], &syn, &[], &[], d, &mut out)
            .unwrap();
        assert_eq!(out, vec![0]);
        assert_eq!(l.state.v[0], 0.0);
        // strong drive cannot make it fire during the refractory window
        l.bias_na[0] = 50.0;
        for s in 11..49 {
            l.step(&ctx(s, &p, &noise, &rng), &[], &syn, &[], &[], d, &mut out)
                .unwrap();
            assert!(out.is_empty(), "spiked at step {s}");
            assert_eq!(l.state.v[0], 0.0);
        }
        l.step(&ctx(49, &p, &noise, &rng), &[], &syn, &[], &[], d, &mut out)
            .unwrap();
        assert_eq!(out, vec![0]);
    }

    #[test]
    fn one_to_one_dendrite() {
        let p = NeuronParams::default();
        let noise = NoiseParams::silent();
        let rng = CounterRng::new(0);
        let mut l = LifLayer::new(2, 10);
        let syn = Synapses::zeros(1, 10);
        let mut out = vec![];
        let d = Dendrite::OneToOne(0.09);
        l.step(&ctx(0, &p, &noise, &rng), &[], &syn, &[3], &[], d, &mut out)
            .unwrap();
        assert!((l.state.u[3] - 90.0).abs() < 1e-12);
        assert!(l
            .state
            .u
            .iter()
            .enumerate()
            .all(|(k, &u)| k == 3 || u == 0.0));
        // decays at g_U / C per ms
        l.step(&ctx(1, &p, &noise, &rng), &[], &syn, &[], &[], d, &mut out)
            .unwrap();
        assert!((l.state.u[3] - 45.0).abs() < 1e-12);
        // opposite spikes cancel
        let mut l = LifLayer::new(2, 10);
        l.step(
            &ctx(0, &p, &noise, &rng),
            &[],
            &syn,
            &[5],
            &[5],
            d,
            &mut out,
        )
        .unwrap();
        assert_eq!(l.state.u[5], 0.0);
    }

    #[test]
    fn synaptic_kick_then_decay() {
        let p = NeuronParams::default();
        let noise = NoiseParams::silent();
        let rng = CounterRng::new(0);
        let mut l = LifLayer::new(1, 2);
        let mut syn = Synapses::zeros(1, 2);
        syn.set(0, 0, 0.05);
        syn.set(0, 1, -0.02);
        let fb = FeedbackMatrix::random(2, 10, &rng, 0);
        let mut out = vec![];
        let d = Dendrite::Random(&fb);
        l.step(&ctx(0, &p, &noise, &rng), &[0], &syn, &[], &[], d, &mut out)
            .unwrap();
        assert_eq!(l.state.i, vec![0.05, -0.02]);
        l.step(&ctx(1, &p, &noise, &rng), &[], &syn, &[], &[], d, &mut out)
            .unwrap();
        assert!((l.state.i[0] - 0.05 * 0.975).abs() < 1e-15);
    }

    #[test]
    fn feedback_pairs_sum_to_zero() {
        let fb = FeedbackMatrix::random(50, 10, &CounterRng::new(3), 1);
        for h in 0..50 {
            assert_eq!(fb.net_weight(h), 0.0);
        }
        let bound = (6.0f64 / 70.0).sqrt();
        assert!(fb.g_pos.iter().all(|g| g.abs() <= bound));
    }

    #[test]
    fn shape_errors() {
        let p = NeuronParams::default();
        let noise = NoiseParams::silent();
        let rng = CounterRng::new(0);
        let mut l = LifLayer::new(1, 3);
        let mut out = vec![];
        let r = l.step(
            &ctx(0, &p, &noise, &rng),
            &[],
            &Synapses::zeros(2, 4),
            &[],
            &[],
            Dendrite::OneToOne(0.1),
            &mut out,
        );
        assert!(matches!(r, Err(Error::Shape(_))));
        let fb = FeedbackMatrix::random(5, 10, &rng, 0);
        let r = l.step(
            &ctx(0, &p, &noise, &rng),
            &[],
            &Synapses::zeros(2, 3),
            &[],
            &[],
            Dendrite::Random(&fb),
            &mut out,
        );
        assert!(matches!(r, Err(Error::Shape(_))));
    }
}
