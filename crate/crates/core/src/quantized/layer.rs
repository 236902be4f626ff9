//! Fixed-point neuron populations.

use crate::error::{Error, Result};
use crate::fixedpoint::{diamond, leak_step as leak, saturate16};
use crate::rng::{below, bernoulli_threshold, CounterRng, Stream};

use super::params::QuantParams;

/// 8-bit weights stored presynaptic-major: `w[pre * n_post + post]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QSynapses {
    pub n_pre: usize,
    pub n_post: usize,
    pub w: Vec<i8>,
}

impl QSynapses {
    pub fn zeros(n_pre: usize, n_post: usize) -> Self {
        Self {
            n_pre,
            n_post,
            w: vec![0; n_pre * n_post],
        }
    }

    /// `U(±bound)` with `bound = scale * sqrt(6 / (n_pre + n_post))`,
    /// rounded toward zero and clipped to 8 bits. Integer draws only.
    pub fn uniform(n_pre: usize, n_post: usize, scale: f64, rng: &CounterRng, tag: u64) -> Self {
        let bound = (scale * (6.0 / (n_pre + n_post) as f64).sqrt()).min(127.0) as u64;
        let w = (0..n_pre * n_post)
            .map(|k| {
                let x = rng.draw(Stream::Init, tag, k as u64);
                (below(x, 2 * bound + 1) as i64 - bound as i64) as i8
            })
            .collect();
        Self { n_pre, n_post, w }
    }

    #[inline]
    pub fn get(&self, pre: usize, post: usize) -> i8 {
        self.w[pre * self.n_post + post]
    }

    #[inline]
    pub fn set(&mut self, pre: usize, post: usize, v: i8) {
        self.w[pre * self.n_post + post] = v;
    }

    pub fn incoming(&self, post: usize) -> Vec<i8> {
        (0..self.n_pre).map(|j| self.get(j, post)).collect()
    }
}

/// Fixed random error-to-dendrite weights (hidden × class). The negative
/// error neuron of a class uses the same magnitude with opposite sign.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QFeedback {
    pub n_hidden: usize,
    pub n_classes: usize,
    pub g: Vec<i8>,
}

impl QFeedback {
    pub fn random(
        n_hidden: usize,
        n_classes: usize,
        bound: i32,
        rng: &CounterRng,
        tag: u64,
    ) -> Self {
        let b = bound.clamp(0, 127) as u64;
        let g = (0..n_hidden * n_classes)
            .map(|k| {
                (below(rng.draw(Stream::Feedback, tag, k as u64), 2 * b + 1) as i64 - b as i64)
                    as i8
            })
            .collect();
        Self {
            n_hidden,
            n_classes,
            g,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum QDendrite<'a> {
    Random(&'a QFeedback),
    OneToOne(i32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantLayerState {
    pub v: Vec<i16>,
    pub u: Vec<i16>,
    pub i: Vec<i16>,
    /// Remaining steps during which `v` is held at reset.
    pub refr_count: Vec<u32>,
}

impl QuantLayerState {
    pub fn new(n: usize) -> Self {
        Self {
            v: vec![0; n],
            u: vec![0; n],
            i: vec![0; n],
            refr_count: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

/// Blank-out draws of one step of one layer.
#[derive(Debug, Clone, Copy)]
pub struct Blankout<'a> {
    pub rng: &'a CounterRng,
    pub step: u64,
    pub layer: u64,
}

/// Advance a hidden or prediction population by one step.
///
/// Sums are accumulated in 32 bits and saturated once when stored, so the
/// result does not depend on the order of the presynaptic spikes. Returns
/// the number of saturation events.
#[allow(clippy::too_many_arguments)]
pub fn qstep_hidden(
    st: &mut QuantLayerState,
    inputs: &[u32],
    syn: &QSynapses,
    err_pos: &[u32],
    err_neg: &[u32],
    dendrite: QDendrite,
    p: &QuantParams,
    blank: Blankout,
    acc: &mut Vec<i32>,
    out: &mut Vec<u32>,
) -> Result<u64> {
    let n = st.len();
    if syn.n_post != n {
        return Err(Error::Shape(format!(
            "synapses feed {} neurons, layer has {n}",
            syn.n_post
        )));
    }
    if let QDendrite::Random(fb) = dendrite {
        if fb.n_hidden != n {
            return Err(Error::Shape(format!(
                "feedback for {} neurons, layer has {n}",
                fb.n_hidden
            )));
        }
    }
    out.clear();
    let mut sat = 0u64;

    // synaptic current
    acc.clear();
    acc.extend(st.i.iter().map(|&x| leak(p.a_syn, x as i32)));
    let g_i = p.g_i;
    match bernoulli_threshold(p.p_blankout) {
        None => {
            for &j in inputs {
                let row = &syn.w[j as usize * n..(j as usize + 1) * n];
                for (a, &w) in acc.iter_mut().zip(row) {
                    *a += diamond(g_i, w as i32);
                }
            }
        }
        Some(thr) => {
            for &j in inputs {
                let row = &syn.w[j as usize * n..(j as usize + 1) * n];
                let key =
                    blank
                        .rng
                        .key(Stream::Blankout, blank.step, (blank.layer << 32) | j as u64);
                for (post, (a, &w)) in acc.iter_mut().zip(row).enumerate() {
                    if CounterRng::lane(key, post as u64) < thr {
                        *a += diamond(g_i, w as i32);
                    }
                }
            }
        }
    }
    for (x, &a) in st.i.iter_mut().zip(acc.iter()) {
        let (v, s) = saturate16(a);
        *x = v;
        sat += s as u64;
    }

    // dendrite
    acc.clear();
    acc.extend(st.u.iter().map(|&x| leak(p.a_u, x as i32)));
    match dendrite {
        QDendrite::Random(fb) => {
            for (&k, sign) in err_pos
                .iter()
                .map(|k| (k, 1))
                .chain(err_neg.iter().map(|k| (k, -1)))
            {
                for (h, a) in acc.iter_mut().enumerate() {
                    let g = fb.g[h * fb.n_classes + k as usize] as i32;
                    *a += sign * diamond(p.g_u, g);
                }
            }
        }
        QDendrite::OneToOne(w) => {
            let d = diamond(p.g_u, w);
            for &k in err_pos {
                if let Some(a) = acc.get_mut(k as usize) {
                    *a += d;
                }
            }
            for &k in err_neg {
                if let Some(a) = acc.get_mut(k as usize) {
                    *a -= d;
                }
            }
        }
    }
    for (x, &a) in st.u.iter_mut().zip(acc.iter()) {
        let (v, s) = saturate16(a);
        *x = v;
        sat += s as u64;
    }

    // soma
    for h in 0..n {
        if st.refr_count[h] > 0 {
            st.refr_count[h] -= 1;
            st.v[h] = p.v_reset as i16;
            continue;
        }
        let v = st.v[h] as i32;
        let next = leak(p.a_v, v) + diamond(p.a_iv, st.i[h] as i32) + p.b_v;
        let (v16, s) = saturate16(next);
        sat += s as u64;
        if v16 as i32 >= p.v_t {
            out.push(h as u32);
            st.v[h] = p.v_reset as i16;
            st.refr_count[h] = p.refr_steps.saturating_sub(1);
        } else {
            st.v[h] = v16;
        }
    }
    Ok(sat)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantErrorState {
    pub v_pos: Vec<i16>,
    pub v_neg: Vec<i16>,
}

impl QuantErrorState {
    pub fn new(n: usize) -> Self {
        Self {
            v_pos: vec![0; n],
            v_neg: vec![0; n],
        }
    }
}

/// Advance the fixed-point error pairs by one step.
///
/// `bias` is subtracted from both membranes every step.
pub fn qstep_error(
    st: &mut QuantErrorState,
    pred: &[u32],
    label: &[u32],
    p: &QuantParams,
    bias: i32,
    out_pos: &mut Vec<u32>,
    out_neg: &mut Vec<u32>,
) {
    out_pos.clear();
    out_neg.clear();
    let kick = diamond(p.g_e, p.w_l);
    let n = st.v_pos.len();
    let mut diff = vec![0i32; n];
    for &k in pred {
        diff[k as usize] += 1;
    }
    for &k in label {
        diff[k as usize] -= 1;
    }
    for k in 0..n {
        for (v, sign, out) in [
            (&mut st.v_pos[k], 1, &mut *out_pos),
            (&mut st.v_neg[k], -1, &mut *out_neg),
        ] {
            let x = *v as i32;
            let next = (leak(p.a_e, x) + sign * diff[k] * kick - bias).max(0);
            let (mut next, _) = saturate16(next);
            if next as i32 >= p.v_t_e {
                out.push(k as u32);
                next -= p.v_t_e as i16;
            }
            *v = next;
        }
    }
}

/// Per-step Bernoulli data spikes with probability `rate * d / 1000`,
/// decided with integer thresholds on counter-based draws.
pub fn qdata_spikes(pixels: &[f64], rate: f64, rng: &CounterRng, step: u64) -> Result<Vec<u32>> {
    crate::continuous::encoder::check_pixels(pixels)?;
    let key = rng.key(Stream::Data, u64::MAX, step);
    let mut out = Vec::new();
    for (n, &d) in pixels.iter().enumerate() {
        let thr = bernoulli_threshold(rate * d / 1000.0);
        let fire = match thr {
            None => true,
            Some(t) => CounterRng::lane(key, n as u64) < t,
        };
        if fire {
            out.push(n as u32);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixedpoint::ShiftExp;

    fn quiet() -> QuantParams {
        QuantParams {
            b_v: 0,
            p_blankout: 1.0,
            ..QuantParams::default()
        }
    }

    fn step_once(st: &mut QuantLayerState, p: &QuantParams) -> Vec<u32> {
        let rng = CounterRng::new(0);
        let syn = QSynapses::zeros(1, st.len());
        let mut out = vec![];
        let blank = Blankout {
            rng: &rng,
            step: 0,
            layer: 1,
        };
        qstep_hidden(
            st,
            &[],
            &syn,
            &[],
            &[],
            QDendrite::OneToOne(0),
            p,
            blank,
            &mut vec![],
            &mut out,
        )
        .unwrap();
        out
    }

    #[test]
    fn leak_examples() {
        let p = quiet();
        let mut st = QuantLayerState::new(2);
        st.v = vec![100, 3];
        step_once(&mut st, &p);
        assert_eq!(st.v, vec![88, 2]);
    }

    #[test]
    fn threshold_reset_and_refractory() {
        let p = QuantParams {
            p_blankout: 1.0,
            ..QuantParams::default()
        };
        let mut st = QuantLayerState::new(1);
        st.v[0] = 32000;
        st.i[0] = 2000;
        let out = step_once(&mut st, &p);
        assert_eq!(out, vec![0]);
        assert_eq!(st.v[0] as i32, p.v_reset);
        // held for the rest of the refractory period despite strong drive
        let mut isi = 1;
        while step_once(&mut st, &p).is_empty() {
            isi += 1;
            assert_eq!(st.v[0] as i32, p.v_reset);
            st.i[0] = 2000;
        }
        assert_eq!(isi, p.refr_steps);
    }

    #[test]
    fn synaptic_input_with_gain() {
        let p = QuantParams {
            g_i: ShiftExp::new(1).unwrap(),
            ..quiet()
        };
        let rng = CounterRng::new(0);
        let mut syn = QSynapses::zeros(2, 2);
        syn.set(0, 0, 10);
        syn.set(1, 0, -3);
        syn.set(0, 1, 127);
        let mut st = QuantLayerState::new(2);
        let mut out = vec![];
        let blank = Blankout {
            rng: &rng,
            step: 0,
            layer: 1,
        };
        qstep_hidden(
            &mut st,
            &[0, 1],
            &syn,
            &[],
            &[],
            QDendrite::OneToOne(0),
            &p,
            blank,
            &mut vec![],
            &mut out,
        )
        .unwrap();
        assert_eq!(st.i, vec![14, 254]);
    }

    #[test]
    fn dendrite_pairs_cancel() {
        let p = quiet();
        let rng = CounterRng::new(0);
        let fb = QFeedback::random(4, 3, 64, &rng, 0);
        let syn = QSynapses::zeros(1, 4);
        let mut st = QuantLayerState::new(4);
        let mut out = vec![];
        let blank = Blankout {
            rng: &rng,
            step: 0,
            layer: 1,
        };
        qstep_hidden(
            &mut st,
            &[],
            &syn,
            &[1],
            &[1],
            QDendrite::Random(&fb),
            &p,
            blank,
            &mut vec![],
            &mut out,
        )
        .unwrap();
        assert_eq!(st.u, vec![0; 4]);
        qstep_hidden(
            &mut st,
            &[],
            &syn,
            &[2],
            &[],
            QDendrite::Random(&fb),
            &p,
            blank,
            &mut vec![],
            &mut out,
        )
        .unwrap();
        for h in 0..4 {
            assert_eq!(st.u[h] as i32, diamond(p.g_u, fb.g[h * 3 + 2] as i32));
        }
    }

    #[test]
    fn states_saturate() {
        let p = QuantParams {
            g_i: ShiftExp::new(8).unwrap(),
            ..quiet()
        };
        let rng = CounterRng::new(0);
        let mut syn = QSynapses::zeros(3, 1);
        for j in 0..3 {
            syn.set(j, 0, 127);
        }
        let mut st = QuantLayerState::new(1);
        let mut out = vec![];
        let blank = Blankout {
            rng: &rng,
            step: 0,
            layer: 1,
        };
        let sat = qstep_hidden(
            &mut st,
            &[0, 1, 2],
            &syn,
            &[],
            &[],
            QDendrite::OneToOne(0),
            &p,
            blank,
            &mut vec![],
            &mut out,
        )
        .unwrap();
        assert_eq!(st.i[0], i16::MAX);
        assert!(sat >= 1);
    }

    #[test]
    fn error_pairs() {
        let p = QuantParams::default();
        let mut st = QuantErrorState::new(3);
        let (mut a, mut b) = (vec![], vec![]);
        for t in 0..5000u32 {
            let s: Vec<u32> = if t % 40 == 0 { vec![t % 3] } else { vec![] };
            qstep_error(&mut st, &s, &s, &p, 0, &mut a, &mut b);
            assert!(a.is_empty() && b.is_empty());
        }
        assert_eq!(st.v_pos, vec![0; 3]);
        // label without prediction: the positive neuron stays clamped at 0
        qstep_error(&mut st, &[], &[0], &p, 0, &mut a, &mut b);
        assert_eq!(st.v_pos[0], 0);
        assert_eq!(st.v_neg[0], 1024);
        // exact threshold fires and leaves zero
        let p = QuantParams { v_t_e: 1024, ..p };
        let mut st = QuantErrorState::new(1);
        qstep_error(&mut st, &[0], &[], &p, 0, &mut a, &mut b);
        assert_eq!(a, vec![0]);
        assert_eq!(st.v_pos[0], 0);
    }

    #[test]
    fn data_examples() {
        let rng = CounterRng::new(4);
        let steps = 100_000u64;
        let pixels = [0.0, 0.4, 0.8];
        let mut counts = [0u64; 3];
        for t in 0..steps {
            for k in qdata_spikes(&pixels, 25.0, &rng, t).unwrap() {
                counts[k as usize] += 1;
            }
        }
        assert_eq!(counts[0], 0);
        for (k, &d) in pixels.iter().enumerate().skip(1) {
            let q = 0.025 * d;
            let mean = steps as f64 * q;
            let sd = (steps as f64 * q * (1.0 - q)).sqrt();
            assert!(
                (counts[k] as f64 - mean).abs() < 4.0 * sd,
                "{k}: {} vs {mean}",
                counts[k]
            );
        }
        assert!(qdata_spikes(&[1.2], 25.0, &rng, 0).is_err());
    }

    #[test]
    fn init_within_bounds() {
        let s = QSynapses::uniform(784, 100, 512.0, &CounterRng::new(1), 0);
        let bound = (512.0 * (6.0f64 / 884.0).sqrt()) as i8;
        assert!(s.w.iter().all(|w| w.abs() <= bound));
        assert!(s.w.contains(&bound) && s.w.iter().any(|&w| w == -bound));
    }
}
