//! Dense rate-based reference network trained with backpropagation or
//! direct random backpropagation.

use std::io::Write;

use ndarray::{Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{permutation, CounterRng, Stream};

/// Hard-saturating linear activation.
#[inline]
pub fn phi(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Derivative of [`phi`], zero at the corners.
#[inline]
pub fn phi_prime(x: f64) -> f64 {
    gate(x, EXACT_GATE)
}

/// Open interval of pre-activations through which errors propagate.
pub type Gate = (f64, f64);

pub const EXACT_GATE: Gate = (0.0, 1.0);

/// Training gate: the derivative window of the spiking boxcar, which
/// stays open below the firing onset.
pub const BOXCAR_GATE: Gate = (-1.0, 1.0);

#[inline]
pub fn gate(x: f64, (lo, hi): Gate) -> f64 {
    if lo < x && x < hi {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Bp,
    Rbp,
}

impl std::str::FromStr for Rule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bp" => Ok(Rule::Bp),
            "rbp" => Ok(Rule::Rbp),
            _ => Err(Error::Config(format!("unknown dense rule {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    pub dims: Vec<usize>,
    /// `w[l]` maps layer `l` to layer `l + 1`, shape `(out, in)`.
    pub w: Vec<Array2<f64>>,
    /// `g[l]` projects the output error onto hidden layer `l + 1`, shape
    /// `(hidden, classes)`. Fixed after construction.
    pub g: Vec<Array2<f64>>,
}

/// Activations of a batch, one row per sample. `post[0]` is the input.
#[derive(Debug, Clone)]
pub struct Forward {
    pub pre: Vec<Array2<f64>>,
    pub post: Vec<Array2<f64>>,
}

impl Forward {
    pub fn output(&self) -> &Array2<f64> {
        self.post.last().unwrap()
    }
}

pub fn init_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

impl DenseNet {
    pub fn new(dims: &[usize], seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Config(format!("invalid architecture {dims:?}")));
        }
        let rng = CounterRng::new(seed);
        let classes = *dims.last().unwrap();
        let w = dims
            .windows(2)
            .enumerate()
            .map(|(l, d)| {
                let b = init_bound(d[0], d[1]);
                Array2::from_shape_fn((d[1], d[0]), |(o, i)| {
                    rng.symmetric(Stream::Init, 1000 + l as u64, (o * d[0] + i) as u64, b)
                })
            })
            .collect();
        let g = dims[1..dims.len() - 1]
            .iter()
            .enumerate()
            .map(|(l, &h)| {
                let b = init_bound(h, classes);
                Array2::from_shape_fn((h, classes), |(i, k)| {
                    rng.symmetric(
                        Stream::Feedback,
                        1000 + l as u64,
                        (i * classes + k) as u64,
                        b,
                    )
                })
            })
            .collect();
        Ok(Self {
            dims: dims.to_vec(),
            w,
            g,
        })
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Forward> {
        if x.ncols() != self.dims[0] {
            return Err(Error::Shape(format!(
                "input has {} columns, network expects {}",
                x.ncols(),
                self.dims[0]
            )));
        }
        let mut pre = Vec::with_capacity(self.w.len());
        let mut post = vec![x.to_owned()];
        for w in &self.w {
            let a = post.last().unwrap().dot(&w.t());
            post.push(a.mapv(phi));
            pre.push(a);
        }
        Ok(Forward { pre, post })
    }

    /// Output minus one-hot target, one row per sample.
    pub fn errors(&self, fwd: &Forward, labels: &[usize]) -> Result<Array2<f64>> {
        let y = fwd.output();
        if labels.len() != y.nrows() {
            return Err(Error::Shape(format!(
                "{} labels for {} samples",
                labels.len(),
                y.nrows()
            )));
        }
        let mut e = y.clone();
        for (mut row, &l) in e.axis_iter_mut(Axis(0)).zip(labels) {
            if l >= row.len() {
                return Err(Error::Config(format!("label {l} out of range")));
            }
            row[l] -= 1.0;
        }
        Ok(e)
    }

    /// `sum_k e_k^2 / 2`, averaged over the batch.
    pub fn loss(&self, x: ArrayView2<f64>, labels: &[usize]) -> Result<f64> {
        let fwd = self.forward(x)?;
        let e = self.errors(&fwd, labels)?;
        Ok(0.5 * e.mapv(|v| v * v).sum() / labels.len() as f64)
    }

    /// Exact gradients of the batch-mean loss with respect to every weight.
    pub fn bp_grads(&self, fwd: &Forward, labels: &[usize]) -> Result<Vec<Array2<f64>>> {
        self.grads(Rule::Bp, fwd, labels, EXACT_GATE)
    }

    /// Direct random backpropagation: each hidden layer receives the raw
    /// output error through its fixed matrix `g`.
    pub fn rbp_grads(&self, fwd: &Forward, labels: &[usize]) -> Result<Vec<Array2<f64>>> {
        self.grads(Rule::Rbp, fwd, labels, EXACT_GATE)
    }

    /// Updates of either rule with the derivative replaced by `g`.
    pub fn grads(
        &self,
        rule: Rule,
        fwd: &Forward,
        labels: &[usize],
        g: Gate,
    ) -> Result<Vec<Array2<f64>>> {
        let e = self.errors(fwd, labels)?;
        let n = labels.len() as f64;
        let d = |a: &Array2<f64>| a.mapv(|x| gate(x, g));
        let top = self.w.len() - 1;
        let mut grads = vec![Array2::zeros((0, 0)); self.w.len()];
        let mut delta = &e * &d(&fwd.pre[top]);
        for l in (0..=top).rev() {
            grads[l] = delta.t().dot(&fwd.post[l]) / n;
            if l > 0 {
                delta = match rule {
                    Rule::Bp => delta.dot(&self.w[l]),
                    Rule::Rbp => e.dot(&self.g[l - 1].t()),
                } * d(&fwd.pre[l - 1]);
            }
        }
        Ok(grads)
    }

    pub fn apply(&mut self, grads: &[Array2<f64>], lr: f64) {
        for (w, g) in self.w.iter_mut().zip(grads) {
            Zip::from(w).and(g).for_each(|w, &g| *w -= lr * g);
        }
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        let fwd = self.forward(x)?;
        Ok(fwd
            .output()
            .axis_iter(Axis(0))
            .map(|r| argmax(r.as_slice().unwrap()))
            .collect())
    }

    /// Fraction of misclassified samples.
    pub fn error_rate(&self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Ok(0.0);
        }
        let mut wrong = 0usize;
        for start in (0..data.len()).step_by(1000) {
            let idx: Vec<usize> = (start..(start + 1000).min(data.len())).collect();
            let (x, labels) = batch(data, &idx);
            let pred = self.predict(x.view())?;
            wrong += pred.iter().zip(&labels).filter(|(p, l)| p != l).count();
        }
        Ok(wrong as f64 / data.len() as f64)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = k;
        }
    }
    best
}

/// Gather samples into an input matrix and a label list.
pub fn batch(data: &Dataset, idx: &[usize]) -> (Array2<f64>, Vec<usize>) {
    let cols = data.image_bytes(0).len();
    let mut x = Array2::zeros((idx.len(), cols));
    for (mut row, &i) in x.axis_iter_mut(Axis(0)).zip(idx) {
        for (r, &b) in row.iter_mut().zip(data.image_bytes(i)) {
            *r = b as f64 / 255.0;
        }
    }
    (x, idx.iter().map(|&i| data.label(i)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub rule: Rule,
    /// Step size on the mean squared error over samples and outputs.
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
    pub gate: Gate,
}

impl SgdConfig {
    /// Learning rate 0.4 for one hidden layer, 0.5 for deeper networks.
    pub fn for_arch(rule: Rule, dims: &[usize]) -> Self {
        let lr = if dims.len() <= 3 { 0.4 } else { 0.5 };
        Self {
            rule,
            lr,
            batch: 100,
            epochs: 10,
            seed: 1,
            gate: BOXCAR_GATE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_error: f64,
    pub test_error: Option<f64>,
}

/// Called after each minibatch with the network and the batch.
pub type BatchHook<'a> = &'a mut dyn FnMut(&DenseNet, ArrayView2<f64>, &[usize]);

/// Minibatch SGD over shuffled epochs. `hook` sees the network before each
/// update.
pub fn sgd_train(
    net: &mut DenseNet,
    train: &Dataset,
    test: Option<&Dataset>,
    cfg: &SgdConfig,
    mut hook: Option<BatchHook>,
) -> Result<Vec<EpochRecord>> {
    if cfg.batch == 0 {
        return Err(Error::Config("batch size must be > 0".into()));
    }
    let rng = CounterRng::new(cfg.seed);
    let classes = *net.dims.last().unwrap() as f64;
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let order = permutation(&rng, train.len(), epoch as u64);
        let mut loss = 0.0;
        let mut wrong = 0usize;
        for chunk in order.chunks(cfg.batch) {
            let (x, labels) = batch(train, chunk);
            if let Some(h) = hook.as_mut() {
                h(net, x.view(), &labels);
            }
            let fwd = net.forward(x.view())?;
            let e = net.errors(&fwd, &labels)?;
            loss += 0.5 * e.mapv(|v| v * v).sum();
            wrong += fwd
                .output()
                .axis_iter(Axis(0))
                .zip(&labels)
                .filter(|(r, &l)| argmax(r.as_slice().unwrap()) != l)
                .count();
            let grads = net.grads(cfg.rule, &fwd, &labels, cfg.gate)?;
            // d/dw of mean_k e_k^2 is 2 / K times the gradient of sum_k e_k^2 / 2
            net.apply(&grads, cfg.lr * 2.0 / classes);
        }
        let n = train.len().max(1) as f64;
        curve.push(EpochRecord {
            epoch,
            train_loss: loss / n,
            train_error: wrong as f64 / n,
            test_error: test.map(|t| net.error_rate(t)).transpose()?,
        });
    }
    Ok(curve)
}

pub fn write_curve_csv<W: Write>(mut out: W, curve: &[EpochRecord]) -> Result<()> {
    writeln!(out, "epoch,train_loss,train_error,test_error")?;
    for r in curve {
        let test = r.test_error.map(|t| t.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{}",
            r.epoch, r.train_loss, r.train_error, test
        )?;
    }
    Ok(())
}

/// Dot product between the RBP update of hidden layer `l`, taken through
/// `g`, and the exact BP gradient.
pub fn hidden_alignment(
    net: &DenseNet,
    x: ArrayView2<f64>,
    labels: &[usize],
    l: usize,
    g: Gate,
) -> Result<f64> {
    if l + 1 >= net.w.len() {
        return Err(Error::Config(format!("layer {l} is not hidden")));
    }
    let fwd = net.forward(x)?;
    let bp = net.bp_grads(&fwd, labels)?;
    let rbp = net.grads(Rule::Rbp, &fwd, labels, g)?;
    Ok((&bp[l] * &rbp[l]).sum())
}

/// Set every feedback matrix to the transpose of the next forward matrix.
pub fn transpose_feedback(net: &mut DenseNet) {
    for l in 0..net.g.len() {
        net.g[l] = net.w[l + 1].t().to_owned();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_input(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let rng = CounterRng::new(seed);
        Array2::from_shape_fn((n, d), |(i, j)| {
            rng.uniform(Stream::Probe, i as u64, j as u64)
        })
    }

    #[test]
    fn activation() {
        assert_eq!(phi(0.5), 0.5);
        assert_eq!(phi(-1.0), 0.0);
        assert_eq!(phi(2.0), 1.0);
        assert_eq!(phi_prime(0.0), 0.0);
        assert_eq!(phi_prime(1.0), 0.0);
        assert_eq!(phi_prime(0.3), 1.0);
    }

    #[test]
    fn identity_layer_passes_input() {
        let mut net = DenseNet::new(&[4, 4], 1).unwrap();
        net.w[0] = Array2::eye(4);
        let x = rand_input(3, 4, 2);
        let fwd = net.forward(x.view()).unwrap();
        assert_eq!(fwd.output(), &x);
        assert!(net.forward(rand_input(1, 5, 0).view()).is_err());
    }

    #[test]
    fn forward_matches_loops() {
        let net = DenseNet::new(&[7, 5, 3], 3).unwrap();
        let x = rand_input(4, 7, 4);
        let fwd = net.forward(x.view()).unwrap();
        for n in 0..4 {
            let mut h = [0.0; 5];
            for (i, hi) in h.iter_mut().enumerate() {
                let a: f64 = (0..7).map(|j| net.w[0][[i, j]] * x[[n, j]]).sum();
                *hi = a.clamp(0.0, 1.0);
            }
            for k in 0..3 {
                let a: f64 = (0..5).map(|i| net.w[1][[k, i]] * h[i]).sum();
                assert!((fwd.output()[[n, k]] - a.clamp(0.0, 1.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_error_gives_zero_gradients() {
        let mut net = DenseNet::new(&[3, 2], 1).unwrap();
        net.w[0] = Array2::zeros((2, 3));
        net.w[0][[1, 0]] = 1.0;
        let x = Array2::from_shape_vec((1, 3), vec![1.0, 0.0, 0.0]).unwrap();
        let fwd = net.forward(x.view()).unwrap();
        for g in net.bp_grads(&fwd, &[1]).unwrap() {
            assert!(g.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn single_layer_gradient_is_local_rule() {
        let net = DenseNet::new(&[6, 3], 5).unwrap();
        let x = rand_input(1, 6, 6);
        let fwd = net.forward(x.view()).unwrap();
        let g = &net.bp_grads(&fwd, &[2]).unwrap()[0];
        let e = net.errors(&fwd, &[2]).unwrap();
        for i in 0..3 {
            for j in 0..6 {
                let local = phi_prime(fwd.pre[0][[0, i]]) * e[[0, i]] * x[[0, j]];
                assert!((g[[i, j]] - local).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rbp_with_transposed_feedback_is_bp_when_output_is_linear() {
        let mut net = DenseNet::new(&[8, 6, 3], 7).unwrap();
        // keep the output pre-activations inside (0, 1)
        net.w[1].mapv_inplace(|v| 0.05 * v.abs() + 0.01);
        transpose_feedback(&mut net);
        let x = rand_input(5, 8, 8);
        let fwd = net.forward(x.view()).unwrap();
        assert!(fwd.pre[1].iter().all(|&a| 0.0 < a && a < 1.0));
        let labels = [0, 1, 2, 0, 1];
        let bp = net.bp_grads(&fwd, &labels).unwrap();
        let rbp = net.rbp_grads(&fwd, &labels).unwrap();
        for (a, b) in bp.iter().zip(&rbp) {
            assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-14));
        }
    }

    #[test]
    fn zero_learning_rate_freezes() {
        let data = tiny_dataset(50);
        let mut net = DenseNet::new(&[784, 10, 10], 1).unwrap();
        let before = net.clone();
        let cfg = SgdConfig {
            lr: 0.0,
            epochs: 2,
            ..SgdConfig::for_arch(Rule::Bp, &net.dims)
        };
        sgd_train(&mut net, &data, None, &cfg, None).unwrap();
        assert_eq!(net, before);
    }

    fn tiny_dataset(n: usize) -> Dataset {
        let rng = CounterRng::new(9);
        let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
        let images: Vec<u8> = (0..n * 784)
            .map(|k| {
                let (i, p) = (k / 784, k % 784);
                let on = p / 78 == labels[i] as usize;
                if on {
                    200
                } else {
                    (rng.draw(Stream::Probe, i as u64, p as u64) % 40) as u8
                }
            })
            .collect();
        Dataset::new(crate::data::Split::Train, images, labels).unwrap()
    }

    #[test]
    fn learns_a_separable_toy_problem() {
        let data = tiny_dataset(200);
        for rule in [Rule::Bp, Rule::Rbp] {
            let mut net = DenseNet::new(&[784, 20, 10], 2).unwrap();
            let cfg = SgdConfig {
                epochs: 20,
                batch: 20,
                lr: 0.1,
                ..SgdConfig::for_arch(rule, &net.dims)
            };
            let curve = sgd_train(&mut net, &data, Some(&data), &cfg, None).unwrap();
            assert!(
                curve.last().unwrap().test_error.unwrap() < 0.05,
                "{rule:?}: {curve:?}"
            );
            assert!(curve.last().unwrap().train_loss < curve[0].train_loss);
        }
    }

    #[test]
    fn curve_csv() {
        let r = EpochRecord {
            epoch: 0,
            train_loss: 0.5,
            train_error: 0.25,
            test_error: None,
        };
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &[r]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "epoch,train_loss,train_error,test_error\n0,0.5,0.25,\n"
        );
    }
}
