//! Run configuration: a flat `key = value` file whose keys mirror the
//! parameter tables, plus command-line overrides.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::continuous::ContinuousParams;
use crate::error::{Error, Result};
use crate::fixedpoint::ShiftExp;
use crate::quantized::QuantParams;
use crate::refnet::{Rule as DenseRule, SgdConfig};

use super::protocol::Timing;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Continuous,
    Quantized,
    Refnet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Erbp,
    Perbp,
    Bp,
    Rbp,
}

impl FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(Model::Continuous),
            "quantized" => Ok(Model::Quantized),
            "refnet" => Ok(Model::Refnet),
            _ => Err(Error::Config(format!("unknown model {s:?}"))),
        }
    }
}

impl FromStr for Rule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "erbp" => Ok(Rule::Erbp),
            "perbp" => Ok(Rule::Perbp),
            "bp" => Ok(Rule::Bp),
            "rbp" => Ok(Rule::Rbp),
            _ => Err(Error::Config(format!("unknown rule {s:?}"))),
        }
    }
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Continuous => "continuous",
            Model::Quantized => "quantized",
            Model::Refnet => "refnet",
        }
    }

    fn default_rule(self) -> Rule {
        match self {
            Model::Continuous => Rule::Erbp,
            Model::Quantized => Rule::Perbp,
            Model::Refnet => Rule::Rbp,
        }
    }
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Erbp => "erbp",
            Rule::Perbp => "perbp",
            Rule::Bp => "bp",
            Rule::Rbp => "rbp",
        }
    }
}

pub fn parse_arch(s: &str) -> Result<Vec<usize>> {
    let dims: Vec<usize> = s
        .split('-')
        .map(|d| {
            d.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad architecture {s:?}")))
        })
        .collect::<Result<_>>()?;
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::Config(format!(
            "architecture needs at least two non-empty layers, got {s:?}"
        )));
    }
    Ok(dims)
}

pub fn format_arch(dims: &[usize]) -> String {
    dims.iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("-")
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: Model,
    pub rule: Rule,
    pub arch: Vec<usize>,
    pub seed: u64,
    pub epochs: usize,
    /// Use only the first `n` training samples.
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    pub timing: Timing,
    pub eval_threads: usize,
    pub spike_log: bool,
    /// Longest first-spike decision evaluated.
    pub first_spike_k: usize,
    /// Uniform-noise prestimulus before each first-spike sample.
    pub t_random_ms: f64,
    pub continuous: ContinuousParams,
    pub quantized: QuantParams,
    pub lr: f64,
    pub batch: usize,
}

enum Field<'a> {
    F64(&'a mut f64),
    U64(&'a mut u64),
    Usize(&'a mut usize),
    OptUsize(&'a mut Option<usize>),
    I32(&'a mut i32),
    U32(&'a mut u32),
    Shift(&'a mut ShiftExp),
    Bool(&'a mut bool),
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("bad value {v:?} for key {key}")))
}

impl Field<'_> {
    fn set(self, key: &str, v: &str) -> Result<()> {
        match self {
            Field::F64(x) => *x = parse(key, v)?,
            Field::U64(x) => *x = parse(key, v)?,
            Field::Usize(x) => *x = parse(key, v)?,
            Field::OptUsize(x) => {
                *x = if v == "all" {
                    None
                } else {
                    Some(parse(key, v)?)
                }
            }
            Field::I32(x) => *x = parse(key, v)?,
            Field::U32(x) => *x = parse(key, v)?,
            Field::Shift(x) => *x = ShiftExp::new(parse(key, v)?)?,
            Field::Bool(x) => *x = parse(key, v)?,
        }
        Ok(())
    }

    fn show(&self) -> String {
        match self {
            Field::F64(x) => format!("{x:?}"),
            Field::U64(x) => x.to_string(),
            Field::Usize(x) => x.to_string(),
            Field::OptUsize(x) => x.map_or("all".into(), |n| n.to_string()),
            Field::I32(x) => x.to_string(),
            Field::U32(x) => x.to_string(),
            Field::Shift(x) => x.get().to_string(),
            Field::Bool(x) => x.to_string(),
        }
    }
}

impl RunConfig {
    pub fn new(model: Model, rule: Rule) -> Result<Self> {
        let ok = match model {
            Model::Refnet => matches!(rule, Rule::Bp | Rule::Rbp),
            _ => matches!(rule, Rule::Erbp | Rule::Perbp),
        };
        if !ok {
            return Err(Error::Config(format!(
                "rule {} does not apply to model {}",
                rule.name(),
                model.name()
            )));
        }
        let continuous = match rule {
            Rule::Perbp => ContinuousParams::perbp(),
            _ => ContinuousParams::erbp(),
        };
        let quantized = match rule {
            Rule::Erbp => QuantParams {
                p_blankout: 1.0,
                ..QuantParams::default()
            },
            _ => QuantParams::default(),
        };
        let arch = vec![784, 100, 10];
        let dense_rule = if rule == Rule::Bp {
            DenseRule::Bp
        } else {
            DenseRule::Rbp
        };
        let sgd = SgdConfig::for_arch(dense_rule, &arch);
        Ok(Self {
            model,
            rule,
            arch,
            seed: 1,
            epochs: if model == Model::Refnet { 10 } else { 2 },
            n_train: None,
            n_test: None,
            timing: Timing::default(),
            eval_threads: 1,
            spike_log: false,
            first_spike_k: 10,
            t_random_ms: 100.0,
            continuous,
            quantized,
            lr: sgd.lr,
            batch: sgd.batch,
        })
    }

    fn fields(&mut self) -> Vec<(&'static str, Field<'_>)> {
        let c = &mut self.continuous;
        let q = &mut self.quantized;
        vec![
            ("seed", Field::U64(&mut self.seed)),
            ("epochs", Field::Usize(&mut self.epochs)),
            ("n_train", Field::OptUsize(&mut self.n_train)),
            ("n_test", Field::OptUsize(&mut self.n_test)),
            ("t_train_ms", Field::F64(&mut self.timing.t_train_ms)),
            ("t_gate_ms", Field::F64(&mut self.timing.t_gate_ms)),
            ("t_test_ms", Field::F64(&mut self.timing.t_test_ms)),
            ("eval_threads", Field::Usize(&mut self.eval_threads)),
            ("spike_log", Field::Bool(&mut self.spike_log)),
            ("first_spike_k", Field::Usize(&mut self.first_spike_k)),
            ("t_random_ms", Field::F64(&mut self.t_random_ms)),
            ("dt_ms", Field::F64(&mut c.dt_ms)),
            ("c_pf", Field::F64(&mut c.neuron.c_pf)),
            ("g_v_ns", Field::F64(&mut c.neuron.g_v_ns)),
            ("g_u_ns", Field::F64(&mut c.neuron.g_u_ns)),
            ("v_t_mv", Field::F64(&mut c.neuron.v_t_mv)),
            ("tau_refr_ms", Field::F64(&mut c.neuron.tau_refr_ms)),
            ("tau_syn_ms", Field::F64(&mut c.neuron.tau_syn_ms)),
            ("sigma_w_na", Field::F64(&mut c.noise.sigma_w_na)),
            ("bg_rate_hz", Field::F64(&mut c.noise.bg_rate_hz)),
            ("p_blankout", Field::F64(&mut c.noise.p_blankout)),
            ("beta", Field::F64(&mut c.encoder.beta)),
            ("gamma", Field::F64(&mut c.encoder.gamma)),
            ("tau_refr_data_ms", Field::F64(&mut c.encoder.tau_refr_ms)),
            ("eta", Field::F64(&mut c.plasticity.eta)),
            ("b_min", Field::F64(&mut c.plasticity.b_min)),
            ("b_max", Field::F64(&mut c.plasticity.b_max)),
            ("plasticity", Field::Bool(&mut c.plasticity.enabled)),
            ("w_e_na", Field::F64(&mut c.w_e_na)),
            ("w_l_na", Field::F64(&mut c.w_l_na)),
            ("v_t_e_mv", Field::F64(&mut c.v_t_e_mv)),
            ("init_scale", Field::F64(&mut c.init_scale)),
            (
                "error_bias_mv_per_ms",
                Field::F64(&mut c.error_bias_mv_per_ms),
            ),
            ("q.dt_ms", Field::F64(&mut q.dt_ms)),
            ("q.a_v", Field::Shift(&mut q.a_v)),
            ("q.a_u", Field::Shift(&mut q.a_u)),
            ("q.a_syn", Field::Shift(&mut q.a_syn)),
            ("q.a_iv", Field::Shift(&mut q.a_iv)),
            ("q.a_e", Field::Shift(&mut q.a_e)),
            ("q.g_u", Field::Shift(&mut q.g_u)),
            ("q.g_i", Field::Shift(&mut q.g_i)),
            ("q.g_e", Field::Shift(&mut q.g_e)),
            ("q.v_t", Field::I32(&mut q.v_t)),
            ("q.v_reset", Field::I32(&mut q.v_reset)),
            ("q.b_v", Field::I32(&mut q.b_v)),
            ("q.v_t_e", Field::I32(&mut q.v_t_e)),
            ("q.w_l", Field::I32(&mut q.w_l)),
            ("q.w_e", Field::I32(&mut q.w_e)),
            ("q.feedback_bound", Field::I32(&mut q.feedback_bound)),
            ("q.tau_refr", Field::U32(&mut q.refr_steps)),
            ("q.tau_refr_data", Field::U32(&mut q.data_refr_steps)),
            ("q.beta", Field::F64(&mut q.data_rate)),
            ("q.p_blankout", Field::F64(&mut q.p_blankout)),
            ("q.eta", Field::Shift(&mut q.plasticity.eta)),
            ("q.b_min", Field::I32(&mut q.plasticity.b_min)),
            ("q.b_max", Field::I32(&mut q.plasticity.b_max)),
            ("q.plasticity", Field::Bool(&mut q.plasticity.enabled)),
            ("q.init_scale", Field::F64(&mut q.init_scale)),
            ("lr", Field::F64(&mut self.lr)),
            ("batch", Field::Usize(&mut self.batch)),
        ]
    }

    /// Every recognised key except `model`, `rule` and `arch`.
    pub fn keys() -> Vec<&'static str> {
        let mut c = Self::new(Model::Continuous, Rule::Erbp).unwrap();
        c.fields().into_iter().map(|(k, _)| k).collect()
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if key == "arch" {
            self.arch = parse_arch(value)?;
            return Ok(());
        }
        let field = self
            .fields()
            .into_iter()
            .find(|(k, _)| *k == key)
            .map(|(_, f)| f);
        match field {
            Some(f) => f.set(key, value),
            None => Err(Error::Config(format!("unknown key {key:?}"))),
        }
    }

    /// Build a configuration from `key = value` pairs applied in order.
    ///
    /// `model` and `rule` are resolved first, since they select the
    /// defaults every other key overrides.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let last = |k: &str| {
            pairs
                .iter()
                .rev()
                .find(|(key, _)| key == k)
                .map(|(_, v)| v.as_str())
        };
        let model: Model = last("model").unwrap_or("continuous").parse()?;
        let rule = match last("rule") {
            Some(r) => r.parse()?,
            None => model.default_rule(),
        };
        let mut cfg = Self::new(model, rule)?;
        for (k, v) in pairs {
            if k != "model" && k != "rule" {
                cfg.set(k, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let mut pairs = parse_pairs(&std::fs::read_to_string(path)?)?;
        pairs.extend_from_slice(overrides);
        Self::from_pairs(&pairs)
    }

    /// Every key with its resolved value, readable by [`RunConfig::from_text`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "model = {}", self.model.name());
        let _ = writeln!(out, "rule = {}", self.rule.name());
        let _ = writeln!(out, "arch = {}", format_arch(&self.arch));
        let mut me = self.clone();
        for (k, f) in me.fields() {
            let _ = writeln!(out, "{k} = {}", f.show());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if *self.arch.last().unwrap() != 10 || self.arch[0] != 784 {
            return Err(Error::Config(format!(
                "MNIST networks start with 784 inputs and end with 10 classes, got {}",
                format_arch(&self.arch)
            )));
        }
        let t = &self.timing;
        if !(t.t_gate_ms >= 0.0 && t.t_gate_ms < t.t_train_ms) || !(t.t_test_ms > 0.0) {
            return Err(Error::Config(
                "need 0 <= t_gate_ms < t_train_ms and t_test_ms > 0".into(),
            ));
        }
        if self.eval_threads == 0 || self.batch == 0 {
            return Err(Error::Config("eval_threads and batch must be >= 1".into()));
        }
        match self.model {
            Model::Continuous => self.continuous.validate(),
            Model::Quantized => self.quantized.validate(),
            Model::Refnet => Ok(()),
        }
    }

    pub fn sgd(&self) -> SgdConfig {
        let rule = if self.rule == Rule::Bp {
            DenseRule::Bp
        } else {
            DenseRule::Rbp
        };
        SgdConfig {
            lr: self.lr,
            batch: self.batch,
            epochs: self.epochs,
            seed: self.seed,
            ..SgdConfig::for_arch(rule, &self.arch)
        }
    }
}

/// Split `key = value` lines. `#` starts a comment; blank lines are ignored.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "line {}: expected key = value, got {line:?}",
                n + 1
            ))
        })?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(items: &[(&str, &str)]) -> Vec<(String, String)> {
        items
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn defaults_follow_rule() {
        let e = RunConfig::new(Model::Continuous, Rule::Erbp).unwrap();
        assert_eq!(e.continuous.noise.sigma_w_na, 50e-3);
        assert_eq!(e.continuous.noise.p_blankout, 1.0);
        let p = RunConfig::new(Model::Continuous, Rule::Perbp).unwrap();
        assert_eq!(p.continuous.noise.sigma_w_na, 0.0);
        assert_eq!(p.continuous.noise.p_blankout, 0.65);
        assert_eq!(
            e.timing,
            Timing {
                t_train_ms: 250.0,
                t_gate_ms: 50.0,
                t_test_ms: 500.0
            }
        );
        assert!(RunConfig::new(Model::Refnet, Rule::Erbp).is_err());
        assert!(RunConfig::new(Model::Quantized, Rule::Bp).is_err());
    }

    #[test]
    fn text_round_trip() {
        let text = "model = quantized\n# comment\narch = 784-50-10\nq.eta = -9\nn_train = 500\n\nseed = 7 # trailing\n";
        let cfg = RunConfig::from_text(text).unwrap();
        assert_eq!(cfg.arch, vec![784, 50, 10]);
        assert_eq!(cfg.quantized.plasticity.eta.get(), -9);
        assert_eq!(cfg.n_train, Some(500));
        assert_eq!(cfg.seed, 7);
        assert_eq!(RunConfig::from_text(&cfg.to_text()).unwrap(), cfg);
        for model in [Model::Continuous, Model::Refnet] {
            let c = RunConfig::new(model, model.default_rule()).unwrap();
            assert_eq!(RunConfig::from_text(&c.to_text()).unwrap(), c);
        }
    }

    #[test]
    fn later_values_override_and_rule_applies_first() {
        let cfg = RunConfig::from_pairs(&pairs(&[
            ("sigma_w_na", "0.01"),
            ("rule", "perbp"),
            ("eta", "1e-5"),
            ("eta", "2e-5"),
        ]))
        .unwrap();
        assert_eq!(cfg.rule, Rule::Perbp);
        assert_eq!(cfg.continuous.noise.sigma_w_na, 0.01);
        assert_eq!(cfg.continuous.plasticity.eta, 2e-5);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::from_text("bogus = 1").is_err());
        assert!(RunConfig::from_text("seed").is_err());
        assert!(RunConfig::from_text("seed = x").is_err());
        assert!(RunConfig::from_text("arch = 784-100-9").is_err());
        assert!(RunConfig::from_text("t_gate_ms = 300").is_err());
        assert!(RunConfig::from_text("model = quantized\nq.eta = 40").is_err());
        assert!(RunConfig::from_text("model = quantized\nq.v_reset = 32767").is_err());
        assert!(parse_arch("784--10").is_err());
    }

    #[test]
    fn every_key_is_settable() {
        let cfg = RunConfig::new(Model::Continuous, Rule::Erbp).unwrap();
        let text = cfg.to_text();
        for k in RunConfig::keys() {
            assert!(
                text.lines().any(|l| l.starts_with(&format!("{k} = "))),
                "{k}"
            );
        }
    }
}
