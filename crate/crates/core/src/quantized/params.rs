use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedpoint::{ShiftExp, STATE_MAX, STATE_MIN};
use crate::plasticity::QuantPlasticityConfig;

const fn s(v: i8) -> ShiftExp {
    ShiftExp::from_const(v)
}

/// Parameters of the fixed-point core. All couplings are power-of-two
/// shift exponents; thresholds and biases are 16-bit state values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantParams {
    /// Nominal duration of one step, used only to convert protocol times.
    pub dt_ms: f64,
    pub a_v: ShiftExp,
    pub a_u: ShiftExp,
    pub a_syn: ShiftExp,
    pub a_iv: ShiftExp,
    /// Leak of the error neurons.
    pub a_e: ShiftExp,
    pub g_u: ShiftExp,
    pub g_i: ShiftExp,
    pub g_e: ShiftExp,
    pub v_t: i32,
    pub v_reset: i32,
    pub b_v: i32,
    pub v_t_e: i32,
    /// Prediction/label weight onto error neurons.
    pub w_l: i32,
    /// Error-to-dendrite weight of prediction neurons (signed).
    pub w_e: i32,
    /// Error-to-dendrite weights of hidden neurons are drawn from
    /// `[-feedback_bound, feedback_bound]`.
    pub feedback_bound: i32,
    pub refr_steps: u32,
    pub data_refr_steps: u32,
    /// Data spike probability per step at full intensity, in units of 1/1000.
    pub data_rate: f64,
    pub p_blankout: f64,
    pub plasticity: QuantPlasticityConfig,
    /// Initial weights are `U(±init_scale * sqrt(6 / (rows + cols)))`,
    /// rounded and clipped to 8 bits.
    pub init_scale: f64,
}

impl Default for QuantParams {
    fn default() -> Self {
        Self {
            dt_ms: 250.0 / 1500.0,
            a_v: s(-3),
            a_u: s(-7),
            a_syn: s(-6),
            a_iv: s(4),
            a_e: s(-3),
            g_u: s(4),
            g_i: s(0),
            g_e: s(4),
            v_t: STATE_MAX,
            v_reset: STATE_MAX - 1,
            b_v: 1000,
            v_t_e: 1025,
            w_l: 64,
            w_e: -64,
            feedback_bound: 64,
            refr_steps: 39,
            data_refr_steps: 40,
            data_rate: 40.0,
            p_blankout: 0.6,
            plasticity: QuantPlasticityConfig {
                eta: s(-10),
                b_min: -2560,
                b_max: 2560,
                enabled: true,
            },
            init_scale: 512.0,
        }
    }
}

impl QuantParams {
    pub fn validate(&self) -> Result<()> {
        let state = |name: &str, v: i32| {
            if (STATE_MIN..=STATE_MAX).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{name} = {v} does not fit in 16 bits"
                )))
            }
        };
        state("v_t", self.v_t)?;
        state("v_reset", self.v_reset)?;
        state("b_v", self.b_v)?;
        state("v_t_e", self.v_t_e)?;
        if self.v_reset >= self.v_t {
            return Err(Error::Config("v_reset must be below v_t".into()));
        }
        if self.v_t_e <= 0 {
            return Err(Error::Config("v_t_e must be positive".into()));
        }
        for (name, w) in [
            ("w_l", self.w_l),
            ("w_e", self.w_e),
            ("feedback_bound", self.feedback_bound),
        ] {
            if !(-128..=127).contains(&w) {
                return Err(Error::Config(format!(
                    "{name} = {w} does not fit in 8 bits"
                )));
            }
        }
        if self.feedback_bound < 0 {
            return Err(Error::Config("feedback_bound must be >= 0".into()));
        }
        if !(self.p_blankout > 0.0 && self.p_blankout <= 1.0) {
            return Err(Error::Config(format!(
                "p_blankout must be in (0, 1], got {}",
                self.p_blankout
            )));
        }
        if !(0.0..=1000.0).contains(&self.data_rate) {
            return Err(Error::Config("data_rate must be in [0, 1000]".into()));
        }
        if !(self.dt_ms > 0.0) || !(self.init_scale >= 0.0) {
            return Err(Error::Config(
                "dt_ms must be > 0 and init_scale >= 0".into(),
            ));
        }
        self.plasticity.validate()
    }

    pub fn steps(&self, ms: f64) -> u64 {
        crate::continuous::params::steps_for(ms, self.dt_ms)
    }
}
