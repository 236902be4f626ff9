use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plasticity::PlasticityConfig;

/// Two-compartment leaky integrate-and-fire parameters.
///
/// Units: pF, nS, mV, ms. With these units `C dV/dt = -g V + 1000 I` for a
/// current `I` in nA.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronParams {
    pub c_pf: f64,
    pub g_v_ns: f64,
    pub g_u_ns: f64,
    pub v_t_mv: f64,
    pub tau_refr_ms: f64,
    pub tau_syn_ms: f64,
}

impl Default for NeuronParams {
    fn default() -> Self {
        Self {
            c_pf: 1.0,
            g_v_ns: 1.0,
            g_u_ns: 5.0,
            v_t_mv: 100.0,
            tau_refr_ms: 3.9,
            tau_syn_ms: 4.0,
        }
    }
}

impl NeuronParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("c_pf", self.c_pf),
            ("g_v_ns", self.g_v_ns),
            ("g_u_ns", self.g_u_ns),
            ("v_t_mv", self.v_t_mv),
            ("tau_refr_ms", self.tau_refr_ms),
            ("tau_syn_ms", self.tau_syn_ms),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Membrane time constant `C / g_V` in ms.
    pub fn tau_m_ms(&self) -> f64 {
        self.c_pf / self.g_v_ns
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Amplitude of each background Poisson event (nA).
    pub sigma_w_na: f64,
    /// Background Poisson rate (Hz).
    pub bg_rate_hz: f64,
    /// Probability that a presynaptic spike is transmitted.
    pub p_blankout: f64,
}

impl NoiseParams {
    pub fn erbp() -> Self {
        Self {
            sigma_w_na: 50e-3,
            bg_rate_hz: 1000.0,
            p_blankout: 1.0,
        }
    }

    pub fn perbp() -> Self {
        Self {
            sigma_w_na: 0.0,
            bg_rate_hz: 1000.0,
            p_blankout: 0.65,
        }
    }

    pub fn silent() -> Self {
        Self {
            sigma_w_na: 0.0,
            bg_rate_hz: 0.0,
            p_blankout: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_blankout > 0.0 && self.p_blankout <= 1.0) {
            return Err(Error::Config(format!(
                "p_blankout must be in (0, 1], got {}",
                self.p_blankout
            )));
        }
        if !(self.sigma_w_na >= 0.0) || !(self.bg_rate_hz >= 0.0) {
            return Err(Error::Config(
                "noise amplitude and rate must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Exponential-hazard data encoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataEncoderParams {
    pub beta: f64,
    pub gamma: f64,
    pub tau_refr_ms: f64,
}

impl Default for DataEncoderParams {
    fn default() -> Self {
        Self {
            beta: 5.0,
            gamma: -3.0,
            tau_refr_ms: 4.0,
        }
    }
}

impl DataEncoderParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_refr_ms > 0.0) {
            return Err(Error::Config("data refractory period must be > 0".into()));
        }
        Ok(())
    }
}

/// Everything needed to build a continuous-time network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousParams {
    pub dt_ms: f64,
    pub neuron: NeuronParams,
    pub noise: NoiseParams,
    pub encoder: DataEncoderParams,
    pub plasticity: PlasticityConfig,
    /// Error-to-dendrite weight of prediction neurons (nA, signed).
    /// Negative so that positive-error spikes push the dendrite down.
    pub w_e_na: f64,
    /// Prediction/label weight onto error neurons (nA).
    pub w_l_na: f64,
    pub v_t_e_mv: f64,
    /// Initial weights are `U(±sqrt(init_scale / (rows + cols)))`.
    pub init_scale: f64,
    /// Constant decrement (mV per ms) applied to error neurons while no
    /// label is shown. Zero disables the variant.
    pub error_bias_mv_per_ms: f64,
}

impl Default for ContinuousParams {
    fn default() -> Self {
        Self::erbp()
    }
}

impl ContinuousParams {
    pub fn erbp() -> Self {
        Self {
            dt_ms: 0.1,
            neuron: NeuronParams::default(),
            noise: NoiseParams::erbp(),
            encoder: DataEncoderParams::default(),
            plasticity: PlasticityConfig {
                eta: 1e-5,
                b_min: -1.15,
                b_max: 1.15,
                enabled: true,
            },
            w_e_na: -90e-3,
            w_l_na: 90e-3,
            v_t_e_mv: 100.0,
            init_scale: 3.0,
            error_bias_mv_per_ms: 0.0,
        }
    }

    pub fn perbp() -> Self {
        Self {
            noise: NoiseParams::perbp(),
            ..Self::erbp()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_ms > 0.0) {
            return Err(Error::Config(format!("dt must be > 0, got {}", self.dt_ms)));
        }
        self.neuron.validate()?;
        self.noise.validate()?;
        self.encoder.validate()?;
        self.plasticity.validate()?;
        if !(self.v_t_e_mv > 0.0) || !(self.init_scale > 0.0) {
            return Err(Error::Config(
                "error threshold and init scale must be > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn refr_steps(&self) -> u64 {
        steps_for(self.neuron.tau_refr_ms, self.dt_ms)
    }

    pub fn data_refr_steps(&self) -> u64 {
        steps_for(self.encoder.tau_refr_ms, self.dt_ms)
    }

    pub fn steps(&self, ms: f64) -> u64 {
        steps_for(ms, self.dt_ms)
    }
}

pub fn steps_for(ms: f64, dt_ms: f64) -> u64 {
    (ms / dt_ms).round().max(0.0) as u64
}
