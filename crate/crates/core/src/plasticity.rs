//! The event-driven random backpropagation weight update.
//!
//! On every presynaptic spike the weight moves by the postsynaptic
//! dendritic potential `U`, but only while the total synaptic current `I`
//! lies strictly inside the boxcar `(b_min, b_max)`. Per presynaptic spike
//! this is two comparisons and one addition (plus one shift in the
//! fixed-point variant).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedpoint::{clip_weight, diamond, ShiftExp};

/// Update rule parameters for the floating-point network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlasticityConfig {
    /// Learning rate (weight units per mV of dendritic potential).
    pub eta: f64,
    /// Boxcar bounds on the total synaptic current (nA).
    pub b_min: f64,
    pub b_max: f64,
    pub enabled: bool,
}

impl PlasticityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.b_min < self.b_max) {
            return Err(Error::Config(format!(
                "boxcar bounds must satisfy b_min < b_max, got ({}, {})",
                self.b_min, self.b_max
            )));
        }
        if self.enabled && self.eta == 0.0 {
            return Err(Error::Config(
                "learning rate is zero with plasticity enabled".into(),
            ));
        }
        Ok(())
    }
}

/// Update rule parameters for the fixed-point network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantPlasticityConfig {
    pub eta: ShiftExp,
    pub b_min: i32,
    pub b_max: i32,
    pub enabled: bool,
}

impl QuantPlasticityConfig {
    pub fn validate(&self) -> Result<()> {
        if self.b_min >= self.b_max {
            return Err(Error::Config(format!(
                "boxcar bounds must satisfy b_min < b_max, got ({}, {})",
                self.b_min, self.b_max
            )));
        }
        Ok(())
    }
}

#[inline(always)]
pub fn boxcar(i_syn: f64, cfg: &PlasticityConfig) -> bool {
    cfg.b_min < i_syn && i_syn < cfg.b_max
}

#[inline(always)]
pub fn qboxcar(i_syn: i32, cfg: &QuantPlasticityConfig) -> bool {
    cfg.b_min < i_syn && i_syn < cfg.b_max
}

/// Operation counts of one update call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UpdateCost {
    pub comparisons: u64,
    pub additions: u64,
    pub shifts: u64,
}

impl UpdateCost {
    fn check(&self, spikes: usize) {
        debug_assert_eq!(self.comparisons, 2 * spikes as u64);
        debug_assert!(self.additions <= spikes as u64);
    }
}

/// Update one postsynaptic neuron's incoming weight row.
///
/// `row[j]` is the weight from presynaptic neuron `j`; only entries listed
/// in `pre_spikes` are touched.
pub fn erbp_update(
    row: &mut [f64],
    pre_spikes: &[u32],
    u: f64,
    i_syn: f64,
    cfg: &PlasticityConfig,
) -> UpdateCost {
    let mut cost = UpdateCost::default();
    if !cfg.enabled {
        return cost;
    }
    let t = cfg.eta * u;
    for &j in pre_spikes {
        cost.comparisons += 2;
        if boxcar(i_syn, cfg) {
            row[j as usize] += t;
            cost.additions += 1;
        }
    }
    cost.check(pre_spikes.len());
    cost
}

/// Fixed-point variant: the increment is `eta ⋄ U`, clipped to 8 bits.
pub fn qerbp_update(
    row: &mut [i8],
    pre_spikes: &[u32],
    u: i32,
    i_syn: i32,
    cfg: &QuantPlasticityConfig,
) -> UpdateCost {
    let mut cost = UpdateCost::default();
    if !cfg.enabled {
        return cost;
    }
    let t = diamond(cfg.eta, u);
    cost.shifts = 1;
    for &j in pre_spikes {
        cost.comparisons += 2;
        if qboxcar(i_syn, cfg) {
            let w = &mut row[j as usize];
            *w = clip_weight(*w as i32 + t);
            cost.additions += 1;
        }
    }
    cost.check(pre_spikes.len());
    cost
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> PlasticityConfig {
        PlasticityConfig {
            eta: 6e-4,
            b_min: -1.15,
            b_max: 1.15,
            enabled: true,
        }
    }

    fn qcfg() -> QuantPlasticityConfig {
        QuantPlasticityConfig {
            eta: ShiftExp::new(-10).unwrap(),
            b_min: -2560,
            b_max: 2560,
            enabled: true,
        }
    }

    #[test]
    fn boxcar_examples() {
        assert!(boxcar(0.0, &cfg()));
        assert!(!boxcar(2.0, &cfg()));
        assert!(!boxcar(1.15, &cfg()));
        assert!(!boxcar(-1.15, &cfg()));
    }

    #[test]
    fn update_examples() {
        let mut row = vec![0.0; 4];
        let cost = erbp_update(&mut row, &[1, 3], 10.0, 0.2, &cfg());
        let d = cfg().eta * 10.0;
        assert_eq!(row, vec![0.0, d, 0.0, d]);
        assert_eq!(
            cost,
            UpdateCost {
                comparisons: 4,
                additions: 2,
                shifts: 0
            }
        );

        let mut row = vec![0.5; 4];
        erbp_update(&mut row, &[1, 3], 10.0, 2.0, &cfg());
        assert_eq!(row, vec![0.5; 4]);
        erbp_update(&mut row, &[], 10.0, 0.0, &cfg());
        assert_eq!(row, vec![0.5; 4]);
    }

    #[test]
    fn disabled_is_a_no_op() {
        let mut row = vec![0.0; 2];
        let c = PlasticityConfig {
            enabled: false,
            ..cfg()
        };
        assert_eq!(
            erbp_update(&mut row, &[0], 5.0, 0.0, &c),
            UpdateCost::default()
        );
        assert_eq!(row, vec![0.0; 2]);
    }

    #[test]
    fn quantized_examples() {
        let mut row = vec![100i8, 127];
        let cost = qerbp_update(&mut row, &[0], 2048, 0, &qcfg());
        assert_eq!(row[0], 102);
        assert_eq!(cost.additions, 1);
        assert_eq!(cost.comparisons, 2);
        qerbp_update(&mut row, &[1], 1 << 14, 0, &qcfg());
        assert_eq!(row[1], 127);
        let mut row = vec![-128i8];
        qerbp_update(&mut row, &[0], -(1 << 14), 0, &qcfg());
        assert_eq!(row[0], -128);
        qerbp_update(&mut row, &[0], 1 << 14, 2560, &qcfg());
        assert_eq!(row[0], -128);
    }

    #[test]
    fn zero_modulation_is_a_fixed_point() {
        let mut row = vec![0.3, -0.2];
        erbp_update(&mut row, &[0, 1], 0.0, 0.0, &cfg());
        assert_eq!(row, vec![0.3, -0.2]);
        let mut q = vec![5i8, -7];
        qerbp_update(&mut q, &[0, 1], 0, 0, &qcfg());
        assert_eq!(q, vec![5, -7]);
    }

    #[test]
    fn validation() {
        assert!(PlasticityConfig {
            b_min: 1.0,
            b_max: 1.0,
            ..cfg()
        }
        .validate()
        .is_err());
        assert!(PlasticityConfig { eta: 0.0, ..cfg() }.validate().is_err());
        assert!(PlasticityConfig {
            eta: 0.0,
            enabled: false,
            ..cfg()
        }
        .validate()
        .is_ok());
        assert!(QuantPlasticityConfig {
            b_min: 3,
            b_max: 3,
            ..qcfg()
        }
        .validate()
        .is_err());
    }
}
