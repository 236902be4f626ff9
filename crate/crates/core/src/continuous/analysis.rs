//! Diffusion approximation of the stationary firing rate.

use std::f64::consts::PI;

/// Stationary rate (Hz) of a neuron whose free membrane potential is
/// Gaussian with mean `mu_mv` and standard deviation `sigma_mv`, firing at
/// its maximal rate `1 / tau_refr` whenever the potential is above
/// threshold. `mu_mv` is measured relative to threshold.
pub fn predicted_rate(mu_mv: f64, sigma_mv: f64, tau_refr_ms: f64) -> f64 {
    assert!(sigma_mv > 0.0, "sigma must be positive");
    1000.0 / tau_refr_ms * 0.5 * (1.0 + libm::erf(mu_mv / (sigma_mv * std::f64::consts::SQRT_2)))
}

/// Density of the free membrane potential at threshold: the derivative of
/// the rate function up to the factor `1 / tau_refr`.
pub fn gaussian_derivative(mu: f64, sigma: f64) -> f64 {
    (-mu * mu / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt())
}

/// Mean and standard deviation (mV) of the free membrane potential driven
/// by a constant current `bias_na` plus a shot-noise current made of
/// exponentially filtered kicks of size `w_na` arriving at `rate_hz` with
/// both signs equally likely. Valid when `tau_syn >> tau_m`.
pub fn free_potential_moments(
    bias_na: f64,
    w_na: f64,
    rate_hz: f64,
    tau_syn_ms: f64,
    g_v_ns: f64,
) -> (f64, f64) {
    let mean = 1000.0 * bias_na / g_v_ns;
    // variance of a shot-noise current with exponential kernel: r w^2 tau / 2
    let var_i = rate_hz * 1e-3 * w_na * w_na * tau_syn_ms / 2.0;
    (mean, 1000.0 * var_i.sqrt() / g_v_ns)
}
