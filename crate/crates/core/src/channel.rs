//! Propagation, Doppler, autoregressive fading and Shannon rate.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::scenario::{LinkBudget, Scenario};

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("distance must be positive, path loss is singular at d = {0}")]
    NonPositiveDistance(f64),
    #[error("bandwidth and noise power must be positive")]
    NonPositiveParameter,
}

pub fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Doppler shift `v / wavelength * cos(theta)` in Hz.
pub fn doppler(speed: f64, wavelength: f64, cos_theta: f64) -> f64 {
    speed / wavelength * cos_theta
}

/// Crossover between the power series and the Hankel asymptotic expansion.
const J0_SERIES_LIMIT: f64 = 12.0;

/// Bessel function of the first kind, order zero.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= J0_SERIES_LIMIT {
        j0_series(x)
    } else {
        j0_asymptotic(x)
    }
}

fn j0_series(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= -q / (k * k);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && k > q.sqrt() {
            break;
        }
        k += 1.0;
        if k > 200.0 {
            break;
        }
    }
    sum
}

fn j0_asymptotic(x: f64) -> f64 {
    // Terms t_k = prod_{m<=k} (2m-1)^2 / (k! (8x)^k); alternate into P and Q
    // and stop at the smallest term.
    let mut p = 1.0;
    let mut q = 0.0;
    let mut t = 1.0_f64;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        let next = t * odd * odd / (k as f64 * 8.0 * x);
        if next >= t {
            break;
        }
        t = next;
        let sign = if (k + 1) / 2 % 2 == 1 { -1.0 } else { 1.0 };
        if k % 2 == 0 {
            p += sign * t;
        } else {
            q += sign * t;
        }
        if t < 1e-17 {
            break;
        }
    }
    let chi = x - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Jakes autocorrelation `J0(2 pi f_d t)` for Doppler `f_d` (Hz) and lag `t` (s).
pub fn autocorrelation(doppler_hz: f64, lag_s: f64) -> f64 {
    bessel_j0(2.0 * PI * doppler_hz * lag_s)
}

/// First-order autoregressive channel gain with unit stationary power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelState {
    pub gain: Complex64,
    pub rho: f64,
    pub doppler: f64,
}

impl ChannelState {
    /// Starts at unit gain with autocorrelation `J0(2 pi f_d t)`.
    pub fn new(doppler_hz: f64, slot_s: f64) -> Self {
        Self { gain: Complex64::new(1.0, 0.0), rho: autocorrelation(doppler_hz, slot_s), doppler: doppler_hz }
    }

    pub fn power_gain(&self) -> f64 {
        self.gain.norm_sqr()
    }
}

/// One AR(1) step `h' = rho h + e sqrt(1 - rho^2)` with `e ~ CN(0, 1)`.
pub fn evolve_gain<R: Rng + ?Sized>(state: ChannelState, rng: &mut R) -> ChannelState {
    debug_assert!(state.rho.abs() <= 1.0);
    let scale = (1.0 - state.rho * state.rho).max(0.0).sqrt();
    let gain = if scale == 0.0 {
        state.gain
    } else {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let e = Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
        state.gain * state.rho + e * scale
    };
    ChannelState { gain, ..state }
}

/// Shannon rate `B log2(1 + p g d^-alpha / sigma^2)` in bit/s, `gain` being
/// the power gain `|h|^2` (1 in deterministic mode).
pub fn shannon_rate(
    tx_power: f64,
    gain: f64,
    distance: f64,
    path_loss_exponent: f64,
    noise_power: f64,
    bandwidth: f64,
) -> Result<f64, ChannelError> {
    if distance <= 0.0 || distance.is_nan() {
        return Err(ChannelError::NonPositiveDistance(distance));
    }
    if bandwidth <= 0.0 || noise_power <= 0.0 {
        return Err(ChannelError::NonPositiveParameter);
    }
    Ok(bandwidth * spectral_efficiency(tx_power * gain, distance, path_loss_exponent, noise_power))
}

fn spectral_efficiency(received: f64, distance: f64, path_loss_exponent: f64, noise_power: f64) -> f64 {
    (received * distance.powf(-path_loss_exponent) / noise_power).ln_1p() / std::f64::consts::LN_2
}

/// Unit-gain rate averaged over 1 m steps along the coverage chord.
pub(crate) fn traversal_link_budget(scenario: &Scenario, vehicle: usize) -> LinkBudget {
    let c = scenario.config();
    let v = scenario.vehicle(vehicle);
    let rsu = scenario.rsu_position();
    let steps = c.rsu_coverage.floor() as usize;
    let total: f64 = (0..=steps)
        .map(|x| {
            let d = distance(scenario.vehicle_position(vehicle, x as f64), rsu);
            spectral_efficiency(v.tx_power, d, c.path_loss_exponent, c.noise_power)
        })
        .sum();
    let se = total / (steps + 1) as f64;
    LinkBudget { spectral_efficiency: se, rate: c.bandwidth * se }
}
