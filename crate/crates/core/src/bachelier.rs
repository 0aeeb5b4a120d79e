//! Bachelier (arithmetic Brownian) call price and delta, zero rates.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal distribution function.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Call price per share, `E[(S_T - K)+]` with `S_T ~ N(S, sigma^2 tau)`.
/// Returns the intrinsic value when `tau <= 0`.
pub fn bachelier_price(s: f64, k: f64, sigma: f64, tau: f64) -> f64 {
    if tau <= 0.0 || sigma == 0.0 {
        return (s - k).max(0.0);
    }
    let sd = sigma * tau.sqrt();
    let d = (s - k) / sd;
    (s - k) * normal_cdf(d) + sd * normal_pdf(d)
}

/// `P[S_T >= K | S_t = s]`. At `tau = 0` this is the indicator `1{s >= k}`.
pub fn bachelier_delta(s: f64, k: f64, sigma: f64, tau: f64) -> f64 {
    if tau <= 0.0 || sigma == 0.0 {
        return if s >= k { 1.0 } else { 0.0 };
    }
    normal_cdf((s - k) / (sigma * tau.sqrt()))
}
