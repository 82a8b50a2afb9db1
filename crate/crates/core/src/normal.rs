//! Standard normal CDF, log-CDF and inverse Mills ratio, stable in both tails.
//!
//! For `t >= -8` everything goes through `erfc`, which keeps full relative
//! accuracy in the lower tail. Below `-8` the asymptotic Mills-ratio series
//! `Phi(t) ~ phi(t)/(-t) * (1 - 1/t^2 + 3/t^4 - ...)` is summed until its terms
//! stop shrinking, so neither `log Phi` nor `phi/Phi` ever sees an underflowed
//! CDF.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const ASYMPTOTIC_BELOW: f64 = -8.0;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn norm_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * PI).sqrt()
}

pub fn norm_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t * FRAC_1_SQRT_2)
}

/// `1 - 1/t^2 + 3/t^4 - 15/t^6 + ...`, truncated at its smallest term.
fn mills_series(t: f64) -> f64 {
    let inv2 = 1.0 / (t * t);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let next = -term * (2 * k - 1) as f64 * inv2;
        if next.abs() >= term.abs() || next.abs() < 1e-18 {
            break;
        }
        term = next;
        sum += term;
    }
    sum
}

pub fn log_norm_cdf(t: f64) -> f64 {
    if t >= 0.0 {
        (-0.5 * libm::erfc(t * FRAC_1_SQRT_2)).ln_1p()
    } else if t >= ASYMPTOTIC_BELOW {
        norm_cdf(t).ln()
    } else {
        -0.5 * t * t - LN_SQRT_2PI - (-t).ln() + mills_series(t).ln()
    }
}

/// Inverse Mills ratio `phi(t) / Phi(t)`.
pub fn inv_mills(t: f64) -> f64 {
    if t >= ASYMPTOTIC_BELOW {
        norm_pdf(t) / norm_cdf(t)
    } else {
        -t / mills_series(t)
    }
}

/// Derivative of [`inv_mills`]: `-psi(t) (t + psi(t))`, always negative.
pub fn inv_mills_derivative(t: f64) -> f64 {
    let psi = inv_mills(t);
    -psi * (t + psi)
}
