//! Scalar helpers on top of `libm`.

use crate::error::{domain, Result};

/// Above this argument factorials go through `lgamma` instead of a product.
const EXACT_FACTORIAL_MAX: u32 = 15;

pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

pub fn powi(x: f64, n: i32) -> f64 {
    libm::pow(x, n as f64)
}

pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

/// `ln(n!)`.
pub fn ln_factorial(n: u32) -> f64 {
    if n <= EXACT_FACTORIAL_MAX {
        ln(factorial_exact(n))
    } else {
        libm::lgamma(n as f64 + 1.0)
    }
}

/// `n!` as a float; exact up to 15!, log-gamma beyond.
pub fn factorial(n: u32) -> f64 {
    if n <= EXACT_FACTORIAL_MAX {
        factorial_exact(n)
    } else {
        exp(libm::lgamma(n as f64 + 1.0))
    }
}

fn factorial_exact(n: u32) -> f64 {
    (2..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// `ln r_d` where `r_d = 1 / (2 (d+2)!)` is the squared-norm constant of the
/// unit pyramid in dimension `d`.
pub fn ln_pyramid_constant(d: u32) -> f64 {
    -core::f64::consts::LN_2 - ln_factorial(d + 2)
}

pub fn pyramid_constant(d: u32) -> f64 {
    exp(ln_pyramid_constant(d))
}

/// Ceiling that forgives a relative rounding error of `1e-12` just above an
/// integer, so `ceil(12 * (1/12))` is 1 and not 2.
pub fn tolerant_ceil(x: f64) -> f64 {
    let r = libm::round(x);
    if (x - r).abs() <= 1e-12 * r.abs().max(1.0) {
        r
    } else {
        ceil(x)
    }
}

pub(crate) fn require_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(domain!("{name} must be a positive finite number, got {value}"))
    }
}

pub(crate) fn require_finite(name: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(i) => Err(domain!("{name}[{i}] is not finite ({})", values[i])),
    }
}
