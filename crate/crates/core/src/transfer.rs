//! Bounds that carry a lower bound on the risk of the posterior mean over to
//! the posterior itself.

use crate::error::{domain, Result};
use crate::math;

/// `4 exp(-n mu^2 / 32)`: bound on `P(||posterior mean - f0||^2 <= mu^2/4)`
/// when `mu^2` is the risk of the posterior mean.
pub fn concentration_bound(n: f64, mu_sq: f64) -> Result<f64> {
    math::require_positive("n", n)?;
    math::require_positive("mu_sq", mu_sq)?;
    Ok(4.0 * math::exp(-n * mu_sq / 32.0))
}

/// `2 sqrt(v)`: if the expected posterior mass outside the `gamma`-ball is
/// `v`, the posterior mean leaves the `2 gamma`-ball with probability at
/// most this.
pub fn anderson_transfer(v: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v) {
        return Err(domain!("posterior mass must lie in [0, 1], got {v}"));
    }
    Ok(2.0 * math::sqrt(v))
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 0.25 {
        Ok(())
    } else {
        Err(domain!("delta must lie in (0, 1/4), got {delta}"))
    }
}

/// `32 ln(5 / (1 - sqrt(1 - 4 delta)))`: the value of `n gamma^2` above
/// which the posterior cannot contract at rate `gamma / 5` with
/// probability `1/4 - delta`.
pub fn transfer_threshold(delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(32.0 * math::ln(5.0 / (1.0 - math::sqrt(1.0 - 4.0 * delta))))
}

/// `(1/4)(1 - 4 exp(-n mu^2 / 32))_+^2`: lower bound on
/// `E_f0 Pi_n(||f - f0|| >= mu/4 | Y)`.
pub fn contraction_floor(n: f64, mu_sq: f64) -> Result<f64> {
    let c = (1.0 - concentration_bound(n, mu_sq)?).max(0.0);
    Ok(0.25 * c * c)
}
