//! Reduction of the adversarial family to a one-sparse Gaussian sequence
//! model and the linear minimax analysis there.
//!
//! If the truth is `f_{j*}` from an orthogonal family with common squared
//! norm `c^2`, then `y_i = c^{-2} \int f_i dY` satisfies
//! `y = e_{j*} + sigma w` with `sigma = 1/(c sqrt n)`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::adversarial::{CoefficientMatrix, PyramidFamily};
use crate::error::{contract, domain, Result};
use crate::math;
use crate::sequence::{exact_risk, SequenceObservation, Spectrum};

/// Relative tolerance when comparing squared norms of family members.
const NORM_TOL: f64 = 1e-9;
/// Relative slack for inequalities that hold exactly in real arithmetic.
const ROUNDING_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneSparseModel {
    m: usize,
    sigma: f64,
    c_sq: f64,
}

impl OneSparseModel {
    pub fn new(m: usize, sigma: f64, c_sq: f64) -> Result<Self> {
        if m == 0 {
            return Err(domain!("one-sparse model needs m >= 1"));
        }
        math::require_positive("sigma", sigma)?;
        math::require_positive("c_sq", c_sq)?;
        Ok(Self { m, sigma, c_sq })
    }

    /// Model induced by an orthogonal family with common squared norm `c_sq`
    /// at sample size `n`.
    pub fn from_norm(m: usize, c_sq: f64, n: f64) -> Result<Self> {
        math::require_positive("c_sq", c_sq)?;
        math::require_positive("n", n)?;
        Self::new(m, 1.0 / math::sqrt(c_sq * n), c_sq)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn c_sq(&self) -> f64 {
        self.c_sq
    }
}

/// Draws the reduced observation `y` for truth `f_{j*}` directly: the
/// stochastic integrals `\int f_i dW` are independent `N(0, c^2)` because
/// the supports are disjoint.
pub fn reduce_to_sequence<R: Rng + ?Sized>(
    family: &PyramidFamily,
    j_star: usize,
    n: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, OneSparseModel)> {
    if j_star >= family.m() {
        return Err(domain!("truth index {j_star} out of range for m = {}", family.m()));
    }
    let model = OneSparseModel::from_norm(family.m(), family.norm_sq(), n)?;
    let y = (0..family.m())
        .map(|i| {
            let w: f64 = rng.sample(StandardNormal);
            let signal = if i == j_star { 1.0 } else { 0.0 };
            signal + model.sigma * w
        })
        .collect();
    Ok((y, model))
}

/// Forms `y_i = c^{-2} sum_k <f_i, phi_k> Y_k` from a sequence observation.
/// Exact when the family lies in the span of the truncated basis.
pub fn reduce_observation(coeffs: &CoefficientMatrix, obs: &SequenceObservation) -> Result<(Vec<f64>, OneSparseModel)> {
    coeffs.basis_id().ensure_same(obs.basis_id())?;
    if coeffs.cols() != obs.len() {
        return Err(contract!(
            "observation has {} coordinates, coefficients have {}",
            obs.len(),
            coeffs.cols()
        ));
    }
    let norms: Vec<f64> = (0..coeffs.rows()).map(|j| coeffs.row_norm_sq(j)).collect();
    let c_sq = norms[0];
    if c_sq <= 0.0 {
        return Err(contract!("family member 0 has zero norm in this basis"));
    }
    if let Some((j, v)) = norms
        .iter()
        .enumerate()
        .find(|(_, v)| (*v - c_sq).abs() > NORM_TOL * c_sq)
    {
        return Err(contract!(
            "family norms differ: member 0 has {c_sq}, member {j} has {v}"
        ));
    }
    let model = OneSparseModel::from_norm(coeffs.rows(), c_sq, obs.n())?;
    let y = (0..coeffs.rows())
        .map(|i| {
            coeffs
                .row(i)
                .iter()
                .zip(obs.coefficients())
                .map(|(c, y)| c * y)
                .sum::<f64>()
                / c_sq
        })
        .collect();
    Ok((y, model))
}

/// Dense `m x m` matrix acting as `theta_hat = A y`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEstimator {
    m: usize,
    entries: Vec<f64>,
}

impl LinearEstimator {
    /// Row-major entries.
    pub fn new(m: usize, entries: Vec<f64>) -> Result<Self> {
        if m == 0 || entries.len() != m * m {
            return Err(domain!(
                "linear estimator needs {m} x {m} entries, got {}",
                entries.len()
            ));
        }
        math::require_finite("estimator entry", &entries)?;
        Ok(Self { m, entries })
    }

    pub fn scaled_identity(m: usize, a: f64) -> Result<Self> {
        Self::diagonal(&vec![a; m])
    }

    pub fn identity(m: usize) -> Result<Self> {
        Self::scaled_identity(m, 1.0)
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let m = diag.len();
        let mut entries = vec![0.0; m * m];
        for (i, a) in diag.iter().enumerate() {
            entries[i * m + i] = *a;
        }
        Self::new(m, entries)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.m + j]
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        self.entries
            .chunks_exact(self.m)
            .map(|row| row.iter().zip(y).map(|(a, v)| a * v).sum())
            .collect()
    }

    fn frobenius_sq(&self) -> f64 {
        self.entries.iter().map(|a| a * a).sum()
    }
}

/// `|(A - I) e_j|^2 + sigma^2 tr(A A^T)`.
pub fn linear_estimator_risk(a: &LinearEstimator, j: usize, sigma: f64) -> Result<f64> {
    if j >= a.m {
        return Err(domain!("index {j} out of range for m = {}", a.m));
    }
    math::require_positive("sigma", sigma)?;
    Ok(column_bias(a, j) + sigma * sigma * a.frobenius_sq())
}

fn column_bias(a: &LinearEstimator, j: usize) -> f64 {
    (0..a.m)
        .map(|i| {
            let e = a.get(i, j) - if i == j { 1.0 } else { 0.0 };
            e * e
        })
        .sum()
}

/// `max_{theta in Theta_m}` risk of `A`.
pub fn max_risk(a: &LinearEstimator, sigma: f64) -> Result<f64> {
    math::require_positive("sigma", sigma)?;
    let bias = (0..a.m).map(|j| column_bias(a, j)).fold(0.0, f64::max);
    Ok(bias + sigma * sigma * a.frobenius_sq())
}

/// `a_bar = sqrt(mean_j a_jj^2)` and whether `a_bar I` has no larger
/// maximal risk than `A` (up to a `1e-12` relative rounding slack).
pub fn diagonal_reduction(a: &LinearEstimator, sigma: f64) -> Result<(f64, bool)> {
    let m = a.m;
    let mean_sq = (0..m).map(|j| a.get(j, j) * a.get(j, j)).sum::<f64>() / m as f64;
    let a_bar = math::sqrt(mean_sq);
    let reduced = max_risk(&LinearEstimator::scaled_identity(m, a_bar)?, sigma)?;
    let original = max_risk(a, sigma)?;
    Ok((a_bar, reduced <= original * (1.0 + ROUNDING_SLACK)))
}

/// Risk of `a I` at any `theta in Theta_m`: `(a - 1)^2 + m sigma^2 a^2`.
pub fn scalar_risk(a: f64, m: usize, sigma: f64) -> f64 {
    (a - 1.0) * (a - 1.0) + m as f64 * sigma * sigma * a * a
}

/// `(m sigma^2 / (1 + m sigma^2), 1 / (1 + m sigma^2))`.
pub fn linear_minimax_risk(m: usize, sigma: f64) -> Result<(f64, f64)> {
    if m == 0 {
        return Err(domain!("m must be at least 1"));
    }
    math::require_positive("sigma", sigma)?;
    let s = m as f64 * sigma * sigma;
    Ok((s / (1.0 + s), 1.0 / (1.0 + s)))
}

/// Smallest scalar risk over the given candidates and its minimiser.
pub fn scalar_minimax_search(m: usize, sigma: f64, candidates: &[f64]) -> Result<(f64, f64)> {
    if m == 0 || candidates.is_empty() {
        return Err(domain!("need m >= 1 and at least one candidate"));
    }
    math::require_positive("sigma", sigma)?;
    Ok(candidates
        .iter()
        .map(|a| (scalar_risk(*a, m, sigma), *a))
        .fold(
            (f64::INFINITY, f64::NAN),
            |best, cur| if cur.0 < best.0 { cur } else { best },
        ))
}

/// Minimum of the scalar risk over `grid_size` equispaced points of `[0, 1]`,
/// with the minimising point.
pub fn brute_force_argmin(m: usize, sigma: f64, grid_size: usize) -> Result<(f64, f64)> {
    if grid_size < 3 {
        return Err(domain!("grid needs at least 3 points, got {grid_size}"));
    }
    let step = 1.0 / (grid_size - 1) as f64;
    let grid: Vec<f64> = (0..grid_size).map(|i| i as f64 * step).collect();
    scalar_minimax_search(m, sigma, &grid)
}

pub fn brute_force_minimax(m: usize, sigma: f64, grid_size: usize) -> Result<f64> {
    brute_force_argmin(m, sigma, grid_size).map(|(r, _)| r)
}

/// Minimax risk over all `m x m` matrices with entries on `grid_size`
/// equispaced points of `[-1, 1]`. Only for `m <= 2`.
pub fn exhaustive_minimax(m: usize, sigma: f64, grid_size: usize) -> Result<f64> {
    if !(1..=2).contains(&m) {
        return Err(domain!("exhaustive search supports m <= 2, got {m}"));
    }
    if !(2..=201).contains(&grid_size) {
        return Err(domain!("exhaustive grid size must lie in [2, 201], got {grid_size}"));
    }
    math::require_positive("sigma", sigma)?;
    let step = 2.0 / (grid_size - 1) as f64;
    let values: Vec<f64> = (0..grid_size).map(|i| -1.0 + i as f64 * step).collect();
    let cells = m * m;
    let mut idx = vec![0usize; cells];
    let mut best = f64::INFINITY;
    let mut entries = vec![0.0; cells];
    loop {
        for (e, i) in entries.iter_mut().zip(&idx) {
            *e = values[*i];
        }
        let a = LinearEstimator {
            m,
            entries: entries.clone(),
        };
        best = best.min(max_risk(&a, sigma)?);
        let mut pos = cells;
        loop {
            if pos == 0 {
                return Ok(best);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < grid_size {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Outcome of comparing the GP posterior mean with the linear minimax risk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domination {
    pub gp_risk_max: f64,
    pub linear_minimax: f64,
    pub holds: bool,
}

/// Compares `max_j E_{f_j} ||posterior mean - f_j||^2` with
/// `c^2 m sigma^2 / (1 + m sigma^2)`, where `c^2` is the family's squared
/// norm. The inequality is exact when the basis spans the family; a
/// truncated basis loses the part of each `f_j` outside its span.
pub fn gp_mean_dominates_linear(spectrum: &Spectrum, coeffs: &CoefficientMatrix, n: f64) -> Result<Domination> {
    let c_sq = coeffs.family().norm_sq();
    let model = OneSparseModel::from_norm(coeffs.rows(), c_sq, n)?;
    let (risk, _) = linear_minimax_risk(model.m, model.sigma)?;
    let linear_minimax = c_sq * risk;
    let mut gp_risk_max = 0.0f64;
    for j in 0..coeffs.rows() {
        gp_risk_max = gp_risk_max.max(exact_risk(spectrum, &coeffs.truth(j), n)?);
    }
    Ok(Domination {
        gp_risk_max,
        linear_minimax,
        holds: gp_risk_max >= linear_minimax * (1.0 - ROUNDING_SLACK),
    })
}
