//! Tensor-product Haar basis, Gaussian wavelet series priors and the
//! single-function risk lower bound.
//!
//! Per axis the Haar functions are ordered as `[phi, psi_{0,0}, psi_{1,0},
//! psi_{1,1}, psi_{2,0}, ...]`: flat position 0 is the scaling function
//! (level -1) and position `p >= 1` is level `floor(log2 p)`, translate
//! `p - 2^level`. Through max level `J` that is `2^(J+1)` functions per axis,
//! exactly the number of finest dyadic cells, and the tensor index is
//! row-major with axis 0 most significant.
//!
//! All projections go through integrals over the finest cells followed by
//! the fast pyramid transform, which is exact because every basis function
//! is constant on those cells.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::basis::{BasisId, BoxIntegrable};
use crate::error::{domain, Result};
use crate::math;
use crate::quadrature::clipped_box_integral;
use crate::sequence::Spectrum;

/// Largest supported `(J+1) * d`, i.e. at most `2^26` finest cells.
const MAX_CELL_BITS: u32 = 26;

/// One axis of a tensor wavelet index. Level `-1` is the scaling function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AxisIndex {
    pub level: i32,
    pub translate: u32,
}

impl AxisIndex {
    pub const SCALING: AxisIndex = AxisIndex {
        level: -1,
        translate: 0,
    };

    pub fn wavelet(level: u32, translate: u32) -> Self {
        Self {
            level: level as i32,
            translate,
        }
    }

    fn from_position(p: usize) -> Self {
        if p == 0 {
            Self::SCALING
        } else {
            let level = usize::BITS - 1 - p.leading_zeros();
            Self::wavelet(level, (p - (1usize << level)) as u32)
        }
    }

    fn position(&self) -> Option<usize> {
        match self.level {
            -1 if self.translate == 0 => Some(0),
            l if l >= 0 && (self.translate as u64) < (1u64 << l) => Some((1usize << l) + self.translate as usize),
            _ => None,
        }
    }

    /// Value of the one-dimensional function at `x` in `[0, 1]`; the right
    /// endpoint belongs to the last cell.
    pub fn eval(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        if self.level < 0 {
            return 1.0;
        }
        let scale = (1u64 << self.level) as f64;
        let t = scale * x - self.translate as f64;
        let amp = math::sqrt(scale);
        if (0.0..0.5).contains(&t) {
            amp
        } else if (0.5..1.0).contains(&t) || (t == 1.0 && x == 1.0) {
            -amp
        } else {
            0.0
        }
    }
}

/// A tensor wavelet index `(gamma_1, ..., gamma_d)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WaveletIndex(pub Vec<AxisIndex>);

impl WaveletIndex {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Sum of the per-axis levels, counting the scaling function as level 0.
    pub fn total_level(&self) -> u32 {
        self.0.iter().map(|a| a.level.max(0) as u32).sum()
    }

    /// Largest per-axis level, scaling functions counted as 0.
    pub fn max_level(&self) -> u32 {
        self.0.iter().map(|a| a.level.max(0) as u32).max().unwrap_or(0)
    }
}

/// Tensor Haar basis on `[0,1]^d` through max level `J` on every axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HaarTensorBasis {
    d: u32,
    max_level: u32,
}

impl HaarTensorBasis {
    pub fn new(d: u32, max_level: u32) -> Result<Self> {
        if d == 0 {
            return Err(domain!("Haar basis needs d >= 1"));
        }
        if (max_level + 1).saturating_mul(d) > MAX_CELL_BITS {
            return Err(domain!(
                "Haar basis with d = {d}, J = {max_level} has 2^{} functions, above the 2^{MAX_CELL_BITS} limit",
                (max_level + 1) * d
            ));
        }
        Ok(Self { d, max_level })
    }

    /// Smallest max level whose finest cells (width `2^-(J+1)`) are no wider
    /// than the pyramid kink spacing `1/(2k)`.
    pub fn minimal_level_for(k: u64) -> u32 {
        let mut level = 0;
        while (1u64 << level) < k {
            level += 1;
        }
        level
    }

    pub fn dim(&self) -> u32 {
        self.d
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    /// Functions (and finest cells) per axis: `2^(J+1)`.
    pub fn per_axis(&self) -> usize {
        1usize << (self.max_level + 1)
    }

    pub fn len(&self) -> usize {
        1usize << ((self.max_level + 1) * self.d)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self) -> BasisId {
        BasisId::new(format!("haar:d={}:J={}", self.d, self.max_level))
    }

    pub fn cell_width(&self) -> f64 {
        1.0 / self.per_axis() as f64
    }

    pub fn index_of(&self, flat: usize) -> WaveletIndex {
        let n = self.per_axis();
        let mut axes = vec![AxisIndex::SCALING; self.d as usize];
        let mut rest = flat;
        for slot in axes.iter_mut().rev() {
            *slot = AxisIndex::from_position(rest % n);
            rest /= n;
        }
        WaveletIndex(axes)
    }

    pub fn flat_of(&self, index: &WaveletIndex) -> Option<usize> {
        if index.dim() != self.d as usize {
            return None;
        }
        let n = self.per_axis();
        let mut flat = 0usize;
        for axis in &index.0 {
            let p = axis.position()?;
            if p >= n {
                return None;
            }
            flat = flat * n + p;
        }
        Some(flat)
    }

    pub fn eval(&self, flat: usize, x: &[f64]) -> f64 {
        self.index_of(flat).0.iter().zip(x).map(|(a, xi)| a.eval(*xi)).product()
    }

    /// Integrals of `f` over every finest cell, row-major. Cells outside the
    /// support box are skipped.
    pub fn cell_integrals(&self, f: &dyn BoxIntegrable) -> Vec<f64> {
        let d = self.d as usize;
        let n = self.per_axis();
        let h = self.cell_width();
        let mut out = vec![0.0; self.len()];
        let (slo, shi) = f.support();
        let ranges: Vec<(usize, usize)> = (0..d)
            .map(|i| {
                let a = math::floor(slo[i].max(0.0) / h) as usize;
                let b = (math::ceil(shi[i].min(1.0) / h) as usize).clamp(a, n);
                (a.min(n), b)
            })
            .collect();
        if ranges.iter().any(|(a, b)| a >= b) {
            return out;
        }
        let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        let mut lo = vec![0.0; d];
        let mut hi = vec![0.0; d];
        loop {
            let mut flat = 0usize;
            for i in 0..d {
                lo[i] = idx[i] as f64 * h;
                hi[i] = lo[i] + h;
                flat = flat * n + idx[i];
            }
            out[flat] = f.box_integral(&lo, &hi);
            let mut axis = d;
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < ranges[axis].1 {
                    break;
                }
                idx[axis] = ranges[axis].0;
            }
        }
    }

    /// Coefficients `<f, psi_gamma>` for all basis functions, given the
    /// integrals of `f` over the finest cells.
    pub fn analysis(&self, cell_integrals: &[f64]) -> Vec<f64> {
        assert_eq!(cell_integrals.len(), self.len());
        let mut data = cell_integrals.to_vec();
        let mut scratch = vec![0.0; self.per_axis()];
        for axis in 0..self.d as usize {
            self.along_axis(&mut data, axis, &mut scratch, analysis_1d);
        }
        data
    }

    /// Values on the finest cells of `sum_gamma c_gamma psi_gamma`.
    pub fn synthesis(&self, coefficients: &[f64]) -> Vec<f64> {
        assert_eq!(coefficients.len(), self.len());
        let mut data = coefficients.to_vec();
        let mut scratch = vec![0.0; self.per_axis()];
        for axis in 0..self.d as usize {
            self.along_axis(&mut data, axis, &mut scratch, synthesis_1d);
        }
        data
    }

    /// Exact Haar coefficients of a box-integrable function.
    pub fn coefficients_of(&self, f: &dyn BoxIntegrable) -> Vec<f64> {
        self.analysis(&self.cell_integrals(f))
    }

    fn along_axis(&self, data: &mut [f64], axis: usize, scratch: &mut [f64], transform: fn(&mut [f64], &mut [f64])) {
        let n = self.per_axis();
        let d = self.d as usize;
        let stride = n.pow((d - 1 - axis) as u32);
        let outer = data.len() / (n * stride);
        let mut fiber = vec![0.0; n];
        for o in 0..outer {
            for s in 0..stride {
                let base = o * n * stride + s;
                for (c, slot) in fiber.iter_mut().enumerate() {
                    *slot = data[base + c * stride];
                }
                transform(&mut fiber, scratch);
                for (c, v) in fiber.iter().enumerate() {
                    data[base + c * stride] = *v;
                }
            }
        }
    }
}

/// In place: cell integrals -> `[scaling, level 0, level 1, ...]`.
fn analysis_1d(v: &mut [f64], scratch: &mut [f64]) {
    let mut len = v.len();
    // v[..len] holds integrals over the current cells
    while len > 1 {
        let half = len / 2;
        let level = half.trailing_zeros();
        let amp = math::sqrt((1u64 << level) as f64);
        for k in 0..half {
            let (a, b) = (v[2 * k], v[2 * k + 1]);
            scratch[k] = a + b;
            scratch[half + k] = amp * (a - b);
        }
        v[..len].copy_from_slice(&scratch[..len]);
        len = half;
    }
}

/// Inverse of [`analysis_1d`] up to the cell volume: coefficients -> values.
fn synthesis_1d(v: &mut [f64], scratch: &mut [f64]) {
    let n = v.len();
    let mut len = 1;
    while len < n {
        let level = len.trailing_zeros();
        let amp = math::sqrt((1u64 << level) as f64);
        for k in 0..len {
            let (s, det) = (v[k], v[len + k]);
            scratch[2 * k] = s + amp * det;
            scratch[2 * k + 1] = s - amp * det;
        }
        v[..2 * len].copy_from_slice(&scratch[..2 * len]);
        len *= 2;
    }
}

/// Mean-zero Gaussian wavelet series prior
/// `f = sum_{gamma in I} sqrt(lambda_gamma) xi_gamma psi_gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletPrior {
    basis: HaarTensorBasis,
    lambdas: BTreeMap<WaveletIndex, f64>,
}

impl WaveletPrior {
    /// Every variance must be positive and finite and every index must lie
    /// in the basis.
    pub fn new(basis: HaarTensorBasis, lambdas: BTreeMap<WaveletIndex, f64>) -> Result<Self> {
        for (index, lambda) in &lambdas {
            if basis.flat_of(index).is_none() {
                return Err(domain!("wavelet index {index:?} is outside {}", basis.id()));
            }
            if !(lambda.is_finite() && *lambda > 0.0) {
                return Err(domain!(
                    "wavelet prior variance must be positive, got {lambda} at {index:?}"
                ));
            }
        }
        Ok(Self { basis, lambdas })
    }

    /// Prior on the full truncated index set with variances from `profile`.
    pub fn from_profile(basis: HaarTensorBasis, profile: impl Fn(&WaveletIndex) -> f64) -> Result<Self> {
        let lambdas = (0..basis.len())
            .map(|flat| {
                let index = basis.index_of(flat);
                let lambda = profile(&index);
                (index, lambda)
            })
            .collect();
        Self::new(basis, lambdas)
    }

    pub fn basis(&self) -> &HaarTensorBasis {
        &self.basis
    }

    pub fn lambdas(&self) -> &BTreeMap<WaveletIndex, f64> {
        &self.lambdas
    }

    pub fn max_level(&self) -> u32 {
        self.lambdas.keys().map(WaveletIndex::max_level).max().unwrap_or(0)
    }

    /// Spectrum on the full truncated basis; indices outside `I` get 0.
    pub fn to_spectrum(&self) -> Spectrum {
        let mut eigenvalues = vec![0.0; self.basis.len()];
        for (index, lambda) in &self.lambdas {
            if let Some(flat) = self.basis.flat_of(index) {
                eigenvalues[flat] = *lambda;
            }
        }
        Spectrum::new(self.basis.id(), eigenvalues).expect("prior variances are validated")
    }

    /// One draw of the coefficients `sqrt(lambda_gamma) xi_gamma`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BTreeMap<WaveletIndex, f64> {
        self.lambdas
            .iter()
            .map(|(index, lambda)| {
                let xi: f64 = rng.sample(StandardNormal);
                (index.clone(), math::sqrt(*lambda) * xi)
            })
            .collect()
    }
}

/// `sum_gamma <f, psi_gamma>^2 ∧ 1/n`. Like
/// [`crate::adversarial::risk_lower_bound`] this is within a factor of two of
/// the attainable floor `sum c^2 / (1 + n c^2)`
/// ([`crate::sequence::oracle_shrinkage_risk`]) and can exceed it.
pub fn ilb_risk_bound<I>(coefficients: I, n: f64) -> Result<f64>
where
    I: IntoIterator<Item = f64>,
{
    math::require_positive("n", n)?;
    let cap = 1.0 / n;
    Ok(coefficients.into_iter().map(|c| (c * c).min(cap)).sum())
}

/// Unnormalised wavelet-prior rate `n^{-1/(2+d)}`; the constant depends on
/// the wavelet and is left to the caller.
pub fn theorem3_rate(d: u32, n: f64) -> Result<f64> {
    if d == 0 {
        return Err(domain!("d must be at least 1"));
    }
    if !(n.is_finite() && n >= 1.0) {
        return Err(domain!("n must be at least 1, got {n}"));
    }
    Ok(math::powf(n, -wavelet_rate_exponent(d)))
}

/// `1/(2+d)`.
pub fn wavelet_rate_exponent(d: u32) -> f64 {
    1.0 / (2.0 + d as f64)
}

/// Generalized additive surrogate `g(x) = dist(x_1 + ... + x_d, 2^-j Z)`.
///
/// The outer function is 1-Lipschitz with sup-norm `2^-(j+1)` and the inner
/// ones are the coordinates, so `g` lies in the unit class. Used to explore
/// wavelet-prior rates empirically; its coefficients are computed, never
/// assumed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sawtooth {
    d: u32,
    level: u32,
}

impl Sawtooth {
    pub fn new(d: u32, level: u32) -> Result<Self> {
        if d == 0 {
            return Err(domain!("d must be at least 1"));
        }
        if level > 52 {
            return Err(domain!("sawtooth level {level} is below floating-point resolution"));
        }
        Ok(Self { d, level })
    }

    /// Level `j` with `2^{-j(2+d)}` closest to `1/n` from above.
    pub fn level_for(d: u32, n: f64) -> u32 {
        let j = math::floor(math::ln(n.max(1.0)) / core::f64::consts::LN_2 / (2.0 + d as f64));
        j.max(0.0) as u32
    }

    pub fn period(&self) -> f64 {
        1.0 / (1u64 << self.level) as f64
    }

    fn outer(&self, u: f64) -> f64 {
        let p = self.period();
        let r = u - math::floor(u / p) * p;
        r.min(p - r)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.outer(x.iter().sum())
    }
}

impl BoxIntegrable for Sawtooth {
    fn dim(&self) -> usize {
        self.d as usize
    }

    fn box_integral(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let half = 0.5 * self.period();
        let u0: f64 = lo.iter().sum();
        let u1: f64 = hi.iter().sum();
        let volume: f64 = lo.iter().zip(hi).map(|(l, h)| h - l).product();
        if volume <= 0.0 {
            return 0.0;
        }
        let mid: f64 = 0.5 * (u0 + u1);
        // linear piece valid just right of u0
        let i0 = math::floor(u0 / half);
        let t0 = i0 * half;
        let rising = (i0 as i64).rem_euclid(2) == 0;
        let (value0, slope) = if rising { (0.0, 1.0) } else { (half, -1.0) };
        let mut total = volume * (value0 + slope * (mid - t0));
        // ramps for every kink strictly inside (u0, u1); reflect so the
        // clipped integral sees (T - sum y)_+ on [0, w]
        let zeros = vec![0.0; lo.len()];
        let widths: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| h - l).collect();
        let mut i = i0 + 1.0;
        loop {
            let t = i * half;
            if t >= u1 {
                break;
            }
            if t > u0 {
                let delta = if (i as i64).rem_euclid(2) == 1 { -2.0 } else { 2.0 };
                total += delta * clipped_box_integral(u1 - t, &zeros, &widths, 1);
            }
            i += 1.0;
        }
        total
    }
}
