//! Orthonormal bases of `L^2[0,1]^d` and the function traits used to
//! project onto them.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{contract, domain, Result};
use crate::math;
use crate::wavelet::HaarTensorBasis;

/// Identifies the basis a coefficient sequence is expressed in. Sequences
/// with different ids never mix.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisId(String);

impl BasisId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub(crate) fn ensure_same(&self, other: &BasisId) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(contract!("basis mismatch: {} vs {}", self.0, other.0))
        }
    }
}

impl fmt::Display for BasisId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A function on `[0,1]^d` that can integrate itself over axis-aligned boxes
/// in closed form.
pub trait BoxIntegrable {
    fn dim(&self) -> usize;

    /// `\int_{prod [lo_i, hi_i]} f`.
    fn box_integral(&self, lo: &[f64], hi: &[f64]) -> f64;

    /// Bounding box of the support, clipped to the unit cube.
    fn support(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        (alloc::vec![0.0; d], alloc::vec![1.0; d])
    }
}

/// Tensor cosine basis: `phi_0 = 1`, `phi_f(x) = sqrt(2) cos(pi f x)` per
/// axis, frequencies `0..frequencies`. This is the Karhunen–Loève basis of
/// several stationary-increment priors and serves as the smooth
/// (non-piecewise-constant) alternative to Haar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CosineTensorBasis {
    d: u32,
    frequencies: u32,
}

impl CosineTensorBasis {
    pub fn new(d: u32, frequencies: u32) -> Result<Self> {
        if d == 0 || frequencies == 0 {
            return Err(domain!("cosine basis needs d >= 1 and at least one frequency"));
        }
        let basis = Self { d, frequencies };
        basis.checked_len()?;
        Ok(basis)
    }

    fn checked_len(&self) -> Result<usize> {
        (self.frequencies as usize)
            .checked_pow(self.d)
            .ok_or_else(|| domain!("cosine basis size {}^{} overflows", self.frequencies, self.d))
    }

    pub fn dim(&self) -> u32 {
        self.d
    }

    pub fn frequencies(&self) -> u32 {
        self.frequencies
    }

    pub fn len(&self) -> usize {
        (self.frequencies as usize).pow(self.d)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self) -> BasisId {
        BasisId::new(format!("cosine:d={}:F={}", self.d, self.frequencies))
    }

    /// Per-axis frequencies of the flat index, axis 0 most significant.
    pub fn frequencies_of(&self, flat: usize) -> Vec<u32> {
        let f = self.frequencies as usize;
        let mut out = alloc::vec![0u32; self.d as usize];
        let mut rest = flat;
        for slot in out.iter_mut().rev() {
            *slot = (rest % f) as u32;
            rest /= f;
        }
        out
    }

    pub fn eval_1d(freq: u32, x: f64) -> f64 {
        if freq == 0 {
            1.0
        } else {
            core::f64::consts::SQRT_2 * math::cos(core::f64::consts::PI * freq as f64 * x)
        }
    }

    pub fn eval(&self, flat: usize, x: &[f64]) -> f64 {
        self.frequencies_of(flat)
            .iter()
            .zip(x)
            .map(|(f, xi)| Self::eval_1d(*f, *xi))
            .product()
    }
}

/// The bases the crate can project onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisDescriptor {
    Haar(HaarTensorBasis),
    Cosine(CosineTensorBasis),
}

impl BasisDescriptor {
    pub fn id(&self) -> BasisId {
        match self {
            Self::Haar(b) => b.id(),
            Self::Cosine(b) => b.id(),
        }
    }

    pub fn dim(&self) -> u32 {
        match self {
            Self::Haar(b) => b.dim(),
            Self::Cosine(b) => b.dim(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Haar(b) => b.len(),
            Self::Cosine(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn eval(&self, flat: usize, x: &[f64]) -> f64 {
        match self {
            Self::Haar(b) => b.eval(flat, x),
            Self::Cosine(b) => b.eval(flat, x),
        }
    }

    /// Checks that the basis resolves features of width `1/(2k)` along each
    /// axis (the kink spacing of a pyramid family with grid count `k`).
    /// The error names the smallest adequate size.
    pub fn ensure_resolves(&self, k: u64) -> Result<()> {
        match self {
            Self::Haar(b) => {
                let needed = HaarTensorBasis::minimal_level_for(k);
                if b.max_level() < needed {
                    return Err(domain!(
                        "Haar level {} cannot resolve a pyramid grid with k = {k}; minimal level is {needed}",
                        b.max_level()
                    ));
                }
            }
            Self::Cosine(b) => {
                let needed = 2 * k;
                if (b.frequencies() as u64) < needed {
                    return Err(domain!(
                        "cosine basis with {} frequencies cannot resolve a pyramid grid with k = {k}; minimal frequency count is {needed}",
                        b.frequencies()
                    ));
                }
            }
        }
        Ok(())
    }
}
