//! Numerical core for studying lower bounds on Gaussian-process posterior
//! contraction over generalized additive regression functions.
//!
//! Everything here works on the Gaussian white-noise model in sequence form:
//! a truth is a coefficient vector in some orthonormal basis, a mean-zero GP
//! prior is a spectrum of Karhunen-Loève variances in that same basis, and
//! the conjugate posterior is coordinate-wise. On top of that sit the
//! adversarial pyramid families, the universal risk lower bound, the
//! one-sparse linear-minimax reduction and the tensor Haar wavelet prior.
//!
//! The crate is `no_std` and only needs `alloc`. All randomness is passed in
//! explicitly, so every randomized routine is a pure function of its inputs
//! and the state of the supplied generator.

#![no_std]

extern crate alloc;

pub mod adversarial;
pub mod basis;
mod error;
pub mod math;
pub mod quadrature;
pub mod rng;
pub mod sequence;
pub mod sparse;
pub mod stats;
pub mod transfer;
pub mod wavelet;

pub use error::{Error, Result};

pub use adversarial::{CoefficientMatrix, GridChoice, PyramidFamily, TheoremConstants};
pub use basis::{BasisDescriptor, BasisId, CosineTensorBasis};
pub use sequence::{GpPosterior, SequenceObservation, Spectrum, SpectrumPreset, TruthCoefficients};
pub use sparse::{LinearEstimator, OneSparseModel};
pub use wavelet::{HaarTensorBasis, WaveletIndex, WaveletPrior};
