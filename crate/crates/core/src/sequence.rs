//! Gaussian white-noise model in sequence form and the conjugate GP
//! posterior.
//!
//! Observing `dY = f dx + n^{-1/2} dW` is the same as observing
//! `Y_k = theta_k + w_k / sqrt(n)` for the coefficients of `f` in any
//! orthonormal basis. With a prior whose Karhunen-Loève variances in that
//! basis are `lambda_k`, the posterior is a product of normals with
//! shrinkage weights `a_k = n lambda_k / (n lambda_k + 1)`.
//!
//! All norms are squared `l^2` norms over the truncated coefficient vector.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::basis::BasisId;
use crate::error::{contract, domain, Result};
use crate::math;
use crate::stats::RunningStats;

/// Karhunen-Loève variances of a mean-zero Gaussian prior, truncated at
/// `K = eigenvalues.len()` terms.
///
/// Zero entries are allowed and describe finite-rank priors; they give a
/// zero shrinkage weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    basis_id: BasisId,
    eigenvalues: Vec<f64>,
    tail_trace: Option<f64>,
}

impl Spectrum {
    pub fn new(basis_id: BasisId, eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(domain!("spectrum needs at least one eigenvalue"));
        }
        if let Some((k, v)) = eigenvalues
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(domain!("eigenvalue {k} is {v}; must be finite and nonnegative"));
        }
        let trace: f64 = eigenvalues.iter().sum();
        if !trace.is_finite() {
            return Err(domain!("spectrum trace overflows"));
        }
        Ok(Self {
            basis_id,
            eigenvalues,
            tail_trace: None,
        })
    }

    /// Records the closed-form prior mass `sum_{k > K} lambda_k` beyond the
    /// truncation. It is reported only; no computation uses it.
    pub fn with_tail_trace(mut self, tail: f64) -> Result<Self> {
        if !(tail.is_finite() && tail >= 0.0) {
            return Err(domain!("tail trace must be finite and nonnegative, got {tail}"));
        }
        self.tail_trace = Some(tail);
        Ok(self)
    }

    pub fn basis_id(&self) -> &BasisId {
        &self.basis_id
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn tail_trace(&self) -> Option<f64> {
        self.tail_trace
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// Shrinkage weights `a_k` at sample size `n`.
    pub fn weights(&self, n: f64) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| shrinkage(*l, n)).collect()
    }

    fn ensure_matches(&self, basis_id: &BasisId, len: usize) -> Result<()> {
        self.basis_id.ensure_same(basis_id)?;
        if self.len() != len {
            return Err(contract!(
                "length mismatch: spectrum has K = {}, other side has {len}",
                self.len()
            ));
        }
        Ok(())
    }
}

/// Spectrum families. `k` below is the 1-based flat basis index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectrumPreset {
    /// `tau k^{-(1 + 2 alpha / d)}`, the decay of an `alpha`-regular prior.
    Polynomial { tau: f64, alpha: f64 },
    /// `tau exp(-rate k)`.
    Exponential { tau: f64, rate: f64 },
    /// `value` for every `k`.
    Flat { value: f64 },
    /// `lambda_k = T_k`, the averaged squared coefficient of an adversarial
    /// family. Minimises the family-averaged risk coordinate-wise.
    TkMatched,
}

impl SpectrumPreset {
    /// Short stable label used in reports.
    pub fn label(&self) -> alloc::string::String {
        match self {
            Self::Polynomial { tau, alpha } => alloc::format!("poly(tau={tau},alpha={alpha})"),
            Self::Exponential { tau, rate } => alloc::format!("exp(tau={tau},rate={rate})"),
            Self::Flat { value } => alloc::format!("flat({value})"),
            Self::TkMatched => "tk-matched".into(),
        }
    }

    /// Builds the spectrum on `len` basis functions in dimension `d`.
    /// `t_k` is required for [`SpectrumPreset::TkMatched`] and ignored
    /// otherwise.
    pub fn build(&self, basis_id: BasisId, len: usize, d: u32, t_k: Option<&[f64]>) -> Result<Spectrum> {
        if len == 0 {
            return Err(domain!("spectrum needs at least one eigenvalue"));
        }
        let eigenvalues: Vec<f64> = match *self {
            Self::Polynomial { tau, alpha } => {
                math::require_positive("tau", tau)?;
                math::require_positive("alpha", alpha)?;
                if d == 0 {
                    return Err(domain!("d must be at least 1"));
                }
                let p = 1.0 + 2.0 * alpha / d as f64;
                (1..=len).map(|k| tau * math::powf(k as f64, -p)).collect()
            }
            Self::Exponential { tau, rate } => {
                math::require_positive("tau", tau)?;
                math::require_positive("rate", rate)?;
                (1..=len).map(|k| tau * math::exp(-rate * k as f64)).collect()
            }
            Self::Flat { value } => {
                math::require_positive("value", value)?;
                alloc::vec![value; len]
            }
            Self::TkMatched => {
                let t = t_k.ok_or_else(|| domain!("T_k-matched spectrum needs the T_k sequence"))?;
                if t.len() != len {
                    return Err(contract!("T_k has {} entries, basis has {len}", t.len()));
                }
                t.to_vec()
            }
        };
        Spectrum::new(basis_id, eigenvalues)
    }
}

/// True coefficients `theta_k = <f, phi_k>`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthCoefficients {
    basis_id: BasisId,
    theta: Vec<f64>,
}

impl TruthCoefficients {
    pub fn new(basis_id: BasisId, theta: Vec<f64>) -> Result<Self> {
        math::require_finite("theta", &theta)?;
        let norm: f64 = theta.iter().map(|t| t * t).sum();
        if !norm.is_finite() {
            return Err(domain!("theta has infinite l2 norm"));
        }
        Ok(Self { basis_id, theta })
    }

    pub fn zeros(basis_id: BasisId, len: usize) -> Self {
        Self {
            basis_id,
            theta: alloc::vec![0.0; len],
        }
    }

    pub fn basis_id(&self) -> &BasisId {
        &self.basis_id
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        self.theta.iter().map(|t| t * t).sum()
    }
}

/// `Y_k = theta_k + w_k / sqrt(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceObservation {
    basis_id: BasisId,
    n: f64,
    coefficients: Vec<f64>,
}

impl SequenceObservation {
    pub fn new(basis_id: BasisId, n: f64, coefficients: Vec<f64>) -> Result<Self> {
        math::require_positive("n", n)?;
        math::require_finite("observation", &coefficients)?;
        Ok(Self {
            basis_id,
            n,
            coefficients,
        })
    }

    pub fn basis_id(&self) -> &BasisId {
        &self.basis_id
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }
}

/// Coordinate-wise normal posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct GpPosterior {
    pub basis_id: BasisId,
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

fn shrinkage(lambda: f64, n: f64) -> f64 {
    let nl = n * lambda;
    nl / (nl + 1.0)
}

pub fn sample_observation<R: Rng + ?Sized>(
    theta: &TruthCoefficients,
    n: f64,
    rng: &mut R,
) -> Result<SequenceObservation> {
    math::require_positive("n", n)?;
    let s = 1.0 / math::sqrt(n);
    let coefficients = theta
        .theta
        .iter()
        .map(|t| {
            let w: f64 = rng.sample(StandardNormal);
            t + s * w
        })
        .collect();
    Ok(SequenceObservation {
        basis_id: theta.basis_id.clone(),
        n,
        coefficients,
    })
}

pub fn posterior_update(spectrum: &Spectrum, obs: &SequenceObservation) -> Result<GpPosterior> {
    spectrum.ensure_matches(&obs.basis_id, obs.len())?;
    let n = obs.n;
    let mut weights = Vec::with_capacity(obs.len());
    let mut means = Vec::with_capacity(obs.len());
    let mut variances = Vec::with_capacity(obs.len());
    for (lambda, y) in spectrum.eigenvalues.iter().zip(&obs.coefficients) {
        let a = shrinkage(*lambda, n);
        weights.push(a);
        means.push(a * y);
        variances.push(lambda / (n * lambda + 1.0));
    }
    Ok(GpPosterior {
        basis_id: obs.basis_id.clone(),
        weights,
        means,
        variances,
    })
}

/// Risk of the posterior mean in one coordinate:
/// `(1 - a)^2 theta^2 + a^2 / n`.
pub fn coordinate_risk(lambda: f64, theta: f64, n: f64) -> f64 {
    let nl = n * lambda;
    let b = 1.0 / (nl + 1.0);
    let a = nl * b;
    b * b * theta * theta + a * a / n
}

/// `sum_k t_k / (1 + n t_k)`: the smallest value of
/// `sum_k (1 - a_k)^2 t_k + a_k^2 / n` over all weights, attained at
/// `a_k = n t_k / (1 + n t_k)`. With `t_k = theta_k^2` it is the risk of the
/// best prior for a single truth; with family averages it bounds the
/// worst-case risk of every prior diagonal in the basis.
pub fn oracle_shrinkage_risk<I>(t: I, n: f64) -> Result<f64>
where
    I: IntoIterator<Item = f64>,
{
    math::require_positive("n", n)?;
    Ok(t.into_iter().map(|v| v / (1.0 + n * v)).sum())
}

/// `E_f ||posterior mean - f||^2` in closed form.
pub fn exact_risk(spectrum: &Spectrum, theta: &TruthCoefficients, n: f64) -> Result<f64> {
    math::require_positive("n", n)?;
    spectrum.ensure_matches(&theta.basis_id, theta.len())?;
    Ok(spectrum
        .eigenvalues
        .iter()
        .zip(&theta.theta)
        .map(|(l, t)| coordinate_risk(*l, *t, n))
        .sum())
}

/// Draws `||posterior mean - f||^2` under fresh observations without
/// materialising them. Coordinates with zero weight contribute the
/// deterministic `theta_k^2` and consume no randomness.
#[derive(Debug, Clone)]
pub struct PosteriorMeanLoss {
    active: Vec<(f64, f64)>,
    fixed: f64,
    noise: f64,
}

impl PosteriorMeanLoss {
    pub fn new(spectrum: &Spectrum, theta: &TruthCoefficients, n: f64) -> Result<Self> {
        math::require_positive("n", n)?;
        spectrum.ensure_matches(&theta.basis_id, theta.len())?;
        let mut active = Vec::new();
        let mut fixed = 0.0;
        for (lambda, t) in spectrum.eigenvalues.iter().zip(&theta.theta) {
            let a = shrinkage(*lambda, n);
            if a > 0.0 {
                // a Y - theta = (a - 1) theta + a w / sqrt(n)
                active.push(((a - 1.0) * t, a));
            } else {
                fixed += t * t;
            }
        }
        Ok(Self {
            active,
            fixed,
            noise: 1.0 / math::sqrt(n),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut loss = self.fixed;
        for (bias, a) in &self.active {
            let w: f64 = rng.sample(StandardNormal);
            let e = bias + a * self.noise * w;
            loss += e * e;
        }
        loss
    }
}

/// Monte Carlo accumulator of the posterior-mean loss.
pub fn mc_risk_stats<R: Rng + ?Sized>(
    spectrum: &Spectrum,
    theta: &TruthCoefficients,
    n: f64,
    replications: u64,
    rng: &mut R,
) -> Result<RunningStats> {
    let loss = PosteriorMeanLoss::new(spectrum, theta, n)?;
    let mut stats = RunningStats::new();
    for _ in 0..replications {
        stats.push(loss.sample(rng));
    }
    Ok(stats)
}

/// Monte Carlo estimate and standard error of the risk.
pub fn mc_risk<R: Rng + ?Sized>(
    spectrum: &Spectrum,
    theta: &TruthCoefficients,
    n: f64,
    replications: u64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if replications < 2 {
        return Err(domain!(
            "Monte Carlo risk needs at least 2 replications, got {replications}"
        ));
    }
    let stats = mc_risk_stats(spectrum, theta, n, replications, rng)?;
    Ok((stats.mean(), stats.stderr()))
}

/// Nested Monte Carlo estimate of `E_f0 Pi_n(||f - f0|| >= radius | Y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionEstimate {
    pub probability: f64,
    /// Standard error across outer draws.
    pub stderr: f64,
    /// Per-outer-draw posterior masses, accumulated.
    pub stats: RunningStats,
}

/// Posterior draws minus the truth: coordinate `k` of `f' - theta` is
/// `a_k Y_k - theta_k + s_k z` with `s_k^2` the posterior variance.
struct ContractionSampler {
    // (bias (a-1) theta, a / sqrt(n), posterior sd) per active coordinate
    active: Vec<(f64, f64, f64)>,
    fixed: f64,
}

impl ContractionSampler {
    fn new(spectrum: &Spectrum, theta: &TruthCoefficients, n: f64) -> Self {
        let mut active = Vec::new();
        let mut fixed = 0.0;
        let s = 1.0 / math::sqrt(n);
        for (lambda, t) in spectrum.eigenvalues.iter().zip(&theta.theta) {
            if *lambda > 0.0 {
                let a = shrinkage(*lambda, n);
                let sd = math::sqrt(lambda / (n * lambda + 1.0));
                active.push(((a - 1.0) * t, a * s, sd));
            } else {
                fixed += t * t;
            }
        }
        Self { active, fixed }
    }

    fn posterior_mass<R: Rng + ?Sized>(&self, r2: f64, inner: u64, centre: &mut Vec<f64>, rng: &mut R) -> f64 {
        centre.clear();
        for (bias, scale, _) in &self.active {
            let w: f64 = rng.sample(StandardNormal);
            centre.push(bias + scale * w);
        }
        let mut hits = 0u64;
        for _ in 0..inner {
            let mut dist = self.fixed;
            if dist < r2 {
                for (c, (_, _, sd)) in centre.iter().zip(&self.active) {
                    let z: f64 = rng.sample(StandardNormal);
                    let e = c + sd * z;
                    dist += e * e;
                }
            }
            if dist >= r2 {
                hits += 1;
            }
        }
        hits as f64 / inner as f64
    }
}

pub fn contraction_stats<R: Rng + ?Sized>(
    spectrum: &Spectrum,
    theta: &TruthCoefficients,
    n: f64,
    radius: f64,
    outer: u64,
    inner: u64,
    rng: &mut R,
) -> Result<ContractionEstimate> {
    math::require_positive("n", n)?;
    math::require_positive("radius", radius)?;
    if outer == 0 || inner == 0 {
        return Err(domain!("outer and inner draw counts must be at least 1"));
    }
    spectrum.ensure_matches(&theta.basis_id, theta.len())?;
    let sampler = ContractionSampler::new(spectrum, theta, n);
    let r2 = radius * radius;
    let mut centre = Vec::with_capacity(sampler.active.len());
    let mut stats = RunningStats::new();
    for _ in 0..outer {
        stats.push(sampler.posterior_mass(r2, inner, &mut centre, rng));
    }
    Ok(ContractionEstimate {
        probability: stats.mean(),
        stderr: stats.stderr(),
        stats,
    })
}

pub fn contraction_probability<R: Rng + ?Sized>(
    spectrum: &Spectrum,
    theta: &TruthCoefficients,
    n: f64,
    radius: f64,
    outer: u64,
    inner: u64,
    rng: &mut R,
) -> Result<f64> {
    contraction_stats(spectrum, theta, n, radius, outer, inner, rng).map(|e| e.probability)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use alloc::vec;

    fn id() -> BasisId {
        BasisId::new("test")
    }

    #[test]
    fn posterior_examples() {
        let n = 100.0;
        let spec = Spectrum::new(id(), vec![1.0 / n, 1.0]).unwrap();
        let obs = SequenceObservation::new(id(), n, vec![0.3, 2.0]).unwrap();
        let post = posterior_update(&spec, &obs).unwrap();
        assert!((post.weights[0] - 0.5).abs() < 1e-15);
        assert!((post.variances[0] - 1.0 / (2.0 * n)).abs() < 1e-18);
        assert!((post.means[1] - 200.0 / 101.0).abs() < 1e-14);
        assert!((post.variances[1] - 1.0 / 101.0).abs() < 1e-16);
    }

    #[test]
    fn basis_mismatch_is_a_contract_error() {
        let spec = Spectrum::new(id(), vec![1.0]).unwrap();
        let obs = SequenceObservation::new(BasisId::new("other"), 1.0, vec![0.0]).unwrap();
        assert!(matches!(posterior_update(&spec, &obs), Err(crate::Error::Contract(_))));
        let short = TruthCoefficients::new(id(), vec![0.0, 0.0]).unwrap();
        assert!(matches!(exact_risk(&spec, &short, 1.0), Err(crate::Error::Contract(_))));
    }

    #[test]
    fn exact_risk_examples() {
        let spec = Spectrum::new(id(), vec![0.01]).unwrap();
        let zero = TruthCoefficients::zeros(id(), 1);
        assert!((exact_risk(&spec, &zero, 100.0).unwrap() - 0.0025).abs() < 1e-17);
        let big = Spectrum::new(id(), vec![1e12; 5]).unwrap();
        assert!((exact_risk(&big, &TruthCoefficients::zeros(id(), 5), 10.0).unwrap() - 0.5).abs() < 1e-10);
        let tiny = Spectrum::new(id(), vec![0.0; 3]).unwrap();
        let theta = TruthCoefficients::new(id(), vec![1.0, 2.0, 0.5]).unwrap();
        assert_eq!(exact_risk(&tiny, &theta, 10.0).unwrap(), 5.25);
    }

    #[test]
    fn degenerate_mc_is_exactly_zero() {
        let spec = Spectrum::new(id(), vec![0.0; 4]).unwrap();
        let theta = TruthCoefficients::zeros(id(), 4);
        let (est, se) = mc_risk(&spec, &theta, 10.0, 100, &mut stream_rng(1, 0, 0)).unwrap();
        assert_eq!((est, se), (0.0, 0.0));
        assert!(mc_risk(&spec, &theta, 10.0, 1, &mut stream_rng(1, 0, 0)).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Spectrum::new(id(), vec![]).is_err());
        assert!(Spectrum::new(id(), vec![-1.0]).is_err());
        assert!(Spectrum::new(id(), vec![f64::NAN]).is_err());
        let theta = TruthCoefficients::zeros(id(), 1);
        assert!(sample_observation(&theta, 0.0, &mut stream_rng(0, 0, 0)).is_err());
        let spec = Spectrum::new(id(), vec![1.0]).unwrap();
        assert!(contraction_probability(&spec, &theta, 1.0, 0.0, 1, 1, &mut stream_rng(0, 0, 0)).is_err());
    }

    #[test]
    fn presets() {
        let p = SpectrumPreset::Polynomial { tau: 2.0, alpha: 0.5 }
            .build(id(), 3, 1, None)
            .unwrap();
        assert!((p.eigenvalues()[1] - 2.0 / 4.0).abs() < 1e-15);
        assert!(SpectrumPreset::TkMatched.build(id(), 2, 1, None).is_err());
        let t = SpectrumPreset::TkMatched.build(id(), 2, 1, Some(&[0.0, 0.3])).unwrap();
        assert_eq!(t.eigenvalues(), &[0.0, 0.3]);
        let tail = Spectrum::new(id(), vec![1.0]).unwrap().with_tail_trace(0.5).unwrap();
        assert_eq!(tail.tail_trace(), Some(0.5));
    }
}
