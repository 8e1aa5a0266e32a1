//! Experiment modes. Every n-grid point and every Monte Carlo batch draws
//! from its own stream keyed by `(seed, task, batch)`, and partial results
//! merge in index order, so reports do not depend on the thread count.

use std::collections::BTreeMap;

use gplb_core::adversarial::{choose_grid, compute_coefficients, risk_lower_bound, thm2_floor};
use gplb_core::rng::stream_rng;
use gplb_core::sequence::{contraction_stats, exact_risk, PosteriorMeanLoss};
use gplb_core::sparse::{brute_force_minimax, gp_mean_dominates_linear, OneSparseModel};
use gplb_core::stats::{fit_line, LineFit, RunningStats};
use gplb_core::transfer::{contraction_floor, transfer_threshold};
use gplb_core::wavelet::{ilb_risk_bound, theorem3_rate, Sawtooth};
use gplb_core::{
    BasisDescriptor, CoefficientMatrix, GridChoice, HaarTensorBasis, PyramidFamily, Spectrum, TruthCoefficients,
};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::config::{BasisKind, ExperimentConfig, Mode};
use crate::error::{HarnessError, Result};
use crate::report::{RiskReport, RiskRow};

/// Replications per Monte Carlo stream.
pub const MC_BATCH: u64 = 256;
/// Outer draws per contraction stream.
pub const CONTRACTION_BATCH: u64 = 8;
/// Tolerance `delta` of the contraction transfer.
pub const TRANSFER_DELTA: f64 = 0.1;

/// Stream index of one unit of work.
pub fn task_id(n_index: usize, spectrum_index: usize, purpose: u64) -> u64 {
    ((n_index as u64) << 32) | ((spectrum_index as u64) << 8) | purpose
}

/// Monte Carlo posterior-mean loss, split into [`MC_BATCH`]-sized streams.
pub fn mc_risk_parallel(
    spectrum: &Spectrum,
    theta: &TruthCoefficients,
    n: f64,
    replications: u64,
    seed: u64,
    task: u64,
) -> Result<RunningStats> {
    let loss = PosteriorMeanLoss::new(spectrum, theta, n)?;
    let batches = replications.div_ceil(MC_BATCH);
    let parts: Vec<RunningStats> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, task, b);
            let mut s = RunningStats::new();
            for _ in 0..MC_BATCH.min(replications - b * MC_BATCH) {
                s.push(loss.sample(&mut rng));
            }
            s
        })
        .collect();
    Ok(merge(&parts))
}

/// Nested Monte Carlo estimate of `E Pi(||f - f0|| >= radius | Y)`; the
/// returned stats hold one posterior mass per outer draw.
#[allow(clippy::too_many_arguments)]
pub fn contraction_parallel(
    spectrum: &Spectrum,
    theta: &TruthCoefficients,
    n: f64,
    radius: f64,
    outer: u64,
    inner: u64,
    seed: u64,
    task: u64,
) -> Result<RunningStats> {
    let batches = outer.div_ceil(CONTRACTION_BATCH);
    let parts: Vec<RunningStats> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, task, b);
            let count = CONTRACTION_BATCH.min(outer - b * CONTRACTION_BATCH);
            contraction_stats(spectrum, theta, n, radius, count, inner, &mut rng).map(|e| e.stats)
        })
        .collect::<gplb_core::Result<_>>()?;
    Ok(merge(&parts))
}

fn merge(parts: &[RunningStats]) -> RunningStats {
    let mut total = RunningStats::new();
    for p in parts {
        total.merge(p);
    }
    total
}

/// Everything that depends on n but not on the spectrum.
pub struct Design {
    pub n: f64,
    pub grid: GridChoice,
    pub basis: BasisDescriptor,
    pub coeffs: CoefficientMatrix,
}

impl Design {
    pub fn new(cfg: &ExperimentConfig, n: f64) -> Result<Self> {
        let grid = choose_grid(cfg.d, n)?;
        let basis = cfg.basis.for_grid(cfg.d, grid.k, n)?;
        let family = PyramidFamily::from_grid(cfg.d, grid)?;
        let coeffs = compute_coefficients(&family, &basis)?;
        Ok(Self { n, grid, basis, coeffs })
    }

    pub fn family(&self) -> &PyramidFamily {
        self.coeffs.family()
    }

    pub fn spectrum(&self, preset: &crate::config::SpectrumConfig) -> Result<Spectrum> {
        let t_k = self.coeffs.t_k();
        Ok(preset
            .preset()
            .build(self.basis.id(), self.basis.len(), self.family().dim(), Some(&t_k))?)
    }

    /// Exact risk of every family member and the index of the largest.
    pub fn member_risks(&self, spectrum: &Spectrum) -> Result<(Vec<f64>, usize)> {
        let risks = (0..self.coeffs.rows())
            .map(|j| exact_risk(spectrum, &self.coeffs.truth(j), self.n))
            .collect::<gplb_core::Result<Vec<_>>>()?;
        let worst = (0..risks.len()).fold(0, |best, j| if risks[j] > risks[best] { j } else { best });
        Ok((risks, worst))
    }

    fn row(&self, cfg: &ExperimentConfig, label: String, exact: f64) -> Result<RiskRow> {
        Ok(RiskRow {
            d: cfg.d,
            n: self.n,
            k: self.grid.k,
            m: self.grid.m,
            spectrum_id: label,
            basis_len: self.basis.len() as u64,
            exact_risk: exact,
            mc_risk: None,
            mc_stderr: None,
            lemma4_bound: risk_lower_bound(&self.coeffs, self.n)?,
            thm2_floor: Some(thm2_floor(cfg.d, self.n)?),
            contraction_prob: None,
            radius: None,
            slope: None,
            seed: cfg.seed,
            extras: BTreeMap::new(),
        })
    }
}

fn designs(cfg: &ExperimentConfig, grid: &[f64]) -> Result<Vec<Design>> {
    grid.par_iter().map(|n| Design::new(cfg, *n)).collect()
}

/// Slope of `ln risk` against `ln n` with a 95% band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub fit: LineFit,
    /// Half-width of the 95% confidence band; absent with two points.
    pub half_width: Option<f64>,
}

pub fn fit_slope(ns: &[f64], risks: &[f64]) -> Option<SlopeFit> {
    if ns.len() < 2 || risks.iter().any(|r| r.is_nan() || *r <= 0.0) {
        return None;
    }
    let xs: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let ys: Vec<f64> = risks.iter().map(|r| r.ln()).collect();
    let fit = fit_line(&xs, &ys)?;
    let half_width = (fit.points > 2)
        .then(|| StudentsT::new(0.0, 1.0, (fit.points - 2) as f64).ok())
        .flatten()
        .map(|t| t.inverse_cdf(0.975) * fit.slope_stderr);
    Some(SlopeFit { fit, half_width })
}

/// Writes the per-spectrum slope into every row of that spectrum. Rows are
/// grouped by `spectrum_id`; the fitted series is `exact_risk` over `n`.
fn attach_slopes(rows: &mut [RiskRow]) {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        groups.entry(r.spectrum_id.clone()).or_default().push(i);
    }
    for members in groups.values() {
        // contraction mode has two rows per n with the same risk
        let mut ns = Vec::new();
        let mut risks = Vec::new();
        for &i in members {
            if ns.last() != Some(&rows[i].n) {
                ns.push(rows[i].n);
                risks.push(rows[i].exact_risk);
            }
        }
        if let Some(s) = fit_slope(&ns, &risks) {
            for &i in members {
                rows[i].slope = Some(s.fit.slope);
                if let Some(h) = s.half_width {
                    rows[i].extras.insert("slope_ci_low".into(), s.fit.slope - h);
                    rows[i].extras.insert("slope_ci_high".into(), s.fit.slope + h);
                }
            }
        }
    }
}

/// Runs one report mode.
pub fn run(cfg: &ExperimentConfig, mode: Mode) -> Result<RiskReport> {
    cfg.validate()?;
    let resolved = ExperimentConfig {
        mode,
        ..cfg.resolved()?
    };
    let grid = resolved.n_grid.resolve()?;
    let mut rows = match mode {
        Mode::Rates => adversarial_rows(&resolved, &grid, false)?,
        Mode::Risk => adversarial_rows(&resolved, &grid, true)?,
        Mode::Contraction => contraction_rows(&resolved, &grid)?,
        Mode::Minimax => minimax_rows(&resolved, &grid)?,
        Mode::Wavelet => wavelet_rows(&resolved, &grid)?,
        Mode::Verify => {
            return Err(HarnessError::Config(
                "verify runs the property suite and has no report".into(),
            ))
        }
    };
    attach_slopes(&mut rows);
    let report = RiskReport { config: resolved, rows };
    let violations = report.bound_violations();
    if let Some(v) = violations.first() {
        log::warn!(
            "{} row(s) have a bound column above exact_risk; first: row {} ({}), {} = {:e} > {:e}",
            violations.len(),
            v.row,
            report.rows[v.row].spectrum_id,
            v.column,
            v.bound,
            v.risk
        );
    }
    for v in &violations {
        log::debug!(
            "row {}: {} = {:e} > exact_risk = {:e}",
            v.row,
            v.column,
            v.bound,
            v.risk
        );
    }
    Ok(report)
}

fn adversarial_rows(cfg: &ExperimentConfig, grid: &[f64], with_mc: bool) -> Result<Vec<RiskRow>> {
    let designs = designs(cfg, grid)?;
    let mut rows = Vec::new();
    for (s, spec_cfg) in cfg.spectra.iter().enumerate() {
        let label = spec_cfg.preset().label();
        for (i, design) in designs.iter().enumerate() {
            let spectrum = design.spectrum(spec_cfg)?;
            let (risks, worst) = design.member_risks(&spectrum)?;
            let mut row = design.row(cfg, label.clone(), risks[worst])?;
            row.extras.insert("worst_member".into(), worst as f64);
            if with_mc {
                let stats = mc_risk_parallel(
                    &spectrum,
                    &design.coeffs.truth(worst),
                    design.n,
                    cfg.mc.replications,
                    cfg.seed,
                    task_id(i, s, 0),
                )?;
                row.mc_risk = Some(stats.mean());
                row.mc_stderr = Some(stats.stderr());
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Radii `mu/4` and `gamma/5` with `mu^2` the largest member risk and
/// `gamma = mu`.
fn contraction_rows(cfg: &ExperimentConfig, grid: &[f64]) -> Result<Vec<RiskRow>> {
    let designs = designs(cfg, grid)?;
    let threshold = transfer_threshold(TRANSFER_DELTA)?;
    let mut rows = Vec::new();
    for (s, spec_cfg) in cfg.spectra.iter().enumerate() {
        let label = spec_cfg.preset().label();
        for (i, design) in designs.iter().enumerate() {
            let spectrum = design.spectrum(spec_cfg)?;
            let (risks, worst) = design.member_risks(&spectrum)?;
            let mu_sq = risks[worst];
            let mu = mu_sq.sqrt();
            let truth = design.coeffs.truth(worst);
            for (purpose, divisor) in [(1u64, 4.0), (2, 5.0)] {
                let radius = mu / divisor;
                let stats = contraction_parallel(
                    &spectrum,
                    &truth,
                    design.n,
                    radius,
                    cfg.mc.outer,
                    cfg.mc.inner,
                    cfg.seed,
                    task_id(i, s, purpose),
                )?;
                let mut row = design.row(cfg, label.clone(), mu_sq)?;
                row.contraction_prob = Some(stats.mean());
                row.radius = Some(radius);
                row.extras.insert("contraction_stderr".into(), stats.stderr());
                row.extras.insert("radius_divisor".into(), divisor);
                row.extras.insert("n_mu_sq".into(), design.n * mu_sq);
                row.extras.insert("transfer_threshold".into(), threshold);
                row.extras
                    .insert("contraction_floor".into(), contraction_floor(design.n, mu_sq)?);
                row.extras.insert("worst_member".into(), worst as f64);
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

fn minimax_rows(cfg: &ExperimentConfig, grid: &[f64]) -> Result<Vec<RiskRow>> {
    let designs = designs(cfg, grid)?;
    let mut rows = Vec::new();
    for spec_cfg in &cfg.spectra {
        let label = spec_cfg.preset().label();
        for design in &designs {
            let spectrum = design.spectrum(spec_cfg)?;
            let dom = gp_mean_dominates_linear(&spectrum, &design.coeffs, design.n)?;
            let c_sq = design.family().norm_sq();
            let model = OneSparseModel::from_norm(design.family().m(), c_sq, design.n)?;
            let brute = c_sq * brute_force_minimax(model.m(), model.sigma(), cfg.minimax.grid)?;
            let mut row = design.row(cfg, label.clone(), dom.gp_risk_max)?;
            row.extras.insert("linear_minimax".into(), dom.linear_minimax);
            row.extras.insert("brute_force_minimax".into(), brute);
            row.extras.insert("sigma".into(), model.sigma());
            row.extras.insert("dominates".into(), if dom.holds { 1.0 } else { 0.0 });
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Wavelet-prior rows: the truth is the sawtooth at the level matched to
/// n, the bound column holds the single-function bound, and no theorem
/// floor is claimed. `k` is the sawtooth's period count and `m = 1`.
fn wavelet_rows(cfg: &ExperimentConfig, grid: &[f64]) -> Result<Vec<RiskRow>> {
    if cfg.basis.kind != BasisKind::Haar {
        return Err(HarnessError::Config("wavelet mode needs the Haar basis".into()));
    }
    struct Point {
        n: f64,
        design: Design,
        level: u32,
        theta: TruthCoefficients,
    }
    let points: Vec<Point> = grid
        .par_iter()
        .map(|&n| {
            let level = Sawtooth::level_for(cfg.d, n);
            let design = Design::new(cfg, n)?;
            let BasisDescriptor::Haar(haar) = design.basis else {
                unreachable!("wavelet mode checked the basis kind")
            };
            if haar.max_level() < level {
                let needed = level.max(HaarTensorBasis::minimal_level_for(design.grid.k));
                return Err(HarnessError::Config(format!(
                    "Haar level {} cannot resolve the sawtooth at n = {n}; minimal level is {needed}",
                    haar.max_level()
                )));
            }
            let coeffs = haar.coefficients_of(&Sawtooth::new(cfg.d, level)?);
            let theta = TruthCoefficients::new(haar.id(), coeffs)?;
            Ok(Point {
                n,
                design,
                level,
                theta,
            })
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for spec_cfg in &cfg.spectra {
        let label = format!("{}/sawtooth", spec_cfg.preset().label());
        for p in &points {
            let spectrum = p.design.spectrum(spec_cfg)?;
            let risk = exact_risk(&spectrum, &p.theta, p.n)?;
            let floor = gplb_core::sequence::oracle_shrinkage_risk(p.theta.theta().iter().map(|c| c * c), p.n)?;
            let mut extras = BTreeMap::new();
            extras.insert("sawtooth_level".into(), p.level as f64);
            extras.insert("theorem3_rate_sq".into(), theorem3_rate(cfg.d, p.n)?.powi(2));
            extras.insert("oracle_floor".into(), floor);
            rows.push(RiskRow {
                d: cfg.d,
                n: p.n,
                k: 1u64 << p.level,
                m: 1,
                spectrum_id: label.clone(),
                basis_len: p.theta.len() as u64,
                exact_risk: risk,
                mc_risk: None,
                mc_stderr: None,
                lemma4_bound: ilb_risk_bound(p.theta.theta().iter().copied(), p.n)?,
                thm2_floor: None,
                contraction_prob: None,
                radius: None,
                slope: None,
                seed: cfg.seed,
                extras,
            });
        }
    }
    Ok(rows)
}
