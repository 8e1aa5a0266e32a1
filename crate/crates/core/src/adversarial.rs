//! Pyramid families of generalized additive functions, their basis
//! coefficients, the universal risk lower bound and the rate constants.
//!
//! A family with grid count `k` in dimension `d` has `m = k^d` members
//! `f_a(x) = (1/(2k) - |x - a|_1)_+`, one per grid midpoint `a`. Each member
//! is `h(g_1(x_1) + ... + g_d(x_d))` with 1-Lipschitz pieces, and the
//! supports are disjoint, so the family is orthogonal with common squared
//! norm `r_d k^{-(d+2)}`, `r_d = 1/(2 (d+2)!)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::basis::{BasisDescriptor, BasisId, BoxIntegrable, CosineTensorBasis};
use crate::error::{domain, Error, Result};
use crate::math;
use crate::quadrature::{clipped_box_integral, GaussLegendre};
use crate::sequence::{oracle_shrinkage_risk, TruthCoefficients};
use crate::transfer::transfer_threshold;

/// Gauss–Legendre order for non-piecewise-constant bases.
const GL_ORDER: usize = 8;
/// Per-entry tolerance between successive panel doublings.
const COEFFICIENT_TOL: f64 = 1e-10;
/// Upper bound on quadrature nodes per orthant before giving up.
const MAX_NODES: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PyramidFamily {
    d: u32,
    k: u64,
    m: usize,
}

impl PyramidFamily {
    pub fn build(d: u32, k: u64) -> Result<Self> {
        if d == 0 || k == 0 {
            return Err(domain!("pyramid family needs d >= 1 and k >= 1, got d = {d}, k = {k}"));
        }
        let m = k
            .checked_pow(d)
            .and_then(|m| usize::try_from(m).ok())
            .ok_or_else(|| domain!("family size k^d = {k}^{d} overflows"))?;
        Ok(Self { d, k, m })
    }

    pub fn from_grid(d: u32, grid: GridChoice) -> Result<Self> {
        Self::build(d, grid.k)
    }

    pub fn dim(&self) -> u32 {
        self.d
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Half-width `1/(2k)`, which is also the peak value.
    pub fn bandwidth(&self) -> f64 {
        0.5 / self.k as f64
    }

    /// Common `||f_j||^2`.
    pub fn norm_sq(&self) -> f64 {
        pyramid_norm_sq(self.d, self.k)
    }

    /// Grid position of member `j`, row-major with axis 0 most significant.
    pub fn grid_index(&self, j: usize) -> Vec<u64> {
        let mut out = vec![0u64; self.d as usize];
        let mut rest = j as u64;
        for slot in out.iter_mut().rev() {
            *slot = rest % self.k;
            rest /= self.k;
        }
        out
    }

    /// Center of member `j`, coordinates `(l - 1/2)/k` for `l = 1..k`.
    pub fn center(&self, j: usize) -> Vec<f64> {
        let k = self.k as f64;
        self.grid_index(j).into_iter().map(|l| (l as f64 + 0.5) / k).collect()
    }

    pub fn member(&self, j: usize) -> Result<Pyramid> {
        if j >= self.m {
            return Err(domain!("member index {j} out of range for m = {}", self.m));
        }
        Ok(Pyramid {
            center: self.center(j),
            half_width: self.bandwidth(),
        })
    }

    pub fn evaluate(&self, j: usize, x: &[f64]) -> Result<f64> {
        if x.len() != self.d as usize {
            return Err(domain!("point has {} coordinates, family has d = {}", x.len(), self.d));
        }
        if let Some(bad) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(domain!("coordinate {bad} lies outside [0, 1]"));
        }
        Ok(self.member(j)?.eval(x))
    }
}

/// One pyramid `(h - |x - a|_1)_+`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid {
    center: Vec<f64>,
    half_width: f64,
}

impl Pyramid {
    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let dist: f64 = x.iter().zip(&self.center).map(|(xi, ai)| (xi - ai).abs()).sum();
        (self.half_width - dist).max(0.0)
    }

    /// `\int_{box} f^power`, exact up to rounding.
    pub fn box_integral_pow(&self, lo: &[f64], hi: &[f64], power: u32) -> f64 {
        let d = self.center.len();
        let h = self.half_width;
        // per axis: up to two pieces in |x_i - a_i| coordinates
        let mut pieces: Vec<[(f64, f64); 2]> = Vec::with_capacity(d);
        let mut counts: Vec<usize> = Vec::with_capacity(d);
        for i in 0..d {
            let a = self.center[i];
            let l = lo[i].max(a - h);
            let r = hi[i].min(a + h);
            if l >= r {
                return 0.0;
            }
            let mut p = [(0.0, 0.0); 2];
            let mut c = 0;
            if l < a {
                p[c] = (a - r.min(a), a - l);
                c += 1;
            }
            if r > a {
                p[c] = (l.max(a) - a, r - a);
                c += 1;
            }
            pieces.push(p);
            counts.push(c);
        }
        let mut choice = vec![0usize; d];
        let mut ulo = vec![0.0; d];
        let mut uhi = vec![0.0; d];
        let mut total = 0.0;
        loop {
            for i in 0..d {
                (ulo[i], uhi[i]) = pieces[i][choice[i]];
            }
            total += clipped_box_integral(h, &ulo, &uhi, power);
            let mut axis = d;
            loop {
                if axis == 0 {
                    return total;
                }
                axis -= 1;
                choice[axis] += 1;
                if choice[axis] < counts[axis] {
                    break;
                }
                choice[axis] = 0;
            }
        }
    }
}

impl BoxIntegrable for Pyramid {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn box_integral(&self, lo: &[f64], hi: &[f64]) -> f64 {
        self.box_integral_pow(lo, hi, 1)
    }

    fn support(&self) -> (Vec<f64>, Vec<f64>) {
        let h = self.half_width;
        (
            self.center.iter().map(|a| (a - h).max(0.0)).collect(),
            self.center.iter().map(|a| (a + h).min(1.0)).collect(),
        )
    }
}

/// `||f_a||^2 = k^{-(d+2)} / (2 (d+2)!)`.
pub fn pyramid_norm_sq(d: u32, k: u64) -> f64 {
    math::exp(math::ln_pyramid_constant(d) - (d as f64 + 2.0) * math::ln(k as f64))
}

/// Inner products `<f_j, phi_k>`, one row per family member.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    basis_id: BasisId,
    family: PyramidFamily,
    cols: usize,
    entries: Vec<f64>,
}

impl CoefficientMatrix {
    /// Wraps caller-supplied coefficients of a family.
    pub fn from_rows(basis_id: BasisId, family: PyramidFamily, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if cols == 0 || entries.len() != family.m() * cols {
            return Err(domain!(
                "coefficient matrix needs {} x {cols} entries, got {}",
                family.m(),
                entries.len()
            ));
        }
        math::require_finite("coefficient", &entries)?;
        Ok(Self {
            basis_id,
            family,
            cols,
            entries,
        })
    }

    pub fn basis_id(&self) -> &BasisId {
        &self.basis_id
    }

    pub fn family(&self) -> &PyramidFamily {
        &self.family
    }

    pub fn rows(&self) -> usize {
        self.family.m()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, j: usize, k: usize) -> f64 {
        self.entries[j * self.cols + k]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.entries[j * self.cols..(j + 1) * self.cols]
    }

    pub fn row_norm_sq(&self, j: usize) -> f64 {
        self.row(j).iter().map(|c| c * c).sum()
    }

    /// `T_k = (1/m) sum_j <f_j, phi_k>^2`.
    pub fn t_k(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.cols];
        for row in self.entries.chunks_exact(self.cols) {
            for (tk, c) in t.iter_mut().zip(row) {
                *tk += c * c;
            }
        }
        let m = self.rows() as f64;
        t.iter_mut().for_each(|v| *v /= m);
        t
    }

    pub fn truth(&self, j: usize) -> TruthCoefficients {
        TruthCoefficients::new(self.basis_id.clone(), self.row(j).to_vec()).expect("coefficients are finite")
    }
}

/// Coefficients of every family member in the given basis.
///
/// Haar entries are exact: the finest-cell integrals are closed-form and
/// the fast transform is exact. Cosine entries use collapsed coordinates on
/// each orthant simplex of the pyramid with composite Gauss–Legendre,
/// doubling panels until every entry moves by at most `1e-10`.
pub fn compute_coefficients(family: &PyramidFamily, basis: &BasisDescriptor) -> Result<CoefficientMatrix> {
    if basis.dim() != family.dim() {
        return Err(domain!(
            "basis dimension {} differs from family dimension {}",
            basis.dim(),
            family.dim()
        ));
    }
    let cols = basis.len();
    let mut entries = Vec::with_capacity(family.m() * cols);
    for j in 0..family.m() {
        let member = family.member(j)?;
        match basis {
            BasisDescriptor::Haar(haar) => entries.extend(haar.coefficients_of(&member)),
            BasisDescriptor::Cosine(cos) => entries.extend(cosine_coefficients(&member, cos)?),
        }
    }
    CoefficientMatrix::from_rows(basis.id(), *family, cols, entries)
}

fn cosine_coefficients(p: &Pyramid, basis: &CosineTensorBasis) -> Result<Vec<f64>> {
    let rule = GaussLegendre::new(GL_ORDER);
    let d = p.center.len();
    let mut panels = 1usize;
    let mut previous = cosine_pass(p, basis, &rule, panels);
    loop {
        let next_panels = panels * 2;
        let nodes_per_orthant = (next_panels * GL_ORDER).checked_pow(d as u32).unwrap_or(usize::MAX);
        if nodes_per_orthant > MAX_NODES {
            let worst = previous.iter().fold(0.0f64, |w, v| w.max(v.abs()));
            return Err(Error::Numerical {
                message: format!("cosine coefficients of the pyramid at {:?} did not converge", p.center),
                diagnostics: format!(
                    "{panels} panels per axis at order {GL_ORDER}, tolerance {COEFFICIENT_TOL:e}, largest entry {worst:.3e}"
                ),
            });
        }
        let current = cosine_pass(p, basis, &rule, next_panels);
        let change = previous
            .iter()
            .zip(&current)
            .fold(0.0f64, |w, (a, b)| w.max((a - b).abs()));
        if change <= COEFFICIENT_TOL {
            return Ok(current);
        }
        previous = current;
        panels = next_panels;
    }
}

/// One quadrature pass over all `2^d` orthant simplices of the pyramid.
fn cosine_pass(p: &Pyramid, basis: &CosineTensorBasis, rule: &GaussLegendre, panels: usize) -> Vec<f64> {
    let d = p.center.len();
    let h = p.half_width;
    let freqs = basis.frequencies() as usize;
    // 1D composite rule on [0, 1]
    let mut t_nodes = Vec::with_capacity(panels * rule.order());
    let mut t_weights = Vec::with_capacity(panels * rule.order());
    let width = 1.0 / panels as f64;
    for panel in 0..panels {
        let mid = (panel as f64 + 0.5) * width;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            t_nodes.push(mid + 0.5 * width * x);
            t_weights.push(0.5 * width * w);
        }
    }
    let q = t_nodes.len();
    let mut out = vec![0.0; basis.len()];
    // per node: weight and per-axis cosine tables
    let mut table = vec![0.0; d * freqs];
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    let mut flat_freqs = vec![0usize; d];
    for orthant in 0u32..(1u32 << d) {
        idx.iter_mut().for_each(|v| *v = 0);
        'nodes: loop {
            // collapsed coordinates: u_i = rem_{i-1} t_i, rem_i = rem_{i-1} - u_i
            let mut rem = h;
            let mut weight = 1.0;
            for i in 0..d {
                let t = t_nodes[idx[i]];
                weight *= t_weights[idx[i]] * rem;
                let u = rem * t;
                rem -= u;
                let sign = if orthant >> i & 1 == 1 { -1.0 } else { 1.0 };
                x[i] = p.center[i] + sign * u;
            }
            weight *= rem;
            for i in 0..d {
                for f in 0..freqs {
                    table[i * freqs + f] = CosineTensorBasis::eval_1d(f as u32, x[i]);
                }
            }
            for (flat, slot) in out.iter_mut().enumerate() {
                let mut rest = flat;
                for i in (0..d).rev() {
                    flat_freqs[i] = rest % freqs;
                    rest /= freqs;
                }
                let mut v = weight;
                for i in 0..d {
                    v *= table[i * freqs + flat_freqs[i]];
                }
                *slot += v;
            }
            let mut axis = d;
            loop {
                if axis == 0 {
                    break 'nodes;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < q {
                    break;
                }
                idx[axis] = 0;
            }
        }
    }
    out
}

/// `sum_k T_k ∧ 1/n`.
///
/// This is the classical form of the bound. The attainable floor is
/// [`averaged_risk_floor`], which lies between half of this value and this
/// value, so it can exceed the risk of a well-matched prior by up to a
/// factor of two.
pub fn risk_lower_bound(coeffs: &CoefficientMatrix, n: f64) -> Result<f64> {
    math::require_positive("n", n)?;
    let cap = 1.0 / n;
    Ok(coeffs.t_k().into_iter().map(|t| t.min(cap)).sum())
}

/// `sum_k T_k / (1 + n T_k)`: the minimum over diagonal priors of the
/// family-averaged risk, hence a lower bound on
/// `max_j E_{f_j} ||posterior mean - f_j||^2` for every GP prior diagonal in
/// the coefficient basis.
pub fn averaged_risk_floor(coeffs: &CoefficientMatrix, n: f64) -> Result<f64> {
    oracle_shrinkage_risk(coeffs.t_k(), n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridChoice {
    pub k: u64,
    pub m: u64,
}

/// `k = ceil((r_d n)^{1/(2d+2)})`, `m = k^d`.
pub fn choose_grid(d: u32, n: f64) -> Result<GridChoice> {
    if d == 0 {
        return Err(domain!("d must be at least 1"));
    }
    if !(n.is_finite() && n >= 1.0) {
        return Err(domain!("n must be at least 1, got {n}"));
    }
    let root = math::exp((math::ln_pyramid_constant(d) + math::ln(n)) / (2.0 * d as f64 + 2.0));
    let k = math::tolerant_ceil(root).max(1.0) as u64;
    let m = k
        .checked_pow(d)
        .ok_or_else(|| domain!("family size {k}^{d} overflows"))?;
    Ok(GridChoice { k, m })
}

/// Largest `k` with `k^d <= m`, for callers that supply a raw family size.
pub fn grid_from_family_size(d: u32, m: u64) -> Result<GridChoice> {
    if d == 0 || m == 0 {
        return Err(domain!("need d >= 1 and m >= 1"));
    }
    let mut k = math::floor(math::powf(m as f64, 1.0 / d as f64)).max(1.0) as u64;
    while k.checked_pow(d).is_none_or(|p| p > m) {
        k -= 1;
    }
    while (k + 1).checked_pow(d).is_some_and(|p| p <= m) {
        k += 1;
    }
    let grid = GridChoice { k, m: k.pow(d) };
    if grid.m != m {
        log::warn!(
            "family size {m} is not a perfect {d}-th power; using k = {k}, m = {}",
            grid.m
        );
    }
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremConstants {
    /// Contraction-rate constant `C_d = C_d' / 5`.
    pub c_d: f64,
    /// Posterior-mean risk constant `C_d'`.
    pub c_d_prime: f64,
    /// `(2+d)/(4+4d)`.
    pub rate_exponent: f64,
}

pub fn theorem_constants(d: u32) -> Result<TheoremConstants> {
    if d == 0 {
        return Err(domain!("d must be at least 1"));
    }
    let df = d as f64;
    let shared = df / (4.0 + 4.0 * df) * math::ln_pyramid_constant(d);
    let ln2 = core::f64::consts::LN_2;
    Ok(TheoremConstants {
        c_d: math::exp(shared - df * ln2 - math::ln(10.0)),
        c_d_prime: math::exp(shared - (df + 1.0) * ln2),
        rate_exponent: (2.0 + df) / (4.0 + 4.0 * df),
    })
}

/// `N(d, delta) = 2 (d+2)! 2^{(2d+2)^2/d} [32 ln(5/(1 - sqrt(1 - 4 delta)))]^{(d+2)/d}`,
/// evaluated in log space.
pub fn n_threshold(d: u32, delta: f64) -> Result<f64> {
    if d == 0 {
        return Err(domain!("d must be at least 1"));
    }
    let threshold = transfer_threshold(delta)?;
    let df = d as f64;
    let ln_n = core::f64::consts::LN_2
        + math::ln_factorial(d + 2)
        + (2.0 * df + 2.0) * (2.0 * df + 2.0) / df * core::f64::consts::LN_2
        + (df + 2.0) / df * math::ln(threshold);
    Ok(math::exp(ln_n))
}

/// `2 (d+2)!`: the sample size from which [`thm2_floor`] is claimed.
pub fn floor_sample_size(d: u32) -> Result<f64> {
    if d == 0 {
        return Err(domain!("d must be at least 1"));
    }
    Ok(2.0 * math::factorial(d + 2))
}

/// `C_d'^2 n^{-(2+d)/(2+2d)}`, the squared-risk floor.
pub fn thm2_floor(d: u32, n: f64) -> Result<f64> {
    math::require_positive("n", n)?;
    let c = theorem_constants(d)?;
    let df = d as f64;
    Ok(c.c_d_prime * c.c_d_prime * math::powf(n, -(2.0 + df) / (2.0 + 2.0 * df)))
}
