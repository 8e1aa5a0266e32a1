//! Quadrature: Gauss–Legendre rules, adaptive Gauss–Kronrod, and closed-form
//! integrals of clipped linear functions over axis-aligned boxes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on `P_order`, started from the Chebyshev-like
    /// guess `cos(pi (i - 1/4) / (order + 1/2))`.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n.div_ceil(2);
        for i in 0..half {
            let mut x = math::cos(core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5));
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let step = p / d;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            weights[i] = w;
            nodes[n - 1 - i] = x;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integrate over `[a, b]` with `panels` equal sub-intervals.
    pub fn composite(&self, f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let lo = a + p as f64 * h;
            let mid = lo + 0.5 * h;
            let mut s = 0.0;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                s += w * f(mid + 0.5 * h * x);
            }
            total += 0.5 * h * s;
        }
        total
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

/// Tensor-product composite Gauss–Legendre over the box `[lo, hi]` with
/// `panels` sub-intervals per axis.
pub fn tensor_composite(rule: &GaussLegendre, f: &dyn Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64], panels: usize) -> f64 {
    let d = lo.len();
    let q = rule.order();
    let per_axis = panels * q;
    // abscissae and weights per axis, flattened over (panel, node)
    let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..d)
        .map(|i| {
            let h = (hi[i] - lo[i]) / panels as f64;
            let mut xs = Vec::with_capacity(per_axis);
            let mut ws = Vec::with_capacity(per_axis);
            for p in 0..panels {
                let mid = lo[i] + (p as f64 + 0.5) * h;
                for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                    xs.push(mid + 0.5 * h * x);
                    ws.push(0.5 * h * w);
                }
            }
            (xs, ws)
        })
        .collect();
    let mut idx = vec![0usize; d];
    let mut point = vec![0.0; d];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for i in 0..d {
            point[i] = axes[i].0[idx[i]];
            w *= axes[i].1[idx[i]];
        }
        total += w * f(&point);
        // odometer
        let mut axis = d;
        loop {
            if axis == 0 {
                return total;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < per_axis {
                break;
            }
            idx[axis] = 0;
        }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod_15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Result of [`adaptive_integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
    pub intervals: usize,
}

/// Adaptive 15-point Gauss–Kronrod on `[a, b]`, first split at the given
/// interior breakpoints (kinks of the integrand). Bisects an interval until
/// `|K15 - G7| <= max(abs_tol, rel_tol |K15|)` scaled to its share of the
/// total length.
pub fn adaptive_integrate(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Integral> {
    const MAX_DEPTH: u32 = 50;
    let mut cuts: Vec<f64> = Vec::with_capacity(breakpoints.len() + 2);
    cuts.push(a);
    cuts.extend(breakpoints.iter().copied().filter(|x| *x > a && *x < b));
    cuts.push(b);
    cuts.sort_by(|x, y| x.total_cmp(y));
    cuts.dedup();

    let length = b - a;
    let mut out = Integral {
        value: 0.0,
        error_estimate: 0.0,
        intervals: 0,
    };
    if length == 0.0 {
        return Ok(out);
    }
    // explicit stack: (lo, hi, depth)
    let mut stack: Vec<(f64, f64, u32)> = cuts.windows(2).map(|w| (w[0], w[1], 0)).collect();
    stack.reverse();
    while let Some((lo, hi, depth)) = stack.pop() {
        let (value, err) = gauss_kronrod_15(f, lo, hi);
        let share = (hi - lo) / length;
        let tol = (abs_tol * share).max(rel_tol * value.abs());
        if err <= tol || hi - lo <= f64::EPSILON * length {
            out.value += value;
            out.error_estimate += err;
            out.intervals += 1;
        } else if depth >= MAX_DEPTH {
            return Err(Error::Numerical {
                message: format!("adaptive quadrature did not converge on [{a}, {b}]"),
                diagnostics: format!(
                    "interval [{lo}, {hi}] still has error {err:.3e} > tolerance {tol:.3e} after {depth} bisections"
                ),
            });
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    Ok(out)
}

/// `\int_{prod [lo_i, hi_i]} (c - sum_i u_i)_+^power du` in closed form.
///
/// Works in local coordinates `u = lo + v` so every term of the
/// inclusion–exclusion sum is at most of the size of the box, which keeps
/// cancellation bounded. Boxes that are entirely inside or outside the
/// half-space `sum u < c` skip the alternating sum.
pub fn clipped_box_integral(c: f64, lo: &[f64], hi: &[f64], power: u32) -> f64 {
    let d = lo.len();
    debug_assert_eq!(d, hi.len());
    let mut volume = 1.0;
    let mut widths = [0.0f64; 32];
    let widths = if d <= 32 {
        &mut widths[..d]
    } else {
        // `d > 32` is far outside anything the crate builds, but stay correct
        return clipped_box_integral_alloc(c, lo, hi, power);
    };
    let mut local_c = c;
    let mut total_width = 0.0;
    for i in 0..d {
        let w = hi[i] - lo[i];
        if w <= 0.0 {
            return 0.0;
        }
        widths[i] = w;
        volume *= w;
        local_c -= lo[i];
        total_width += w;
    }
    if local_c <= 0.0 {
        return 0.0;
    }
    if local_c >= total_width {
        // linear region everywhere: moments of a sum of independent uniforms
        let mean = local_c - 0.5 * total_width;
        return match power {
            0 => volume,
            1 => volume * mean,
            2 => {
                let var: f64 = widths.iter().map(|w| w * w / 12.0).sum();
                volume * (mean * mean + var)
            }
            _ => inclusion_exclusion(local_c, widths, power),
        };
    }
    inclusion_exclusion(local_c, widths, power)
}

fn clipped_box_integral_alloc(c: f64, lo: &[f64], hi: &[f64], power: u32) -> f64 {
    let widths: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| h - l).collect();
    if widths.iter().any(|w| *w <= 0.0) {
        return 0.0;
    }
    let local_c = c - lo.iter().sum::<f64>();
    if local_c <= 0.0 {
        return 0.0;
    }
    inclusion_exclusion(local_c, &widths, power)
}

/// `sum_S (-1)^{|S|} F(c - sum_{i in S} w_i)` with
/// `F(t) = power! t_+^{d+power} / (d+power)!`, the orthant integral of
/// `(t - sum v)_+^power`.
fn inclusion_exclusion(c: f64, widths: &[f64], power: u32) -> f64 {
    let d = widths.len();
    let exponent = d as u32 + power;
    let scale = math::factorial(power) / math::factorial(exponent);
    let mut total = 0.0;
    for mask in 0u64..(1u64 << d) {
        let mut t = c;
        for (i, w) in widths.iter().enumerate() {
            if mask >> i & 1 == 1 {
                t -= w;
            }
        }
        if t > 0.0 {
            let term = math::powi(t, exponent as i32);
            if mask.count_ones() % 2 == 0 {
                total += term;
            } else {
                total -= term;
            }
        }
    }
    (total * scale).max(0.0)
}
