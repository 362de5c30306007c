//! Gaussian primitives: standard normal pdf/cdf, truncated first moments and
//! Gauss–Hermite quadrature for expectations over normal variables.

use std::f64::consts::PI;

use libm::erfc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Standard normal density.
#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF, accurate in both tails.
#[inline]
pub fn std_normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * erfc(-x / std::f64::consts::SQRT_2)
    }
}

/// `P(a < X < b)` for `X ~ N(mean, sd²)`. `sd` must be positive.
#[inline]
pub fn interval_probability(a: f64, b: f64, mean: f64, sd: f64) -> f64 {
    let za = (a - mean) / sd;
    let zb = (b - mean) / sd;
    // Evaluate in the upper tail when both limits are positive to avoid cancellation.
    if za > 0.0 {
        std_normal_cdf(-za) - std_normal_cdf(-zb)
    } else {
        std_normal_cdf(zb) - std_normal_cdf(za)
    }
}

/// `E[X · 1{a < X < b}]` for `X ~ N(0, sd²)`.
#[inline]
pub fn interval_first_moment(a: f64, b: f64, sd: f64) -> f64 {
    sd * (std_normal_pdf(a / sd) - std_normal_pdf(b / sd))
}

/// Standard normal quantile, by bisection on the CDF.
pub fn std_normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if std_normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Equal-probability strata of `N(0, sd²)` represented by their conditional
/// means, each with weight `1/n`. Exact for affine integrands and robust to
/// discontinuities, where Gauss–Hermite rules converge poorly.
pub fn normal_strata(n: usize, sd: f64) -> Vec<(f64, f64)> {
    let edges: Vec<f64> = (0..=n).map(|i| std_normal_quantile(i as f64 / n as f64)).collect();
    let w = 1.0 / n as f64;
    edges
        .windows(2)
        .map(|e| (sd * (std_normal_pdf(e[0]) - std_normal_pdf(e[1])) * n as f64, w))
        .collect()
}

/// Orthonormal Hermite value `p_n(z)` and the Newton denominator `√(2n) p_{n-1}(z)`.
fn hermite_orthonormal(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = PI.powf(-0.25);
    let mut p2 = 0.0;
    for j in 0..n {
        let jf = j as f64;
        let p3 = p2;
        p2 = p1;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    (p1, (2.0 * n as f64).sqrt() * p2)
}

/// Gauss–Hermite rule for the weight `exp(-x²)` on the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Builds an `n`-point rule: Golub–Welsch eigenvalues of the Jacobi
    /// matrix, each polished by Newton steps on the orthonormal recurrence.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Contract("Gauss-Hermite rule needs at least one node".into()));
        }
        let jacobi = DMatrix::from_fn(n, n, |i, j| {
            if i + 1 == j || j + 1 == i {
                (0.5 * i.max(j) as f64).sqrt()
            } else {
                0.0
            }
        });
        let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
        nodes.sort_by(f64::total_cmp);
        let mut weights = vec![0.0; n];
        for (x, w) in nodes.iter_mut().zip(weights.iter_mut()) {
            let mut z = *x;
            let mut pp = f64::NAN;
            for _ in 0..8 {
                let (p1, d) = hermite_orthonormal(n, z);
                pp = d;
                let step = p1 / pp;
                z -= step;
                if step.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            if !(z.is_finite() && pp.is_finite()) || (z - *x).abs() > 1e-6 * x.abs().max(1.0) {
                return Err(Error::NumericalFailure(format!("Gauss-Hermite node refinement failed for n = {n}")));
            }
            let (_, d) = hermite_orthonormal(n, z);
            *x = z;
            *w = 2.0 / (d * d);
        }
        // Enforce exact symmetry.
        for i in 0..n / 2 {
            let x = 0.5 * (nodes[n - 1 - i] - nodes[i]);
            let w = 0.5 * (weights[i] + weights[n - 1 - i]);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫ exp(-x²) f(x) dx`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Nodes and probability weights for `X ~ N(0, sd²)`: `E[f(X)] ≈ Σ p_i f(x_i)`.
    pub fn normal_points(&self, sd: f64) -> Vec<(f64, f64)> {
        let scale = std::f64::consts::SQRT_2 * sd;
        let norm = PI.sqrt();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| (scale * x, w / norm))
            .collect()
    }
}
