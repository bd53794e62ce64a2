//! Univariate collocation knots and quadrature weights.
//!
//! Every rule is normalized against the probability density of its input:
//! the weights sum to one and `sum_j w_j f(t_j)` approximates `E[f(y)]`.

mod dist;
mod family;
mod gk;
mod leja;

use nalgebra::{DMatrix, SymmetricEigen};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

pub use dist::{ln_gamma, Distribution};
pub use family::KnotFamily;
pub use gk::{gk_knots, GK_SIZES};
pub use leja::{leja_knots, weighted_leja_knots, LejaVariant, WeightedLejaVariant};

use crate::{Result, SgError};

/// Nodes and pdf-normalized weights of a univariate rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_j w_j f(t_j)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&t, &w)| w * f(t)).sum()
    }
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if a.is_finite() && b.is_finite() && a < b {
        Ok(())
    } else {
        Err(SgError::Domain { a, b })
    }
}

fn check_count(count: usize) -> Result<()> {
    if count == 0 {
        Err(SgError::Contract("a univariate rule needs at least one knot".into()))
    } else {
        Ok(())
    }
}

/// Gauss rule for `dist` with `count` knots, from the eigendecomposition of
/// the symmetric tridiagonal recurrence (Jacobi) matrix. Nodes ascending.
pub fn gauss_knots(dist: &Distribution, count: usize) -> Result<Rule1D> {
    dist.validate()?;
    check_count(count)?;
    let (alpha, beta) = dist.recurrence(count);
    if count == 1 {
        return Ok(Rule1D { nodes: vec![alpha[0]], weights: vec![1.0] });
    }
    let mut jac = DMatrix::<f64>::zeros(count, count);
    for k in 0..count {
        jac[(k, k)] = alpha[k];
        if k + 1 < count {
            let off = beta[k + 1].sqrt();
            jac[(k, k + 1)] = off;
            jac[(k + 1, k)] = off;
        }
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> =
        (0..count).map(|j| (eig.eigenvalues[j], eig.eigenvectors[(0, j)].powi(2) * beta[0])).collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    Ok(Rule1D { nodes: pairs.iter().map(|p| p.0).collect(), weights: pairs.iter().map(|p| p.1 / total).collect() })
}

/// Clenshaw–Curtis rule on `[a, b]`: nodes `cos((j-1)pi/(K-1))` mapped from
/// `[-1, 1]` (so ordered from `b` down to `a`), weights by inverse FFT.
pub fn cc_knots(count: usize, a: f64, b: f64) -> Result<Rule1D> {
    check_interval(a, b)?;
    check_count(count)?;
    if count == 1 {
        return Ok(Rule1D { nodes: vec![0.5 * (a + b)], weights: vec![1.0] });
    }
    let n = count - 1;
    let ref_nodes = chebyshev_extrema(n);
    let ref_weights = cc_weights_fft(n);
    let half = 0.5 * (b - a);
    Ok(Rule1D {
        nodes: ref_nodes.iter().map(|&x| a + half * (x + 1.0)).collect(),
        weights: ref_weights.iter().map(|&w| 0.5 * w).collect(),
    })
}

/// `cos(k pi / n)`, `k = 0..=n`, via the sine form so that the set is exactly
/// symmetric and the middle node (odd count) is exactly zero.
fn chebyshev_extrema(n: usize) -> Vec<f64> {
    let nf = n as f64;
    (0..=n)
        .map(|k| {
            let m = n as i64 - 2 * k as i64;
            (std::f64::consts::PI * m as f64 / (2.0 * nf)).sin()
        })
        .collect()
}

/// Clenshaw–Curtis weights on `[-1, 1]` (summing to 2) for the `n + 1`
/// extrema of `T_n`, via an inverse FFT of length `n`.
fn cc_weights_fft(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0, 1.0];
    }
    let odd: Vec<f64> = (1..n).step_by(2).map(|v| v as f64).collect();
    let l = odd.len();
    let m = n - l;
    let mut v0 = Vec::with_capacity(n + 1);
    for &k in &odd {
        v0.push(2.0 / k / (k - 2.0));
    }
    v0.push(1.0 / odd[l - 1]);
    v0.resize(n + 1, 0.0);
    let nf = n as f64;
    let denom = nf * nf - 1.0 + (n % 2) as f64;
    let mut g = vec![-1.0; n];
    g[l] += nf;
    g[m] += nf;
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|k| {
            let v2 = -v0[k] - v0[n - k];
            Complex::new(v2 + g[k] / denom, 0.0)
        })
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_inverse(n).process(&mut buf);
    let mut w: Vec<f64> = buf.iter().map(|c| c.re / nf).collect();
    w.push(w[0]);
    w
}

/// Composite trapezoidal rule with `count` equispaced knots on `[a, b]`.
/// A single knot degenerates to the midpoint with weight one, which keeps
/// the rule usable with the doubling level map.
pub fn trap_knots(count: usize, a: f64, b: f64) -> Result<Rule1D> {
    check_interval(a, b)?;
    check_count(count)?;
    if count == 1 {
        return Ok(Rule1D { nodes: vec![0.5 * (a + b)], weights: vec![1.0] });
    }
    let h = 1.0 / (count - 1) as f64;
    let nodes = (0..count).map(|j| a + (b - a) * h * j as f64).collect();
    let weights = (0..count).map(|j| if j == 0 || j == count - 1 { 0.5 * h } else { h }).collect();
    Ok(Rule1D { nodes, weights })
}

/// Composite midpoint rule with `count` cells on `[a, b]`.
pub fn midpoint_knots(count: usize, a: f64, b: f64) -> Result<Rule1D> {
    check_interval(a, b)?;
    check_count(count)?;
    let h = 1.0 / count as f64;
    let nodes = (0..count).map(|j| a + (b - a) * (0.5 * h + h * j as f64)).collect();
    Ok(Rule1D { nodes, weights: vec![h; count] })
}

/// Integrals of the Lagrange basis on `nodes` against the density of `dist`,
/// using a Gauss rule of the same density with enough points to be exact.
pub(crate) fn interpolatory_weights(nodes: &[f64], dist: &Distribution) -> Result<Vec<f64>> {
    let n = nodes.len();
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let aux = gauss_knots(dist, (n + 1).div_ceil(2) + 10)?;
    let bary = barycentric_weights(nodes);
    let mut out = vec![0.0; n];
    let mut basis = vec![0.0; n];
    for (&x, &w) in aux.nodes.iter().zip(&aux.weights) {
        lagrange_basis(nodes, &bary, x, &mut basis);
        for (o, l) in out.iter_mut().zip(&basis) {
            *o += w * l;
        }
    }
    Ok(out)
}

/// Barycentric weights `1 / prod_{k != j} (t_j - t_k)`.
pub fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    (0..nodes.len())
        .map(|j| {
            let mut p = 1.0;
            for (k, &t) in nodes.iter().enumerate() {
                if k != j {
                    p *= nodes[j] - t;
                }
            }
            1.0 / p
        })
        .collect()
}

/// Values of all Lagrange basis polynomials at `x` (second barycentric form).
pub fn lagrange_basis(nodes: &[f64], bary: &[f64], x: f64, out: &mut [f64]) {
    if nodes.len() == 1 {
        out[0] = 1.0;
        return;
    }
    if let Some(hit) = nodes.iter().position(|&t| t == x) {
        out.iter_mut().for_each(|o| *o = 0.0);
        out[hit] = 1.0;
        return;
    }
    let mut total = 0.0;
    for ((o, &t), &b) in out.iter_mut().zip(nodes).zip(bary) {
        *o = b / (x - t);
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
}
