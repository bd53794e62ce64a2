//! Leja sequences (unweighted on an interval, and weighted by a density).
//!
//! Every node is the maximizer of a log-domain objective over a uniform
//! candidate grid, refined by golden-section search around the best
//! candidate and a derivative bisection. Sequences are nested, so computed nodes are cached and only
//! extended on demand.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use super::{check_count, check_interval, interpolatory_weights, Distribution, Rule1D};
use crate::{Result, SgError};

const GRID_POINTS: usize = 100_001;
const GOLDEN_ITERS: usize = 40;
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LejaVariant {
    Standard,
    Symmetric,
    PDisk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightedLejaVariant {
    Standard,
    Symmetric,
}

type CacheKey = (u8, [u64; 4]);

fn cache() -> &'static Mutex<HashMap<CacheKey, Vec<f64>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Vec<f64>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Returns the first `count` nodes of a cached sequence, extending it with
/// `extend` when it is too short.
fn cached_nodes(key: CacheKey, count: usize, extend: impl Fn(&mut Vec<f64>, usize)) -> Vec<f64> {
    if let Some(seq) = cache().lock().unwrap().get(&key) {
        if seq.len() >= count {
            return seq[..count].to_vec();
        }
    }
    let mut seq = cache().lock().unwrap().get(&key).cloned().unwrap_or_default();
    extend(&mut seq, count);
    let out = seq[..count].to_vec();
    let mut guard = cache().lock().unwrap();
    let entry = guard.entry(key).or_default();
    if entry.len() < seq.len() {
        *entry = seq;
    }
    out
}

/// Log of `w(t) * prod |t - t_k|`; `-inf` where the product vanishes.
fn log_objective(t: f64, nodes: &[f64], log_weight: &dyn Fn(f64) -> f64) -> f64 {
    let mut v = log_weight(t);
    for &s in nodes {
        v += (t - s).abs().ln();
    }
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Candidate grid used by the argmax search.
pub(crate) fn candidate_grid(lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    (0..GRID_POINTS).map(move |i| if i == GRID_POINTS - 1 { hi } else { lo + step * i as f64 })
}

/// Maximizer of the log objective on `[lo, hi]`: the rightmost best grid
/// candidate, refined by golden-section search over its neighbouring cells
/// and then polished by bisection on the derivative when it changes sign
/// there. A refined point is kept only if it does not lower the objective.
fn leja_argmax(
    lo: f64,
    hi: f64,
    nodes: &[f64],
    log_weight: &dyn Fn(f64) -> f64,
    d_log_weight: &dyn Fn(f64) -> f64,
) -> f64 {
    let f = |t: f64| log_objective(t, nodes, log_weight);
    let grid: Vec<f64> = candidate_grid(lo, hi).collect();
    let values: Vec<f64> = grid.iter().map(|&t| f(t)).collect();
    let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tol = TIE_TOL * best.abs().max(1.0);
    let mut idx = 0;
    for (i, &v) in values.iter().enumerate() {
        if v >= best - tol {
            idx = i;
        }
    }
    if !best.is_finite() {
        return grid[idx];
    }
    let cell = (grid[idx.saturating_sub(1)], grid[(idx + 1).min(grid.len() - 1)]);
    let (mut left, mut right) = cell;
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = right - ratio * (right - left);
    let mut x2 = left + ratio * (right - left);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..GOLDEN_ITERS {
        if f1 > f2 {
            right = x2;
            x2 = x1;
            f2 = f1;
            x1 = right - ratio * (right - left);
            f1 = f(x1);
        } else {
            left = x1;
            x1 = x2;
            f1 = f2;
            x2 = left + ratio * (right - left);
            f2 = f(x2);
        }
    }
    let (xr, fr) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
    let (mut best_x, best_f) = if fr >= values[idx] { (xr, fr) } else { (grid[idx], values[idx]) };
    let slope = |t: f64| d_log_weight(t) + nodes.iter().map(|&s| 1.0 / (t - s)).sum::<f64>();
    let (mut a, mut b) = cell;
    if slope(a) > 0.0 && slope(b) < 0.0 {
        loop {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if slope(mid) > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        let fb = f(a);
        if fb >= best_f - 1e-14 * best_f.abs().max(1.0) && fb >= values[idx] {
            best_x = a;
        }
    }
    best_x
}

/// Unweighted sequences on the reference interval `[0, 1]`.
fn reference_leja(variant: LejaVariant, count: usize) -> Vec<f64> {
    let key = (variant as u8, [0; 4]);
    cached_nodes(key, count, |seq, count| {
        if seq.is_empty() {
            seq.extend_from_slice(&[1.0, 0.0, 0.5]);
        }
        let flat = |_: f64| 0.0;
        while seq.len() < count {
            match variant {
                LejaVariant::Standard => {
                    let t = leja_argmax(0.0, 1.0, seq, &flat, &flat);
                    seq.push(t);
                }
                LejaVariant::Symmetric => {
                    let t = leja_argmax(0.0, 1.0, seq, &flat, &flat);
                    seq.push(t);
                    seq.push(1.0 - t);
                }
                LejaVariant::PDisk => {
                    // phi_{2j+2} = phi_{j+2}/2, phi_{2j+3} = phi_{2j+2} + pi
                    let phi = pdisk_angles(seq.len() + 2);
                    for &p in &phi[seq.len()..] {
                        seq.push(0.5 * (p.cos() + 1.0));
                    }
                }
            }
        }
    })
}

fn pdisk_angles(count: usize) -> Vec<f64> {
    use std::f64::consts::PI;
    let mut phi = vec![0.0, PI, 0.5 * PI];
    let mut j = 1;
    while phi.len() < count {
        let even = phi[j + 1] / 2.0;
        phi.push(even);
        phi.push(even + PI);
        j += 1;
    }
    phi.truncate(count.max(3));
    phi
}

/// Leja knots on `[a, b]` with weights for the uniform density.
pub fn leja_knots(count: usize, a: f64, b: f64, variant: LejaVariant) -> Result<Rule1D> {
    check_interval(a, b)?;
    check_count(count)?;
    let reference = reference_leja(variant, count);
    let weights = interpolatory_weights(&reference, &Distribution::uniform(0.0, 1.0))?;
    let nodes = reference.iter().map(|&t| a + (b - a) * t).collect();
    Ok(Rule1D { nodes, weights })
}

/// Initial search window for the weighted objective.
fn search_window(dist: &Distribution) -> (f64, f64) {
    match *dist {
        Distribution::Uniform { a, b } | Distribution::Beta { a, b, .. } => (a, b),
        Distribution::Normal { mu, sigma } => (mu - 10.0 * sigma, mu + 10.0 * sigma),
        Distribution::Exponential { lambda } => (0.0, 40.0 / lambda),
        Distribution::Gamma { alpha, beta } => (0.0, 40.0 * (alpha + 1.0) / beta),
    }
}

fn weighted_argmax(dist: &Distribution, nodes: &[f64]) -> f64 {
    let log_weight = |t: f64| 0.5 * dist.ln_pdf(t);
    let d_log_weight = |t: f64| 0.5 * dist.d_ln_pdf(t);
    let (mut lo, mut hi) = search_window(dist);
    let (slo, shi) = dist.support();
    loop {
        let t = leja_argmax(lo, hi, nodes, &log_weight, &d_log_weight);
        let margin = 0.01 * (hi - lo);
        let near_hi = shi.is_infinite() && hi - t < margin;
        let near_lo = slo.is_infinite() && t - lo < margin;
        if !(near_hi || near_lo) {
            return t;
        }
        let width = hi - lo;
        if slo.is_infinite() {
            let c = 0.5 * (lo + hi);
            lo = c - width;
            hi = c + width;
        } else {
            hi = lo + 2.0 * width;
        }
    }
}

fn dist_key(variant: WeightedLejaVariant, dist: &Distribution) -> CacheKey {
    let (tag, p) = match *dist {
        Distribution::Uniform { a, b } => (0, [a, b, 0.0, 0.0]),
        Distribution::Normal { mu, sigma } => (1, [mu, sigma, 0.0, 0.0]),
        Distribution::Exponential { lambda } => (2, [lambda, 0.0, 0.0, 0.0]),
        Distribution::Gamma { alpha, beta } => (3, [alpha, beta, 0.0, 0.0]),
        Distribution::Beta { a, b, alpha, beta } => (4, [a, b, alpha, beta]),
    };
    (16 + 8 * variant as u8 + tag, p.map(f64::to_bits))
}

/// Weighted Leja knots: node `j` maximizes `sqrt(rho(t)) prod_k |t - t_k|`.
/// The symmetric variant reflects every even node about the centre of a
/// symmetric density (normal, or beta with equal exponents).
pub fn weighted_leja_knots(count: usize, dist: &Distribution, variant: WeightedLejaVariant) -> Result<Rule1D> {
    dist.validate()?;
    check_count(count)?;
    let centre = match (variant, *dist) {
        (WeightedLejaVariant::Standard, _) => None,
        (WeightedLejaVariant::Symmetric, Distribution::Normal { mu, .. }) => Some(mu),
        (WeightedLejaVariant::Symmetric, Distribution::Beta { a, b, alpha, beta }) if alpha == beta => {
            Some(0.5 * (a + b))
        }
        (WeightedLejaVariant::Symmetric, Distribution::Uniform { a, b }) => Some(0.5 * (a + b)),
        (WeightedLejaVariant::Symmetric, Distribution::Beta { .. }) => {
            return Err(SgError::UnsupportedVariant(
                "symmetric weighted Leja requires a beta density with alpha == beta".into(),
            ))
        }
        (WeightedLejaVariant::Symmetric, _) => {
            return Err(SgError::UnsupportedVariant(
                "symmetric weighted Leja is available for normal and beta densities only".into(),
            ))
        }
    };
    let nodes = cached_nodes(dist_key(variant, dist), count, |seq, count| match centre {
        None => {
            while seq.len() < count {
                let t = weighted_argmax(dist, seq);
                seq.push(t);
            }
        }
        Some(c) => {
            if seq.is_empty() {
                seq.push(c);
            }
            while seq.len() < count {
                let t = weighted_argmax(dist, seq);
                seq.push(t);
                seq.push(c - (t - c));
            }
        }
    });
    let weights = interpolatory_weights(&nodes, dist)?;
    Ok(Rule1D { nodes, weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn standard_first_nodes_and_tie_break() {
        let r = leja_knots(3, 0.0, 1.0, LejaVariant::Standard).unwrap();
        assert_eq!(r.nodes, vec![1.0, 0.0, 0.5]);
        let r = leja_knots(4, 0.0, 1.0, LejaVariant::Standard).unwrap();
        assert_abs_diff_eq!(r.nodes[3], (3.0 + 3f64.sqrt()) / 6.0, epsilon = 1e-9);
    }

    #[test]
    fn standard_nodes_maximize_on_candidate_grid() {
        let r = leja_knots(12, 0.0, 1.0, LejaVariant::Standard).unwrap();
        let flat = |_: f64| 0.0;
        for j in 3..12 {
            let prev = &r.nodes[..j];
            let got = log_objective(r.nodes[j], prev, &flat);
            let grid_best =
                candidate_grid(0.0, 1.0).map(|t| log_objective(t, prev, &flat)).fold(f64::NEG_INFINITY, f64::max);
            assert!(got >= grid_best, "node {j}: {got} < {grid_best}");
        }
    }

    #[test]
    fn symmetric_and_pdisk() {
        let r = leja_knots(7, -1.0, 1.0, LejaVariant::Symmetric).unwrap();
        assert_eq!(&r.nodes[..3], &[1.0, -1.0, 0.0]);
        assert_abs_diff_eq!(r.nodes[3], -r.nodes[4], epsilon = 1e-15);
        assert_abs_diff_eq!(r.nodes[5], -r.nodes[6], epsilon = 1e-15);
        let r = leja_knots(3, -1.0, 1.0, LejaVariant::PDisk).unwrap();
        assert_abs_diff_eq!(r.nodes[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.nodes[1], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.nodes[2], 0.0, epsilon = 1e-15);
        let r = leja_knots(7, -1.0, 1.0, LejaVariant::PDisk).unwrap();
        let pi = std::f64::consts::PI;
        let expect = [pi / 4.0, 5.0 * pi / 4.0, pi / 8.0, 9.0 * pi / 8.0];
        for (t, phi) in r.nodes[3..].iter().zip(expect) {
            assert_abs_diff_eq!(*t, phi.cos(), epsilon = 1e-14);
        }
    }

    #[test]
    fn weighted_normal() {
        let n = Distribution::normal(0.0, 1.0);
        let r = weighted_leja_knots(1, &n, WeightedLejaVariant::Standard).unwrap();
        assert_abs_diff_eq!(r.nodes[0], 0.0, epsilon = 1e-9);
        let r = weighted_leja_knots(3, &n, WeightedLejaVariant::Symmetric).unwrap();
        assert_eq!(r.nodes[0], 0.0);
        assert_eq!(r.nodes[2], -r.nodes[1]);
        let r = weighted_leja_knots(5, &n, WeightedLejaVariant::Standard).unwrap();
        assert_abs_diff_eq!(r.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn weighted_weights_match_high_order_oracle() {
        let n = Distribution::normal(0.0, 1.0);
        let r = weighted_leja_knots(5, &n, WeightedLejaVariant::Standard).unwrap();
        let aux = super::super::gauss_knots(&n, 40).unwrap();
        for j in 0..5 {
            let lj = |x: f64| {
                let mut p = 1.0;
                for (k, &t) in r.nodes.iter().enumerate() {
                    if k != j {
                        p *= (x - t) / (r.nodes[j] - t);
                    }
                }
                p
            };
            assert_abs_diff_eq!(aux.integrate(lj), r.weights[j], epsilon = 1e-12);
        }
    }

    #[test]
    fn symmetric_rejected_for_one_sided_densities() {
        let e = Distribution::Exponential { lambda: 1.0 };
        assert!(matches!(
            weighted_leja_knots(3, &e, WeightedLejaVariant::Symmetric),
            Err(SgError::UnsupportedVariant(_))
        ));
        let g = Distribution::Gamma { alpha: 1.0, beta: 1.0 };
        assert!(weighted_leja_knots(3, &g, WeightedLejaVariant::Symmetric).is_err());
    }

    #[test]
    fn exponential_starts_at_mode() {
        let e = Distribution::Exponential { lambda: 2.0 };
        let r = weighted_leja_knots(4, &e, WeightedLejaVariant::Standard).unwrap();
        assert_eq!(r.nodes[0], 0.0);
        assert!(r.nodes.iter().all(|&t| t >= 0.0));
    }
}
