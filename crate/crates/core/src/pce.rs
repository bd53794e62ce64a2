//! Orthonormal polynomials, conversion of sparse-grid interpolants to
//! polynomial chaos expansions, and Sobol indices.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::evalkit::{Domain, EvaluationTable};
use crate::grid::{ReducedGrid, SparseGrid};
use crate::knots::Distribution;
use crate::levels::LevelMap;
use crate::midx::MultiIndexSet;
use crate::{Result, SgError};

/// Polynomial families, one per density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PceFamily {
    Legendre,
    Hermite,
    Laguerre,
    GeneralizedLaguerre,
    JacobiProb,
    Chebyshev,
}

impl PceFamily {
    pub fn name(self) -> &'static str {
        match self {
            PceFamily::Legendre => "legendre",
            PceFamily::Hermite => "hermite",
            PceFamily::Laguerre => "laguerre",
            PceFamily::GeneralizedLaguerre => "generalized_laguerre",
            PceFamily::JacobiProb => "jacobi_prob",
            PceFamily::Chebyshev => "chebyshev",
        }
    }
}

impl FromStr for PceFamily {
    type Err = SgError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_lowercase().replace('-', "_").as_str() {
            "legendre" | "lege" => PceFamily::Legendre,
            "hermite" | "herm" => PceFamily::Hermite,
            "laguerre" | "lagu" => PceFamily::Laguerre,
            "generalized_laguerre" | "generalized_lagu" => PceFamily::GeneralizedLaguerre,
            "jacobi_prob" | "jacobi" => PceFamily::JacobiProb,
            "chebyshev" | "cheb" => PceFamily::Chebyshev,
            _ => return Err(SgError::Config(format!("unknown polynomial family '{s}'"))),
        })
    }
}

impl fmt::Display for PceFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Univariate orthonormal basis: a family with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Basis {
    Legendre { a: f64, b: f64 },
    Hermite { mu: f64, sigma: f64 },
    Laguerre { lambda: f64 },
    GeneralizedLaguerre { alpha: f64, beta: f64 },
    JacobiProb { a: f64, b: f64, alpha: f64, beta: f64 },
    Chebyshev { a: f64, b: f64 },
}

impl Basis {
    pub fn family(&self) -> PceFamily {
        match self {
            Basis::Legendre { .. } => PceFamily::Legendre,
            Basis::Hermite { .. } => PceFamily::Hermite,
            Basis::Laguerre { .. } => PceFamily::Laguerre,
            Basis::GeneralizedLaguerre { .. } => PceFamily::GeneralizedLaguerre,
            Basis::JacobiProb { .. } => PceFamily::JacobiProb,
            Basis::Chebyshev { .. } => PceFamily::Chebyshev,
        }
    }

    /// Basis orthonormal against `dist`.
    pub fn for_distribution(dist: &Distribution) -> Self {
        match *dist {
            Distribution::Uniform { a, b } => Basis::Legendre { a, b },
            Distribution::Normal { mu, sigma } => Basis::Hermite { mu, sigma },
            Distribution::Exponential { lambda } => Basis::Laguerre { lambda },
            Distribution::Gamma { alpha, beta } => Basis::GeneralizedLaguerre { alpha, beta },
            Distribution::Beta { a, b, alpha, beta } => Basis::JacobiProb { a, b, alpha, beta },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Basis::Chebyshev { a, b } => {
                if a.is_finite() && b.is_finite() && a < b {
                    Ok(())
                } else {
                    Err(SgError::Domain { a, b })
                }
            }
            _ => self.distribution().expect("non-Chebyshev").validate(),
        }
    }

    fn distribution(&self) -> Option<Distribution> {
        Some(match *self {
            Basis::Legendre { a, b } => Distribution::Uniform { a, b },
            Basis::Hermite { mu, sigma } => Distribution::Normal { mu, sigma },
            Basis::Laguerre { lambda } => Distribution::Exponential { lambda },
            Basis::GeneralizedLaguerre { alpha, beta } => Distribution::Gamma { alpha, beta },
            Basis::JacobiProb { a, b, alpha, beta } => Distribution::Beta { a, b, alpha, beta },
            Basis::Chebyshev { .. } => return None,
        })
    }

    /// Monic three-term recurrence coefficients `alpha_k`, `beta_k`,
    /// `k < n`, for the probability density of the basis.
    fn recurrence(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        match *self {
            Basis::Chebyshev { a, b } => {
                let h = 0.5 * (b - a);
                let alpha = vec![0.5 * (a + b); n];
                let beta = (0..n).map(|k| match k {
                    0 => 1.0,
                    1 => 0.5 * h * h,
                    _ => 0.25 * h * h,
                });
                (alpha, beta.collect())
            }
            _ => self.distribution().expect("non-Chebyshev").recurrence(n),
        }
    }

    /// Values `P_0(y), ..., P_deg(y)` of the orthonormal polynomials.
    pub fn eval_upto(&self, deg: usize, y: f64) -> Vec<f64> {
        let (alpha, beta) = self.recurrence(deg + 1);
        let mut out = Vec::with_capacity(deg + 1);
        out.push(1.0);
        if deg >= 1 {
            out.push((y - alpha[0]) / beta[1].sqrt());
        }
        for k in 1..deg {
            let next = ((y - alpha[k]) * out[k] - beta[k].sqrt() * out[k - 1]) / beta[k + 1].sqrt();
            out.push(next);
        }
        out
    }
}

/// `prod_n P_{p_n}(y_n)` at each point (point-major, `bases.len()`
/// coordinates each).
pub fn eval_orthonormal(bases: &[Basis], degree: &[u32], points: &[f64]) -> Result<Vec<f64>> {
    let dim = bases.len();
    if degree.len() != dim {
        return Err(SgError::DimensionMismatch { expected: dim, got: degree.len() });
    }
    if dim == 0 || !points.len().is_multiple_of(dim) {
        return Err(SgError::DimensionMismatch { expected: dim, got: points.len() % dim.max(1) });
    }
    for b in bases {
        b.validate()?;
    }
    Ok(points
        .chunks_exact(dim)
        .map(|y| (0..dim).map(|n| bases[n].eval_upto(degree[n] as usize, y[n])[degree[n] as usize]).product())
        .collect())
}

/// A polynomial chaos expansion: `sum_p c_p P_p(y)` over the set `lambda`
/// of degrees. Coefficient `k` of degree row `q` is `coeffs[q * outputs + k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcExpansion {
    pub bases: Vec<Basis>,
    pub lambda: MultiIndexSet,
    pub outputs: usize,
    pub coeffs: Vec<f64>,
}

impl PcExpansion {
    pub fn dim(&self) -> usize {
        self.bases.len()
    }

    pub fn coeff(&self, degree: &[u32]) -> Option<&[f64]> {
        self.lambda.position(degree).map(|q| &self.coeffs[q * self.outputs..(q + 1) * self.outputs])
    }

    /// Rows ordered by total degree, then lexicographically.
    pub fn sorted_rows(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.lambda.len()).collect();
        let rows = self.lambda.rows();
        order.sort_by(|&x, &y| {
            let sx: u32 = rows[x].iter().sum();
            let sy: u32 = rows[y].iter().sum();
            sx.cmp(&sy).then_with(|| rows[x].cmp(&rows[y]))
        });
        order
    }
}

/// Degrees reachable from the index set: the union of the boxes
/// `{ p : p_n < m(i_n) }`.
pub fn pce_degree_set(set: &MultiIndexSet, level_map: LevelMap) -> Result<MultiIndexSet> {
    let mut rows = Vec::new();
    for idx in set.iter() {
        let m: Vec<u32> = idx.iter().map(|&i| level_map.apply(i).map(|v| v as u32)).collect::<Result<_>>()?;
        let mut p = vec![0u32; idx.len()];
        'odometer: loop {
            rows.push(p.clone());
            for n in 0..p.len() {
                p[n] += 1;
                if p[n] < m[n] {
                    continue 'odometer;
                }
                p[n] = 0;
            }
            break;
        }
    }
    MultiIndexSet::new(set.dim(), rows)
}

/// Bases of `family` matching the grid: bounds come from `domain` for
/// Legendre and Chebyshev, the other parameters from the knot densities.
pub fn bases_for(grid: &SparseGrid, domain: &Domain, family: PceFamily) -> Result<Vec<Basis>> {
    if domain.dim() != grid.dim {
        return Err(SgError::DimensionMismatch { expected: grid.dim, got: domain.dim() });
    }
    (0..grid.dim)
        .map(|n| {
            let (a, b) = (domain.lower[n], domain.upper[n]);
            let from_knots = Basis::for_distribution(&grid.families[n].distribution());
            let basis = match family {
                PceFamily::Legendre => Basis::Legendre { a, b },
                PceFamily::Chebyshev => Basis::Chebyshev { a, b },
                _ if from_knots.family() == family => from_knots,
                _ => {
                    return Err(SgError::Contract(format!(
                        "{family} polynomials do not match the {} knots of dimension {n}",
                        grid.families[n].name()
                    )))
                }
            };
            basis.validate()?;
            Ok(basis)
        })
        .collect()
}

fn inverse_vandermonde(basis: &Basis, nodes: &[f64]) -> Option<DMatrix<f64>> {
    let m = nodes.len();
    let mut v = DMatrix::zeros(m, m);
    for (j, &x) in nodes.iter().enumerate() {
        for (p, val) in basis.eval_upto(m - 1, x).into_iter().enumerate() {
            v[(j, p)] = val;
        }
    }
    let lu = v.lu();
    if !lu.is_invertible() {
        return None;
    }
    lu.try_inverse()
}

/// Modal coefficients of one tensor interpolant, laid out like the tensor
/// knots (first dimension fastest, outputs innermost).
fn tensor_modal(
    bases: &[Basis],
    knots_per_dim: &[Vec<f64>],
    idx: &[u32],
    mut data: Vec<f64>,
    v: usize,
) -> Result<Vec<f64>> {
    let mut stride = v;
    let total = data.len();
    for (n, nodes) in knots_per_dim.iter().enumerate() {
        let m = nodes.len();
        if m > 1 {
            let inv =
                inverse_vandermonde(&bases[n], nodes).ok_or(SgError::SingularVandermonde { idx: idx.to_vec() })?;
            let block = stride * m;
            let mut fiber = vec![0.0; m];
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    for (a, x) in fiber.iter_mut().enumerate() {
                        *x = data[outer + inner + a * stride];
                    }
                    for p in 0..m {
                        let mut s = 0.0;
                        for (a, &x) in fiber.iter().enumerate() {
                            s += inv[(p, a)] * x;
                        }
                        data[outer + inner + p * stride] = s;
                    }
                }
            }
        }
        stride *= m;
    }
    Ok(data)
}

/// Rewrites the sparse-grid interpolant in the orthonormal basis `bases`
/// by solving a Vandermonde system per tensor grid.
pub fn convert_to_modal_with(
    grid: &SparseGrid,
    reduced: &ReducedGrid,
    values: &EvaluationTable,
    bases: &[Basis],
) -> Result<PcExpansion> {
    if bases.len() != grid.dim {
        return Err(SgError::DimensionMismatch { expected: grid.dim, got: bases.len() });
    }
    if values.points != reduced.size {
        return Err(SgError::DimensionMismatch { expected: reduced.size, got: values.points });
    }
    if reduced.n.len() != grid.extended_size() {
        return Err(SgError::DimensionMismatch { expected: grid.extended_size(), got: reduced.n.len() });
    }
    let v = values.outputs;
    let lambda = pce_degree_set(&grid.set, grid.level_map)?;
    let offsets = grid.tensor_offsets();
    let parts: Vec<Result<Vec<f64>>> = grid
        .tensors
        .par_iter()
        .zip(offsets.par_iter())
        .map(|(t, &off)| {
            let mut data = Vec::with_capacity(t.size * v);
            for j in 0..t.size {
                data.extend_from_slice(values.column(reduced.n[off + j]));
            }
            tensor_modal(bases, &t.knots_per_dim, &t.idx, data, v)
        })
        .collect();
    let rows: HashMap<&[u32], usize> = lambda.iter().enumerate().map(|(q, r)| (r.as_slice(), q)).collect();
    let mut coeffs = vec![0.0; lambda.len() * v];
    let mut p = vec![0u32; grid.dim];
    for (t, part) in grid.tensors.iter().zip(parts) {
        let part = part?;
        let c = t.coeff as f64;
        for j in 0..t.size {
            let mut r = j;
            for n in 0..grid.dim {
                p[n] = (r % t.m[n]) as u32;
                r /= t.m[n];
            }
            let q = *rows
                .get(p.as_slice())
                .ok_or_else(|| SgError::Contract(format!("degree {p:?} outside the PCE set")))?;
            for k in 0..v {
                coeffs[q * v + k] += c * part[j * v + k];
            }
        }
    }
    Ok(PcExpansion { bases: bases.to_vec(), lambda, outputs: v, coeffs })
}

/// [`convert_to_modal_with`] with bases built by [`bases_for`].
pub fn convert_to_modal(
    grid: &SparseGrid,
    reduced: &ReducedGrid,
    values: &EvaluationTable,
    domain: &Domain,
    family: PceFamily,
) -> Result<PcExpansion> {
    let bases = bases_for(grid, domain, family)?;
    convert_to_modal_with(grid, reduced, values, &bases)
}

/// Expansion values at `points` (point-major); output is point-major with
/// `outputs` entries per point.
pub fn evaluate_pce(pce: &PcExpansion, points: &[f64]) -> Result<Vec<f64>> {
    let dim = pce.dim();
    if !points.len().is_multiple_of(dim) {
        return Err(SgError::DimensionMismatch { expected: dim, got: points.len() % dim });
    }
    let maxdeg = pce.lambda.max_per_dim();
    let v = pce.outputs;
    let mut out = vec![0.0; points.len() / dim * v];
    out.par_chunks_mut(v).zip(points.par_chunks_exact(dim)).for_each(|(o, y)| {
        let tables: Vec<Vec<f64>> = (0..dim).map(|n| pce.bases[n].eval_upto(maxdeg[n] as usize, y[n])).collect();
        for (q, p) in pce.lambda.iter().enumerate() {
            let basis: f64 = p.iter().enumerate().map(|(n, &d)| tables[n][d as usize]).product();
            for k in 0..v {
                o[k] += pce.coeffs[q * v + k] * basis;
            }
        }
    });
    Ok(out)
}

/// Variance `sum_{p != 0} c_p^2` per output.
pub fn pce_variance(pce: &PcExpansion) -> Vec<f64> {
    let v = pce.outputs;
    let mut var = vec![0.0; v];
    for (q, p) in pce.lambda.iter().enumerate() {
        if p.iter().any(|&d| d > 0) {
            for k in 0..v {
                var[k] += pce.coeffs[q * v + k].powi(2);
            }
        }
    }
    var
}

/// Principal and total Sobol indices from the expansion of a scalar function.
pub fn sobol_from_pce(pce: &PcExpansion) -> Result<(Vec<f64>, Vec<f64>)> {
    if pce.outputs != 1 {
        return Err(SgError::Contract(format!("Sobol indices need a single output, got {}", pce.outputs)));
    }
    let dim = pce.dim();
    let var = pce_variance(pce)[0];
    let energy: f64 = pce.coeffs.iter().map(|c| c * c).sum();
    if !(var > 1e-24 * energy) {
        return Err(SgError::Degenerate("zero variance: Sobol indices are undefined for a constant function".into()));
    }
    let mut principal = vec![0.0; dim];
    let mut total = vec![0.0; dim];
    for (q, p) in pce.lambda.iter().enumerate() {
        let c2 = pce.coeffs[q].powi(2);
        let nonzero: Vec<usize> = (0..dim).filter(|&n| p[n] > 0).collect();
        if nonzero.len() == 1 {
            principal[nonzero[0]] += c2;
        }
        for &n in &nonzero {
            total[n] += c2;
        }
    }
    principal.iter_mut().chain(total.iter_mut()).for_each(|s| *s /= var);
    Ok((principal, total))
}

/// Principal and total Sobol indices of a scalar sparse-grid surrogate.
pub fn sobol_indices(
    grid: &SparseGrid,
    reduced: &ReducedGrid,
    values: &EvaluationTable,
    domain: &Domain,
    family: PceFamily,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if values.outputs != 1 {
        return Err(SgError::Contract(format!("Sobol indices need a single output, got {}", values.outputs)));
    }
    sobol_from_pce(&convert_to_modal(grid, reduced, values, domain, family)?)
}
