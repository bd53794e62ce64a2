//! One-dimensional stochastic diffusion problem with piecewise-constant
//! random coefficient: FEM solver, quantity of interest, forward UQ and
//! MAP / Laplace inversion on a sparse-grid surrogate.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal, Uniform};
use serde::Serialize;

use crate::evalkit::{evaluate_on_grid, gradient, quadrature, Domain, EvaluationTable, Interpolant};
use crate::grid::{build_sparse_grid, reduce, ReducedGrid, SparseGrid};
use crate::knots::{Distribution, KnotFamily};
use crate::levels::LevelMap;
use crate::midx::fast_td_set;
use crate::optim::NelderMead;
use crate::pce::{sobol_indices, PceFamily};
use crate::{Result, SgError};

pub const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Forcing term of the diffusion equation.
pub type Rhs = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `-(a u')' = rhs` on `(0, 1)`, `u(0) = u(1) = 0`, with
/// `a(x, y) = mu + sum_n sigma_n y_n 1[(n-1)/N, n/N](x)`.
#[derive(Clone)]
pub struct DiffusionModel {
    pub mu: f64,
    pub sigmas: Vec<f64>,
    pub mesh: usize,
    pub rhs: Rhs,
}

impl fmt::Debug for DiffusionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionModel")
            .field("mu", &self.mu)
            .field("sigmas", &self.sigmas)
            .field("mesh", &self.mesh)
            .finish_non_exhaustive()
    }
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 0..n {
        let l = if i > 0 { lower[i] } else { 0.0 };
        let denom = diag[i] - if i > 0 { l * c[i - 1] } else { 0.0 };
        if denom == 0.0 || !denom.is_finite() {
            return Err(SgError::Numerical("zero pivot in tridiagonal solve".into()));
        }
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - if i > 0 { l * d[i - 1] } else { 0.0 }) / denom;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

impl DiffusionModel {
    /// Model with unit forcing. Checks `mu - sqrt(3) max sigma_n > 0`.
    pub fn new(mu: f64, sigmas: Vec<f64>, mesh: usize) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(SgError::Parameter("need at least one random coefficient".into()));
        }
        if mesh < 2 {
            return Err(SgError::Parameter(format!("mesh needs at least 2 elements, got {mesh}")));
        }
        let smax = sigmas.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        if !(mu - SQRT3 * smax > 0.0) {
            return Err(SgError::Parameter(format!(
                "diffusion coefficient is not positive on the whole parameter box: mu = {mu}, max sigma = {smax}"
            )));
        }
        Ok(DiffusionModel { mu, sigmas, mesh, rhs: Arc::new(|_| 1.0) })
    }

    pub fn with_rhs(mut self, rhs: Rhs) -> Self {
        self.rhs = rhs;
        self
    }

    pub fn dim(&self) -> usize {
        self.sigmas.len()
    }

    /// Parameter box `[-sqrt(3), sqrt(3)]^N`.
    pub fn domain(&self) -> Domain {
        Domain { lower: vec![-SQRT3; self.dim()], upper: vec![SQRT3; self.dim()] }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.mesh).map(|i| i as f64 / self.mesh as f64).collect()
    }

    /// Mean of `a(., y)` over `[x0, x1]`.
    fn element_coefficient(&self, y: &[f64], x0: f64, x1: f64) -> f64 {
        let n = self.dim() as f64;
        let mut acc = 0.0;
        for (k, (&s, &yk)) in self.sigmas.iter().zip(y).enumerate() {
            let (g0, g1) = (k as f64 / n, (k + 1) as f64 / n);
            let overlap = (x1.min(g1) - x0.max(g0)).max(0.0);
            acc += s * yk * overlap;
        }
        self.mu + acc / (x1 - x0)
    }

    /// Nodal values of the P1 finite-element solution at `nodes()`.
    pub fn solve_nodal(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.dim() {
            return Err(SgError::DimensionMismatch { expected: self.dim(), got: y.len() });
        }
        let ne = self.mesh;
        let h = 1.0 / ne as f64;
        let g =
            [(0.5 - 0.5 * (0.6f64).sqrt(), 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + 0.5 * (0.6f64).sqrt(), 5.0 / 18.0)];
        let mut a = Vec::with_capacity(ne);
        let mut load = vec![0.0; ne + 1];
        for e in 0..ne {
            let (x0, x1) = (e as f64 * h, (e + 1) as f64 * h);
            let ae = self.element_coefficient(y, x0, x1);
            if !(ae > 0.0) {
                return Err(SgError::Model(format!(
                    "diffusion coefficient {ae} is not positive on element {e} at y = {y:?}"
                )));
            }
            a.push(ae);
            for &(t, w) in &g {
                let fx = (self.rhs)(x0 + t * h) * w * h;
                load[e] += fx * (1.0 - t);
                load[e + 1] += fx * t;
            }
        }
        let n = ne - 1;
        let diag: Vec<f64> = (1..ne).map(|i| (a[i - 1] + a[i]) / h).collect();
        let off: Vec<f64> = (1..ne).map(|i| -a[i] / h).collect();
        let lower: Vec<f64> = (1..ne).map(|i| -a[i - 1] / h).collect();
        let u = thomas(&lower, &diag, &off[..n], &load[1..ne])?;
        let mut out = Vec::with_capacity(ne + 1);
        out.push(0.0);
        out.extend(u);
        out.push(0.0);
        Ok(out)
    }

    /// FEM solution at `query` points in `[0, 1]`, by linear interpolation.
    pub fn fem_solve(&self, y: &[f64], query: &[f64]) -> Result<Vec<f64>> {
        let u = self.solve_nodal(y)?;
        let ne = self.mesh as f64;
        query
            .iter()
            .map(|&x| {
                if !(0.0..=1.0).contains(&x) {
                    return Err(SgError::Parameter(format!("query point {x} is outside [0, 1]")));
                }
                let s = x * ne;
                let e = (s.floor() as usize).min(self.mesh - 1);
                let t = s - e as f64;
                Ok(u[e] * (1.0 - t) + u[e + 1] * t)
            })
            .collect()
    }

    /// `I(y)`: trapezoidal integral of the FEM solution over `[0, 1]`.
    pub fn qoi(&self, y: &[f64]) -> Result<f64> {
        let u = self.solve_nodal(y)?;
        Ok(u.iter().sum::<f64>() / self.mesh as f64)
    }

    /// Solution at the interior mesh nodes.
    pub fn interior(&self, y: &[f64]) -> Result<Vec<f64>> {
        let u = self.solve_nodal(y)?;
        Ok(u[1..self.mesh].to_vec())
    }
}

/// Smolyak grid of Clenshaw–Curtis knots on `[-sqrt(3), sqrt(3)]^N`,
/// `sum(i - 1) <= w`, doubling level map.
pub fn prior_grid(dim: usize, w: u32) -> Result<(SparseGrid, ReducedGrid)> {
    let fam = vec![KnotFamily::ClenshawCurtis { a: -SQRT3, b: SQRT3 }; dim];
    let s = build_sparse_grid(&fast_td_set(dim, w)?, &fam, LevelMap::Doubling, None)?;
    let r = reduce(&s, None)?;
    Ok((s, r))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForwardReport {
    pub w: u32,
    pub grid_points: usize,
    pub mean: f64,
    pub variance: f64,
    pub sobol_principal: Vec<f64>,
    pub sobol_total: Vec<f64>,
    /// Surrogate values at uniform random samples of the parameter box.
    #[serde(skip)]
    pub samples: Vec<f64>,
}

/// Mean, variance, Sobol indices and surrogate samples of the QoI on the
/// prior grid of level `w`.
pub fn forward_uq(model: &DiffusionModel, w: u32, samples: usize, seed: u64) -> Result<ForwardReport> {
    let (s, r) = prior_grid(model.dim(), w)?;
    let mut report = forward_uq_on(model, &s, &r, samples, seed)?;
    report.w = w;
    Ok(report)
}

/// [`forward_uq`] on a given grid over the parameter box; `w` is reported
/// as the largest `sum(i - 1)` of the grid's multi-index set.
pub fn forward_uq_on(
    model: &DiffusionModel,
    s: &SparseGrid,
    r: &ReducedGrid,
    samples: usize,
    seed: u64,
) -> Result<ForwardReport> {
    let dim = model.dim();
    if s.dim != dim {
        return Err(SgError::DimensionMismatch { expected: dim, got: s.dim });
    }
    let qoi = crate::evalkit::TryFn(|y: &[f64]| model.qoi(y).map(|v| vec![v]).map_err(|e| e.to_string()));
    let values = evaluate_on_grid(&qoi, r, None)?.table;
    let mean = quadrature(&values, r)?[0];
    let second = quadrature(&values.map(|v| v * v), r)?[0];
    let domain = model.domain();
    let (sobol_principal, sobol_total) = sobol_indices(s, r, &values, &domain, PceFamily::Legendre)?;
    let samples = if samples > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = Uniform::new_inclusive(-SQRT3, SQRT3).map_err(|e| SgError::Parameter(e.to_string()))?;
        let pts: Vec<f64> = (0..samples * dim).map(|_| u.sample(&mut rng)).collect();
        Interpolant::new(s, r, &values)?.eval(&pts)?
    } else {
        Vec::new()
    };
    let w = s.set.iter().map(|i| i.iter().map(|&v| v - 1).sum::<u32>()).max().unwrap_or(0);
    Ok(ForwardReport {
        w,
        grid_points: r.size,
        mean,
        variance: second - mean * mean,
        sobol_principal,
        sobol_total,
        samples,
    })
}

/// Sparse-grid surrogate of a vector-valued map.
#[derive(Debug, Clone)]
pub struct Surrogate {
    pub grid: SparseGrid,
    pub reduced: ReducedGrid,
    pub values: EvaluationTable,
}

impl Surrogate {
    pub fn eval(&self, y: &[f64]) -> Result<Vec<f64>> {
        Interpolant::new(&self.grid, &self.reduced, &self.values)?.eval(y)
    }
}

/// Surrogate of the interior nodal values on the prior grid of level `w`.
pub fn solution_surrogate(model: &DiffusionModel, w: u32) -> Result<Surrogate> {
    let (grid, reduced) = prior_grid(model.dim(), w)?;
    let f = crate::evalkit::TryFn(|y: &[f64]| model.interior(y).map_err(|e| e.to_string()));
    let values = evaluate_on_grid(&f, &reduced, None)?.table;
    Ok(Surrogate { grid, reduced, values })
}

/// Interior nodal solution at `y_star` plus i.i.d. `N(0, sigma_eps^2)` noise.
pub fn synthetic_data(model: &DiffusionModel, y_star: &[f64], sigma_eps: f64, seed: u64) -> Result<Vec<f64>> {
    let mut u = model.interior(y_star)?;
    if sigma_eps > 0.0 {
        let noise = Normal::new(0.0, sigma_eps).map_err(|e| SgError::Parameter(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        u.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
    } else if sigma_eps < 0.0 {
        return Err(SgError::Parameter(format!("noise level must be >= 0, got {sigma_eps}")));
    }
    Ok(u)
}

/// Constant terms of the negative log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NllConvention {
    /// `K log sigma^2 + K log sqrt(2 pi)`.
    K,
    /// `(K - 2) log sigma^2 + (K - 2) log sqrt(2 pi)`, counting the two
    /// boundary nodes out.
    KMinus2,
}

/// Data, surrogate and misfits of the calibration problem.
pub struct InverseProblem<'a> {
    pub surrogate: &'a Surrogate,
    pub data: Vec<f64>,
    interp: Interpolant,
}

impl<'a> InverseProblem<'a> {
    pub fn new(surrogate: &'a Surrogate, data: Vec<f64>) -> Result<Self> {
        if data.len() != surrogate.values.outputs {
            return Err(SgError::DimensionMismatch { expected: surrogate.values.outputs, got: data.len() });
        }
        let interp = Interpolant::new(&surrogate.grid, &surrogate.reduced, &surrogate.values)?;
        Ok(InverseProblem { surrogate, data, interp })
    }

    pub fn k(&self) -> usize {
        self.data.len()
    }

    /// `data_k - U_k(y)`.
    pub fn misfits(&self, y: &[f64]) -> Result<Vec<f64>> {
        let u = self.interp.eval(y)?;
        Ok(self.data.iter().zip(u).map(|(d, v)| d - v).collect())
    }

    /// Least-squares functional `sum_k misfit_k^2`.
    pub fn ls(&self, y: &[f64]) -> Result<f64> {
        Ok(self.misfits(y)?.iter().map(|m| m * m).sum())
    }

    pub fn nll(&self, y: &[f64], sigma_eps: f64, convention: NllConvention) -> Result<f64> {
        let k = match convention {
            NllConvention::K => self.k() as f64,
            NllConvention::KMinus2 => self.k() as f64 - 2.0,
        };
        let s2 = sigma_eps * sigma_eps;
        Ok(self.ls(y)? / (2.0 * s2) + k * s2.ln() + k * (2.0 * std::f64::consts::PI).sqrt().ln())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InverseReport {
    pub y_map: Vec<f64>,
    pub ls_at_map: f64,
    pub sigma_eps: f64,
    pub sigma_post: Vec<Vec<f64>>,
    pub iterations: usize,
}

/// `sigma_eps^2 (J^T J)^{-1}`, symmetric, checked positive definite.
pub fn posterior_covariance(problem: &InverseProblem<'_>, y_map: &[f64], sigma_eps: f64) -> Result<Vec<Vec<f64>>> {
    let s = problem.surrogate;
    let dim = s.grid.dim;
    let domain = Domain::from_families(&s.grid.families);
    let k = problem.k();
    let mut jac = DMatrix::zeros(k, dim);
    for row in 0..k {
        let g = gradient(&s.grid, &s.reduced, &s.values.component(row), &domain, y_map, None)?;
        for n in 0..dim {
            jac[(row, n)] = -g[n];
        }
    }
    let jtj = jac.transpose() * &jac;
    let inv = jtj.try_inverse().ok_or_else(|| {
        SgError::Numerical("Jacobian of the misfits is rank deficient: singular posterior covariance".into())
    })?;
    let mut cov = inv * (sigma_eps * sigma_eps);
    cov = (&cov + cov.transpose()) * 0.5;
    if cov.clone().cholesky().is_none() {
        return Err(SgError::Numerical("posterior covariance is not positive definite".into()));
    }
    Ok((0..dim).map(|i| (0..dim).map(|j| cov[(i, j)]).collect()).collect())
}

/// Least-squares MAP point from `start`, noise estimate and Laplace
/// covariance.
pub fn invert(problem: &InverseProblem<'_>, start: &[f64]) -> Result<InverseReport> {
    let domain = Domain::from_families(&problem.surrogate.grid.families);
    let nm = NelderMead { bounds: Some((domain.lower.clone(), domain.upper.clone())), ..NelderMead::default() };
    let min = nm.minimize(|y| problem.ls(y).unwrap_or(f64::NAN), start)?;
    let sigma_eps = (min.value / problem.k() as f64).sqrt();
    let sigma_post = posterior_covariance(problem, &min.x, sigma_eps)?;
    Ok(InverseReport { y_map: min.x, ls_at_map: min.value, sigma_eps, sigma_post, iterations: min.iterations })
}

/// Cholesky factor `L` with `L L^T = cov`.
pub fn cholesky_lower(cov: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = cov.len();
    let m = DMatrix::from_fn(n, n, |i, j| cov[i][j]);
    let l = m.cholesky().ok_or_else(|| SgError::Numerical("covariance is not symmetric positive definite".into()))?.l();
    Ok((0..n).map(|i| (0..n).map(|j| l[(i, j)]).collect()).collect())
}

/// `y_map + H^T z` with `H^T H = cov`.
pub fn map_to_posterior(y_map: &[f64], lower: &[Vec<f64>], z: &[f64]) -> Vec<f64> {
    let z = DVector::from_column_slice(z);
    y_map.iter().enumerate().map(|(i, &m)| m + (0..z.len()).map(|j| lower[i][j] * z[j]).sum::<f64>()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorReport {
    pub grid_points: usize,
    pub mean: f64,
    pub variance: f64,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

/// Forward UQ of the QoI under the Gaussian posterior: Gauss–Hermite
/// Smolyak grid in the standard normal variables, mapped through
/// `y = y_map + H^T z`.
pub fn posterior_forward_uq(
    model: &DiffusionModel,
    y_map: &[f64],
    sigma_post: &[Vec<f64>],
    w: u32,
    samples: usize,
    seed: u64,
) -> Result<PosteriorReport> {
    let fam = vec![KnotFamily::Gauss { dist: Distribution::Normal { mu: 0.0, sigma: 1.0 } }; model.dim()];
    let s = build_sparse_grid(&fast_td_set(model.dim(), w)?, &fam, LevelMap::Linear, None)?;
    let r = reduce(&s, None)?;
    posterior_forward_uq_on(model, y_map, sigma_post, &s, &r, samples, seed)
}

/// [`posterior_forward_uq`] on a given grid for standard normal `z`.
pub fn posterior_forward_uq_on(
    model: &DiffusionModel,
    y_map: &[f64],
    sigma_post: &[Vec<f64>],
    s: &SparseGrid,
    r: &ReducedGrid,
    samples: usize,
    seed: u64,
) -> Result<PosteriorReport> {
    let dim = model.dim();
    if y_map.len() != dim || sigma_post.len() != dim || sigma_post.iter().any(|r| r.len() != dim) || s.dim != dim {
        return Err(SgError::DimensionMismatch { expected: dim, got: y_map.len() });
    }
    if s.families.iter().any(|f| f.distribution() != Distribution::normal(0.0, 1.0)) {
        return Err(SgError::Config("posterior grids need standard normal knots".into()));
    }
    let lower = cholesky_lower(sigma_post)?;
    let qoi = crate::evalkit::TryFn(|z: &[f64]| {
        model.qoi(&map_to_posterior(y_map, &lower, z)).map(|v| vec![v]).map_err(|e| e.to_string())
    });
    let values = evaluate_on_grid(&qoi, r, None)?.table;
    let mean = quadrature(&values, r)?[0];
    let second = quadrature(&values.map(|v| v * v), r)?[0];
    let samples = if samples > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<f64> = (0..samples * dim).map(|_| rand_distr::StandardNormal.sample(&mut rng)).collect();
        Interpolant::new(s, r, &values)?.eval(&pts)?
    } else {
        Vec::new()
    };
    Ok(PosteriorReport { grid_points: r.size, mean, variance: second - mean * mean, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_coefficient_is_nodally_exact() {
        let m = DiffusionModel::new(1.0, vec![0.0, 0.0], 300).unwrap();
        let u = m.solve_nodal(&[0.3, -0.4]).unwrap();
        for (x, v) in m.nodes().iter().zip(&u) {
            assert_abs_diff_eq!(*v, x * (1.0 - x) / 2.0, epsilon = 1e-10);
        }
        assert_eq!(u[0], 0.0);
        assert_eq!(u[300], 0.0);
        assert_abs_diff_eq!(m.qoi(&[0.0, 0.0]).unwrap(), 1.0 / 12.0, epsilon = 1e-6);
        let q = m.fem_solve(&[0.0, 0.0], &[0.0, 0.25, 1.0]).unwrap();
        assert_abs_diff_eq!(q[1], 0.25 * 0.75 / 2.0, epsilon = 1e-6);
        assert!(m.fem_solve(&[0.0, 0.0], &[1.5]).is_err());
    }

    #[test]
    fn two_material_flux_is_continuous() {
        let m = DiffusionModel::new(1.0, vec![0.5, 0.5], 200).unwrap();
        let y = [SQRT3, -SQRT3];
        let u = m.solve_nodal(&y).unwrap();
        let h = 1.0 / 200.0;
        let (a1, a2) = (1.0 + 0.5 * SQRT3, 1.0 - 0.5 * SQRT3);
        // flux q(x) = a u' = c - x, so the mid-element fluxes straddling x = 1/2
        // differ by exactly one element width
        let left = a1 * (u[100] - u[99]) / h;
        let right = a2 * (u[101] - u[100]) / h;
        assert_abs_diff_eq!(left - right, h, epsilon = 1e-8);
        let c = {
            let i1 = 0.5 / a1;
            let i2 = 0.5 / a2;
            let j1 = 0.125 / a1;
            let j2 = (0.5 - 0.125) / a2;
            (j1 + j2) / (i1 + i2)
        };
        let exact_mid = (c * 0.5 - 0.125) / a1;
        assert_abs_diff_eq!(u[100], exact_mid, epsilon = 1e-10);
    }

    #[test]
    fn qoi_decreases_with_diffusivity() {
        let m = DiffusionModel::new(1.0, vec![0.5, 0.1], 100).unwrap();
        let vals: Vec<f64> = (-4..=4).map(|k| m.qoi(&[k as f64 * 0.4, 0.2]).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn fem_converges_quadratically() {
        let exact = |x: f64| (std::f64::consts::PI * x).sin();
        let rhs: Rhs = Arc::new(|x: f64| {
            let p = std::f64::consts::PI;
            p * p * (p * x).sin()
        });
        let mut errs = Vec::new();
        for mesh in [25, 50, 100, 200] {
            let m = DiffusionModel::new(1.0, vec![0.0], mesh).unwrap().with_rhs(rhs.clone());
            let mids: Vec<f64> = (0..mesh).map(|e| (e as f64 + 0.5) / mesh as f64).collect();
            let u = m.fem_solve(&[0.0], &mids).unwrap();
            errs.push(mids.iter().zip(&u).map(|(&x, v)| (v - exact(x)).abs()).fold(0.0, f64::max));
        }
        for w in errs.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!(rate > 1.8, "{errs:?}");
        }
    }

    #[test]
    fn non_positive_coefficient_is_rejected() {
        assert!(DiffusionModel::new(1.0, vec![0.6], 10).is_err());
        let m = DiffusionModel::new(1.0, vec![0.5], 10).unwrap();
        assert!(matches!(m.solve_nodal(&[-3.0]), Err(SgError::Model(_))));
    }

    #[test]
    fn forward_report_matches_listing() {
        let m = DiffusionModel::new(1.0, vec![0.5, 0.1], 200).unwrap();
        let r = forward_uq(&m, 4, 100, 1).unwrap();
        assert_abs_diff_eq!(r.mean, 0.0935, epsilon = 5e-4);
        assert_abs_diff_eq!(r.variance, 0.0010, epsilon = 1e-4);
        assert_abs_diff_eq!(r.sobol_principal[0], 0.9709, epsilon = 5e-3);
        assert_abs_diff_eq!(r.sobol_principal[1], 0.0244, epsilon = 5e-3);
        assert_abs_diff_eq!(r.sobol_total[0], 0.9756, epsilon = 5e-3);
        assert_abs_diff_eq!(r.sobol_total[1], 0.0291, epsilon = 5e-3);
        assert_eq!(r.samples.len(), 100);
        let again = forward_uq(&m, 4, 100, 1).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn mean_converges_with_level() {
        let m = DiffusionModel::new(1.0, vec![0.5, 0.1], 200).unwrap();
        let qoi = |w| {
            let (_, r) = prior_grid(2, w).unwrap();
            let t = evaluate_on_grid(&|y: &[f64]| vec![m.qoi(y).unwrap()], &r, None).unwrap().table;
            quadrature(&t, &r).unwrap()[0]
        };
        let reference = qoi(10);
        let errs: Vec<f64> = (2..=8).map(|w| (qoi(w) - reference).abs()).collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    }

    #[test]
    fn inversion_recovers_the_truth() {
        let m = DiffusionModel::new(1.0, vec![0.5, 0.5], 81).unwrap();
        let s = solution_surrogate(&m, 5).unwrap();
        assert_eq!(s.values.outputs, 80);
        let y_star = [0.9, -1.1];
        let clean = InverseProblem::new(&s, synthetic_data(&m, &y_star, 0.0, 0).unwrap()).unwrap();
        let interp_err = s
            .eval(&y_star)
            .unwrap()
            .iter()
            .zip(m.interior(&y_star).unwrap())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(clean.ls(&y_star).unwrap() <= 80.0 * interp_err * interp_err);
        let rep = invert(&clean, &[0.0, 0.0]).unwrap();
        assert!(rep.sigma_eps <= 1e-4);
        let p = InverseProblem::new(&s, synthetic_data(&m, &y_star, 0.01, 7).unwrap()).unwrap();
        let rep = invert(&p, &[0.0, 0.0]).unwrap();
        assert!((rep.y_map[0] - 0.9).abs() < 0.1 && (rep.y_map[1] + 1.1).abs() < 0.1, "{rep:?}");
        assert!(rep.sigma_eps > 0.005 && rep.sigma_eps < 0.02);
        assert_eq!(rep.sigma_post[0][1], rep.sigma_post[1][0]);
        let a = p.nll(&[0.1, 0.2], 0.01, NllConvention::K).unwrap() - p.ls(&[0.1, 0.2]).unwrap() / 2e-4;
        let b = p.nll(&[-0.7, 1.0], 0.01, NllConvention::K).unwrap() - p.ls(&[-0.7, 1.0]).unwrap() / 2e-4;
        assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        let mut best = (f64::INFINITY, [0.0, 0.0]);
        let step = 0.002;
        for i in -20..=20 {
            for j in -20..=20 {
                let y = [rep.y_map[0] + i as f64 * step, rep.y_map[1] + j as f64 * step];
                let v = p.ls(&y).unwrap();
                if v < best.0 {
                    best = (v, y);
                }
            }
        }
        assert!((best.1[0] - rep.y_map[0]).abs() <= step && (best.1[1] - rep.y_map[1]).abs() <= step);
    }

    #[test]
    fn posterior_mapping_and_forward_uq() {
        let cov = vec![vec![0.0036, -0.0013], vec![-0.0013, 0.0009]];
        let l = cholesky_lower(&cov).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 20000;
        let mut acc = [[0.0; 2]; 2];
        for _ in 0..n {
            let z: Vec<f64> = (0..2).map(|_| rand_distr::StandardNormal.sample(&mut rng)).collect();
            let y = map_to_posterior(&[0.0, 0.0], &l, &z);
            for i in 0..2 {
                for j in 0..2 {
                    acc[i][j] += y[i] * y[j] / n as f64;
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(acc[i][j], cov[i][j], epsilon = 2e-4);
            }
        }
        let m = DiffusionModel::new(1.0, vec![0.5, 0.5], 100).unwrap();
        let prior = forward_uq(&m, 4, 0, 0).unwrap();
        let post = posterior_forward_uq(&m, &[0.88, -1.06], &cov, 4, 50, 1).unwrap();
        assert!(post.variance < 0.1 * prior.variance);
        let tiny = vec![vec![1e-14, 0.0], vec![0.0, 1e-14]];
        let point = posterior_forward_uq(&m, &[0.88, -1.06], &tiny, 2, 20, 1).unwrap();
        let at_map = m.qoi(&[0.88, -1.06]).unwrap();
        assert_abs_diff_eq!(point.mean, at_map, epsilon = 1e-9);
        assert!(point.samples.iter().all(|v| (v - at_map).abs() < 1e-6));
        assert!(posterior_forward_uq(&m, &[0.0, 0.0], &[vec![1.0, 2.0], vec![2.0, 1.0]], 2, 0, 0).is_err());
    }
}
