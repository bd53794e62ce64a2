//! Function evaluation on sparse grids, quadrature, interpolation and
//! finite-difference derivatives of the interpolant.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dedup::PointIndex;
use crate::grid::{ReducedGrid, SparseGrid, TensorGrid};
use crate::knots::{barycentric_weights, lagrange_basis, KnotFamily};
use crate::{Result, SgError};

/// Values of a (possibly vector-valued) function at the reduced knots,
/// stored knot by knot: entry `(k, p)` is `values[p * outputs + k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationTable {
    pub outputs: usize,
    pub points: usize,
    pub values: Vec<f64>,
}

impl EvaluationTable {
    pub fn new(outputs: usize, points: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != outputs * points {
            return Err(SgError::DimensionMismatch { expected: outputs * points, got: values.len() });
        }
        Ok(EvaluationTable { outputs, points, values })
    }

    pub fn column(&self, p: usize) -> &[f64] {
        &self.values[p * self.outputs..(p + 1) * self.outputs]
    }

    pub fn get(&self, k: usize, p: usize) -> f64 {
        self.values[p * self.outputs + k]
    }

    /// One output component as a single-output table.
    pub fn component(&self, k: usize) -> EvaluationTable {
        EvaluationTable { outputs: 1, points: self.points, values: (0..self.points).map(|p| self.get(k, p)).collect() }
    }

    /// Entrywise map, e.g. squaring values for second moments.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> EvaluationTable {
        EvaluationTable {
            outputs: self.outputs,
            points: self.points,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Bounding box of the parameter space; unbounded ends are infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(SgError::DimensionMismatch { expected: lower.len(), got: upper.len() });
        }
        for (&a, &b) in lower.iter().zip(&upper) {
            if a.is_nan() || b.is_nan() || a >= b {
                return Err(SgError::Domain { a, b });
            }
        }
        Ok(Domain { lower, upper })
    }

    /// Supports of the densities of the given families.
    pub fn from_families(families: &[KnotFamily]) -> Self {
        let (lower, upper) = families.iter().map(|f| f.distribution().support()).unzip();
        Domain { lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        y.iter().zip(self.lower.iter().zip(&self.upper)).all(|(&v, (&a, &b))| v >= a && v <= b)
    }
}

/// A function of the parameters with vector output. Implementations must be
/// safe to call from several threads at once.
pub trait Model: Sync {
    fn eval(&self, y: &[f64]) -> std::result::Result<Vec<f64>, String>;
}

impl<F> Model for F
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    fn eval(&self, y: &[f64]) -> std::result::Result<Vec<f64>, String> {
        Ok(self(y))
    }
}

/// Adapter for fallible closures.
pub struct TryFn<F>(pub F);

impl<F> Model for TryFn<F>
where
    F: Fn(&[f64]) -> std::result::Result<Vec<f64>, String> + Sync,
{
    fn eval(&self, y: &[f64]) -> std::result::Result<Vec<f64>, String> {
        (self.0)(y)
    }
}

/// Evaluates `f` at every point (point-major storage) in parallel. The first
/// failure in point order is reported with its point.
pub fn evaluate_points(f: &dyn Model, dim: usize, points: &[f64]) -> Result<(usize, Vec<f64>)> {
    let results: Vec<std::result::Result<Vec<f64>, String>> = points.par_chunks_exact(dim).map(|y| f.eval(y)).collect();
    let mut outputs = None;
    let mut values = Vec::new();
    for (y, r) in points.chunks_exact(dim).zip(results) {
        let v = r.map_err(|message| SgError::Evaluation { knot: y.to_vec(), message })?;
        let expected = *outputs.get_or_insert(v.len());
        if v.len() != expected || expected == 0 {
            return Err(SgError::Evaluation {
                knot: y.to_vec(),
                message: format!("expected {expected} outputs, got {}", v.len()),
            });
        }
        if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
            return Err(SgError::Evaluation { knot: y.to_vec(), message: format!("non-finite output {bad}") });
        }
        values.extend(v);
    }
    Ok((outputs.unwrap_or(0), values))
}

/// Previous evaluations that may be reused.
#[derive(Debug, Clone, Copy)]
pub struct Recycle<'a> {
    pub values: &'a EvaluationTable,
    pub reduced: &'a ReducedGrid,
}

/// Evaluations plus the number of actual calls of `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluated {
    pub table: EvaluationTable,
    pub new_evals: usize,
}

/// Evaluates `f` at the reduced knots. Knots that match a knot of `old`
/// (under the dedup tolerance of `reduced`) copy the old values.
pub fn evaluate_on_grid(f: &dyn Model, reduced: &ReducedGrid, old: Option<Recycle<'_>>) -> Result<Evaluated> {
    let dim = reduced.dim;
    let mut source: Vec<Option<usize>> = vec![None; reduced.size];
    if let Some(old) = old {
        if old.reduced.dim != dim {
            return Err(SgError::DimensionMismatch { expected: dim, got: old.reduced.dim });
        }
        if old.values.points != old.reduced.size {
            return Err(SgError::DimensionMismatch { expected: old.reduced.size, got: old.values.points });
        }
        let mut index = PointIndex::new(PointIndex::scaled_tolerance(dim, &reduced.knots, reduced.tol));
        for y in old.reduced.iter_knots() {
            index.insert(y);
        }
        for (p, y) in reduced.iter_knots().enumerate() {
            source[p] = index.find(y);
        }
    }
    let fresh: Vec<usize> = (0..reduced.size).filter(|&p| source[p].is_none()).collect();
    let mut pts = Vec::with_capacity(fresh.len() * dim);
    for &p in &fresh {
        pts.extend_from_slice(reduced.knot(p));
    }
    let (mut outputs, new_values) = evaluate_points(f, dim, &pts)?;
    if let Some(old) = old {
        if fresh.is_empty() {
            outputs = old.values.outputs;
        } else if outputs != old.values.outputs {
            return Err(SgError::DimensionMismatch { expected: old.values.outputs, got: outputs });
        }
    }
    let mut values = vec![0.0; outputs * reduced.size];
    let mut next = 0;
    for p in 0..reduced.size {
        let dst = &mut values[p * outputs..(p + 1) * outputs];
        match source[p] {
            Some(q) => dst.copy_from_slice(old.expect("source implies old").values.column(q)),
            None => {
                dst.copy_from_slice(&new_values[next * outputs..(next + 1) * outputs]);
                next += 1;
            }
        }
    }
    Ok(Evaluated { table: EvaluationTable { outputs, points: reduced.size, values }, new_evals: fresh.len() })
}

/// `sum_p w_p f(y_p)` per output component.
pub fn quadrature(values: &EvaluationTable, reduced: &ReducedGrid) -> Result<Vec<f64>> {
    if values.points != reduced.size {
        return Err(SgError::DimensionMismatch { expected: reduced.size, got: values.points });
    }
    let mut out = vec![0.0; values.outputs];
    for (p, &w) in reduced.weights.iter().enumerate() {
        for (o, &v) in out.iter_mut().zip(values.column(p)) {
            *o += w * v;
        }
    }
    Ok(out)
}

/// Evaluates `f` on the grid and integrates it.
pub fn quadrature_fn(f: &dyn Model, reduced: &ReducedGrid) -> Result<(Vec<f64>, EvaluationTable)> {
    let table = evaluate_on_grid(f, reduced, None)?.table;
    Ok((quadrature(&table, reduced)?, table))
}

/// Lagrange interpolant on one tensor grid, scaled by a coefficient.
pub(crate) struct TensorInterp {
    coeff: f64,
    nodes: Vec<Vec<f64>>,
    bary: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl TensorInterp {
    /// `values` holds the `outputs` values of every tensor knot, knot by knot.
    pub(crate) fn new(t: &TensorGrid, values: Vec<f64>, coeff: f64) -> Self {
        TensorInterp {
            coeff,
            bary: t.knots_per_dim.iter().map(|n| barycentric_weights(n)).collect(),
            nodes: t.knots_per_dim.clone(),
            values,
        }
    }

    /// Adds `coeff * U(y)` to `out`.
    pub(crate) fn add_at(&self, y: &[f64], out: &mut [f64], scratch: &mut Vec<f64>, basis: &mut Vec<f64>) {
        let v = out.len();
        scratch.clear();
        scratch.extend_from_slice(&self.values);
        let mut len = self.values.len() / v;
        for (n, nodes) in self.nodes.iter().enumerate() {
            let m = nodes.len();
            basis.resize(m, 0.0);
            lagrange_basis(nodes, &self.bary[n], y[n], basis);
            let rest = len / m;
            for r in 0..rest {
                for k in 0..v {
                    let mut s = 0.0;
                    for (a, &l) in basis.iter().enumerate() {
                        s += l * scratch[(r * m + a) * v + k];
                    }
                    scratch[r * v + k] = s;
                }
            }
            len = rest;
        }
        for k in 0..v {
            out[k] += self.coeff * scratch[k];
        }
    }
}

/// Sparse-grid interpolant with per-tensor data gathered once.
pub struct Interpolant {
    dim: usize,
    outputs: usize,
    tensors: Vec<TensorInterp>,
    domain: Domain,
}

impl Interpolant {
    pub fn new(grid: &SparseGrid, reduced: &ReducedGrid, values: &EvaluationTable) -> Result<Self> {
        if values.points != reduced.size {
            return Err(SgError::DimensionMismatch { expected: reduced.size, got: values.points });
        }
        if reduced.n.len() != grid.extended_size() {
            return Err(SgError::DimensionMismatch { expected: grid.extended_size(), got: reduced.n.len() });
        }
        let v = values.outputs;
        let mut tensors = Vec::with_capacity(grid.tensors.len());
        let mut offset = 0;
        for t in &grid.tensors {
            let mut vals = Vec::with_capacity(t.size * v);
            for j in 0..t.size {
                vals.extend_from_slice(values.column(reduced.n[offset + j]));
            }
            offset += t.size;
            tensors.push(TensorInterp::new(t, vals, t.coeff as f64));
        }
        Ok(Interpolant { dim: grid.dim, outputs: v, tensors, domain: Domain::from_families(&grid.families) })
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    fn eval_one(&self, y: &[f64], out: &mut [f64], scratch: &mut Vec<f64>, basis: &mut Vec<f64>) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for t in &self.tensors {
            t.add_at(y, out, scratch, basis);
        }
    }

    /// Values at `points` (point-major); output is point-major too.
    pub fn eval(&self, points: &[f64]) -> Result<Vec<f64>> {
        if !points.len().is_multiple_of(self.dim) {
            return Err(SgError::DimensionMismatch { expected: self.dim, got: points.len() % self.dim });
        }
        let outside = points.chunks_exact(self.dim).filter(|y| !self.domain.contains(y)).count();
        if outside > 0 {
            log::warn!("{outside} query point(s) outside the grid domain; the interpolant extrapolates");
        }
        let v = self.outputs;
        let mut out = vec![0.0; points.len() / self.dim * v];
        out.par_chunks_mut(v)
            .zip(points.par_chunks_exact(self.dim))
            .for_each_init(|| (Vec::new(), Vec::new()), |(scratch, basis), (o, y)| self.eval_one(y, o, scratch, basis));
        Ok(out)
    }
}

/// Sparse-grid interpolant evaluated at `points` (point-major, `dim`
/// coordinates each). Output entry `(k, q)` is at `q * outputs + k`.
pub fn interpolate(
    grid: &SparseGrid,
    reduced: &ReducedGrid,
    values: &EvaluationTable,
    points: &[f64],
) -> Result<Vec<f64>> {
    if !points.len().is_multiple_of(grid.dim) {
        return Err(SgError::DimensionMismatch { expected: grid.dim, got: points.len() % grid.dim });
    }
    Interpolant::new(grid, reduced, values)?.eval(points)
}

fn default_step(domain: &Domain, n: usize, y: f64, ratio: f64) -> f64 {
    let (a, b) = (domain.lower[n], domain.upper[n]);
    if a.is_finite() && b.is_finite() {
        (b - a) * ratio
    } else {
        1e-5 * y.abs().max(1.0)
    }
}

/// First-derivative stencil `(offset, coefficient)` along one dimension:
/// centred, or one-sided second order when the centred points would leave
/// the domain.
fn first_stencil(y: f64, h: f64, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    if y - h < lo && y + 2.0 * h <= hi {
        vec![(0.0, -1.5 / h), (h, 2.0 / h), (2.0 * h, -0.5 / h)]
    } else if y + h > hi && y - 2.0 * h >= lo {
        vec![(0.0, 1.5 / h), (-h, -2.0 / h), (-2.0 * h, 0.5 / h)]
    } else {
        vec![(-h, -0.5 / h), (h, 0.5 / h)]
    }
}

fn second_stencil(y: f64, h: f64, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let h2 = h * h;
    if y - h < lo && y + 3.0 * h <= hi {
        vec![(0.0, 2.0 / h2), (h, -5.0 / h2), (2.0 * h, 4.0 / h2), (3.0 * h, -1.0 / h2)]
    } else if y + h > hi && y - 3.0 * h >= lo {
        vec![(0.0, 2.0 / h2), (-h, -5.0 / h2), (-2.0 * h, 4.0 / h2), (-3.0 * h, -1.0 / h2)]
    } else {
        vec![(-h, 1.0 / h2), (0.0, -2.0 / h2), (h, 1.0 / h2)]
    }
}

fn single_output(values: &EvaluationTable) -> Result<()> {
    if values.outputs != 1 {
        return Err(SgError::Contract(format!(
            "derivatives need a single-output table, got {} outputs",
            values.outputs
        )));
    }
    Ok(())
}

fn check_step(h: Option<f64>) -> Result<()> {
    if let Some(h) = h {
        if !(h.is_finite() && h > 0.0) {
            return Err(SgError::Contract(format!("finite-difference step must be positive, got {h}")));
        }
    }
    Ok(())
}

/// Finite-difference gradient of the interpolant at each point; column `q`
/// of the `N x Q` result (point-major) is the gradient at point `q`. The
/// default step is `(b - a) / 1e5` per dimension, or `1e-5 max(1, |y|)` on
/// unbounded dimensions.
pub fn gradient(
    grid: &SparseGrid,
    reduced: &ReducedGrid,
    values: &EvaluationTable,
    domain: &Domain,
    points: &[f64],
    h: Option<f64>,
) -> Result<Vec<f64>> {
    single_output(values)?;
    check_step(h)?;
    let dim = grid.dim;
    if domain.dim() != dim {
        return Err(SgError::DimensionMismatch { expected: dim, got: domain.dim() });
    }
    let interp = Interpolant::new(grid, reduced, values)?;
    let mut probes = Vec::new();
    let mut plan = Vec::new();
    for y in points.chunks_exact(dim) {
        for n in 0..dim {
            let step = h.unwrap_or_else(|| default_step(domain, n, y[n], 1e-5));
            let stencil = first_stencil(y[n], step, domain.lower[n], domain.upper[n]);
            for &(off, c) in &stencil {
                let mut p = y.to_vec();
                p[n] += off;
                probes.extend(p);
                plan.push(c);
            }
            plan.push(f64::NAN);
        }
    }
    let vals = interp.eval(&probes)?;
    let mut out = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    let mut k = 0;
    for &c in &plan {
        if c.is_nan() {
            out.push(acc);
            acc = 0.0;
        } else {
            acc += c * vals[k];
            k += 1;
        }
    }
    Ok(out)
}

/// Finite-difference Hessian of the interpolant at one point, symmetric by
/// construction. The default step is `(b - a) / 1e3` per dimension (second
/// differences lose about twice as many digits as first differences), or
/// `1e-3 max(1, |y|)` on unbounded dimensions.
pub fn hessian(
    grid: &SparseGrid,
    reduced: &ReducedGrid,
    values: &EvaluationTable,
    domain: &Domain,
    point: &[f64],
    h: Option<f64>,
) -> Result<Vec<Vec<f64>>> {
    single_output(values)?;
    check_step(h)?;
    let dim = grid.dim;
    if point.len() != dim || domain.dim() != dim {
        return Err(SgError::DimensionMismatch { expected: dim, got: point.len() });
    }
    let interp = Interpolant::new(grid, reduced, values)?;
    let steps: Vec<f64> =
        (0..dim).map(|n| h.unwrap_or_else(|| 100.0 * default_step(domain, n, point[n], 1e-5))).collect();
    let mut probes = Vec::new();
    let mut plan: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..dim {
        for j in i..dim {
            let (lo_i, hi_i) = (domain.lower[i], domain.upper[i]);
            let terms: Vec<(Vec<f64>, f64)> = if i == j {
                second_stencil(point[i], steps[i], lo_i, hi_i)
                    .into_iter()
                    .map(|(o, c)| {
                        let mut p = point.to_vec();
                        p[i] += o;
                        (p, c)
                    })
                    .collect()
            } else {
                let si = first_stencil(point[i], steps[i], lo_i, hi_i);
                let sj = first_stencil(point[j], steps[j], domain.lower[j], domain.upper[j]);
                let mut t = Vec::new();
                for &(oi, ci) in &si {
                    for &(oj, cj) in &sj {
                        let mut p = point.to_vec();
                        p[i] += oi;
                        p[j] += oj;
                        t.push((p, ci * cj));
                    }
                }
                t
            };
            for (p, c) in terms {
                probes.extend(p);
                plan.push((i, j, c));
            }
        }
    }
    let vals = interp.eval(&probes)?;
    let mut out = vec![vec![0.0; dim]; dim];
    for (&(i, j, c), v) in plan.iter().zip(vals) {
        out[i][j] += c * v;
    }
    for i in 0..dim {
        for j in 0..i {
            out[i][j] = out[j][i];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_sparse_grid, build_sparse_grid_from_rule, reduce};
    use crate::knots::KnotFamily;
    use crate::levels::LevelMap;
    use crate::midx::{box_set, fast_td_set};
    use approx::assert_abs_diff_eq;

    fn expsum(y: &[f64]) -> Vec<f64> {
        vec![y.iter().sum::<f64>().exp()]
    }

    fn sm_cc(dim: usize, w: u32) -> (SparseGrid, ReducedGrid) {
        let fam = vec![KnotFamily::ClenshawCurtis { a: 0.0, b: 1.0 }; dim];
        let s = build_sparse_grid(&fast_td_set(dim, w).unwrap(), &fam, LevelMap::Doubling, None).unwrap();
        let r = reduce(&s, None).unwrap();
        (s, r)
    }

    fn unit_domain(dim: usize) -> Domain {
        Domain::new(vec![0.0; dim], vec![1.0; dim]).unwrap()
    }

    #[test]
    fn quadrature_basics() {
        let (_, r) = sm_cc(2, 3);
        let (q, _) = quadrature_fn(&|_: &[f64]| vec![1.0], &r).unwrap();
        assert_abs_diff_eq!(q[0], 1.0, epsilon = 1e-12);
        let (q, _) = quadrature_fn(&|y: &[f64]| vec![y[0]], &r).unwrap();
        assert_abs_diff_eq!(q[0], 0.5, epsilon = 1e-12);
        let (_, r5) = sm_cc(2, 5);
        let (q, _) = quadrature_fn(&expsum, &r5).unwrap();
        let exact = (std::f64::consts::E - 1.0).powi(2);
        assert!((q[0] - exact).abs() < 1e-6);
        let bad = EvaluationTable::new(1, 3, vec![0.0; 3]).unwrap();
        assert!(quadrature(&bad, &r).is_err());
    }

    #[test]
    fn interpolation_reproduces_knots_and_linear_functions() {
        let (s, r) = sm_cc(2, 4);
        let t = evaluate_on_grid(&expsum, &r, None).unwrap().table;
        let out = interpolate(&s, &r, &t, &r.knots).unwrap();
        for (a, b) in out.iter().zip(&t.values) {
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
        }
        let lin = |y: &[f64]| vec![2.0 * y[0] - y[1] + 0.5, y[1]];
        let t = evaluate_on_grid(&lin, &r, None).unwrap().table;
        let q = [0.13, 0.77, 0.5, 0.01, 0.99, 0.42];
        let out = interpolate(&s, &r, &t, &q).unwrap();
        for (k, y) in q.chunks(2).enumerate() {
            let e = lin(y);
            assert_abs_diff_eq!(out[2 * k], e[0], epsilon = 1e-12);
            assert_abs_diff_eq!(out[2 * k + 1], e[1], epsilon = 1e-12);
        }
    }

    #[test]
    fn exp_interpolation_error_at_level_five() {
        use rand::{Rng, SeedableRng};
        let (s, r) = sm_cc(2, 5);
        let t = evaluate_on_grid(&expsum, &r, None).unwrap().table;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let q: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
        let out = interpolate(&s, &r, &t, &q).unwrap();
        for (k, y) in q.chunks(2).enumerate() {
            assert!((out[k] - expsum(y)[0]).abs() <= 1e-6);
        }
    }

    #[test]
    fn box_set_equals_full_tensor_interpolant() {
        let fam = vec![KnotFamily::gauss_uniform(0.0, 1.0); 2];
        let f = |y: &[f64]| vec![(y[0] * 3.0).sin() * (1.0 + y[1]).ln() + y[0] * y[1] * y[1]];
        let s = build_sparse_grid(&box_set(&[2, 2]).unwrap(), &fam, LevelMap::Linear, None).unwrap();
        let r = reduce(&s, None).unwrap();
        let t = evaluate_on_grid(&f, &r, None).unwrap().table;
        let full = build_sparse_grid(&box_set(&[1, 1]).unwrap(), &fam, LevelMap::Linear, None).unwrap();
        let mut top = full.clone();
        top.tensors = vec![crate::grid::build_tensor_grid(&[2, 2], &fam, LevelMap::Linear).unwrap()];
        let rt = reduce(&top, None).unwrap();
        let tt = evaluate_on_grid(&f, &rt, None).unwrap().table;
        let q = [0.1, 0.2, 0.7, 0.9, 0.35, 0.55];
        let a = interpolate(&s, &r, &t, &q).unwrap();
        let b = interpolate(&top, &rt, &tt, &q).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn recycling_copies_old_columns() {
        let (_, r3) = sm_cc(2, 3);
        let (_, r4) = sm_cc(2, 4);
        let old = evaluate_on_grid(&expsum, &r3, None).unwrap();
        let warm = evaluate_on_grid(&expsum, &r4, Some(Recycle { values: &old.table, reduced: &r3 })).unwrap();
        let cold = evaluate_on_grid(&expsum, &r4, None).unwrap();
        assert_eq!(warm.table, cold.table);
        assert_eq!(warm.new_evals, r4.size - r3.size);
        let again = evaluate_on_grid(&expsum, &r4, Some(Recycle { values: &warm.table, reduced: &r4 })).unwrap();
        assert_eq!(again.new_evals, 0);
    }

    #[test]
    fn evaluation_errors_carry_the_knot() {
        let (_, r) = sm_cc(2, 1);
        let f = TryFn(|y: &[f64]| if y[0] > 0.9 { Err("boom".to_string()) } else { Ok(vec![1.0]) });
        match evaluate_on_grid(&f, &r, None) {
            Err(SgError::Evaluation { knot, message }) => {
                assert!(knot[0] > 0.9);
                assert_eq!(message, "boom");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn quadrature_is_permutation_invariant() {
        let (_, r) = sm_cc(2, 4);
        let t = evaluate_on_grid(&expsum, &r, None).unwrap().table;
        let q = quadrature(&t, &r).unwrap()[0];
        let mut perm: Vec<usize> = (0..r.size).collect();
        perm.reverse();
        let mut r2 = r.clone();
        let mut t2 = t.clone();
        for (new, &old) in perm.iter().enumerate() {
            r2.weights[new] = r.weights[old];
            t2.values[new] = t.values[old];
        }
        assert_abs_diff_eq!(quadrature(&t2, &r2).unwrap()[0], q, epsilon = 1e-13);
    }

    #[test]
    fn gradients() {
        let (s, r) = sm_cc(2, 5);
        let d = unit_domain(2);
        let lin = |y: &[f64]| vec![3.0 * y[0] + 2.0 * y[1]];
        let t = evaluate_on_grid(&lin, &r, None).unwrap().table;
        let pts = [0.5, 0.5, 0.0, 1.0, 0.3, 0.999];
        let g = gradient(&s, &r, &t, &d, &pts, None).unwrap();
        for q in 0..3 {
            assert_abs_diff_eq!(g[2 * q], 3.0, epsilon = 1e-8);
            assert_abs_diff_eq!(g[2 * q + 1], 2.0, epsilon = 1e-8);
        }
        let t = evaluate_on_grid(&expsum, &r, None).unwrap().table;
        let g = gradient(&s, &r, &t, &d, &[0.5, 0.5], None).unwrap();
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(g[0], e, epsilon = 1e-4);
        assert_abs_diff_eq!(g[1], e, epsilon = 1e-4);
        assert!(gradient(&s, &r, &t, &d, &[0.5, 0.5], Some(0.0)).is_err());
    }

    #[test]
    fn hessians() {
        let fam = vec![KnotFamily::ClenshawCurtis { a: 0.0, b: 1.0 }; 2];
        let td = |i: &[u32]| i.iter().map(|&v| v as f64 - 1.0).sum::<f64>();
        let s = build_sparse_grid_from_rule(2, 3.0, &fam, LevelMap::Doubling, &td, None).unwrap();
        let r = reduce(&s, None).unwrap();
        let d = unit_domain(2);
        let quad = |y: &[f64]| vec![y[0] * y[0] + 3.0 * y[0] * y[1]];
        let t = evaluate_on_grid(&quad, &r, None).unwrap().table;
        for p in [[0.5, 0.5], [0.0, 0.3], [1.0, 1.0]] {
            let h = hessian(&s, &r, &t, &d, &p, None).unwrap();
            assert_abs_diff_eq!(h[0][0], 2.0, epsilon = 1e-6);
            assert_abs_diff_eq!(h[0][1], 3.0, epsilon = 1e-6);
            assert_abs_diff_eq!(h[1][0], 3.0, epsilon = 1e-6);
            assert_abs_diff_eq!(h[1][1], 0.0, epsilon = 1e-6);
        }
        let (s, r) = sm_cc(2, 5);
        let t = evaluate_on_grid(&expsum, &r, None).unwrap().table;
        let h = hessian(&s, &r, &t, &d, &[0.5, 0.5], None).unwrap();
        let centre = interpolate(&s, &r, &t, &[0.5, 0.5]).unwrap()[0];
        for row in &h {
            for &v in row {
                assert_abs_diff_eq!(v, centre, epsilon = 1e-3);
            }
        }
        assert_eq!(h[0][1], h[1][0]);
    }
}
