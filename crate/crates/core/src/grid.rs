//! Tensor grids, sparse grids in extended format, and their reduction.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dedup::unique_points;
use crate::knots::{KnotFamily, Rule1D};
use crate::levels::LevelMap;
use crate::midx::{combination_coefficients, generate_rule_set, is_downward_closed, preset, MultiIndexSet, Preset};
use crate::{Result, SgError};

/// Default dedup tolerance, scaled per dimension by `max(1, range)`.
pub const DEFAULT_TOL: f64 = 1e-14;

/// One tensor grid of the combination technique. Knots are stored point by
/// point (`dim` coordinates each), first dimension varying fastest; weights
/// already carry the combination coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorGrid {
    pub idx: Vec<u32>,
    pub knots: Vec<f64>,
    pub weights: Vec<f64>,
    pub size: usize,
    pub knots_per_dim: Vec<Vec<f64>>,
    pub weights_per_dim: Vec<Vec<f64>>,
    pub m: Vec<usize>,
    pub coeff: i64,
}

impl TensorGrid {
    pub fn dim(&self) -> usize {
        self.idx.len()
    }

    pub fn knot(&self, j: usize) -> &[f64] {
        let d = self.dim();
        &self.knots[j * d..(j + 1) * d]
    }

    /// Rebuilds the full tensor from the univariate rules.
    pub fn from_rules(idx: Vec<u32>, rules: Vec<Rule1D>, coeff: i64) -> Self {
        let dim = idx.len();
        let m: Vec<usize> = rules.iter().map(|r| r.len()).collect();
        let size: usize = m.iter().product();
        let mut knots = Vec::with_capacity(size * dim);
        let mut weights = Vec::with_capacity(size);
        let mut counter = vec![0usize; dim];
        for _ in 0..size {
            let mut w = coeff as f64;
            for n in 0..dim {
                knots.push(rules[n].nodes[counter[n]]);
                w *= rules[n].weights[counter[n]];
            }
            weights.push(w);
            for n in 0..dim {
                counter[n] += 1;
                if counter[n] < m[n] {
                    break;
                }
                counter[n] = 0;
            }
        }
        let (knots_per_dim, weights_per_dim) = rules.into_iter().map(|r| (r.nodes, r.weights)).unzip();
        TensorGrid { idx, knots, weights, size, knots_per_dim, weights_per_dim, m, coeff }
    }

    fn rules(&self) -> Vec<Rule1D> {
        self.knots_per_dim
            .iter()
            .zip(&self.weights_per_dim)
            .map(|(n, w)| Rule1D { nodes: n.clone(), weights: w.clone() })
            .collect()
    }

    /// Same tensor with a different combination coefficient; weights are
    /// recomputed from the univariate rules so the result is bitwise equal
    /// to a fresh build.
    pub fn with_coeff(&self, coeff: i64) -> Self {
        if coeff == self.coeff {
            return self.clone();
        }
        TensorGrid::from_rules(self.idx.clone(), self.rules(), coeff)
    }
}

/// Sparse grid in extended format: the tensor grids with nonzero
/// combination coefficient, sorted by multi-index, plus the full index set
/// and its coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGrid {
    pub dim: usize,
    pub families: Vec<KnotFamily>,
    pub level_map: LevelMap,
    pub set: MultiIndexSet,
    pub coeffs: Vec<i64>,
    pub tensors: Vec<TensorGrid>,
}

impl SparseGrid {
    /// Number of knots counted with repetitions.
    pub fn extended_size(&self) -> usize {
        self.tensors.iter().map(|t| t.size).sum()
    }

    /// Offsets of each tensor in the concatenated extended knot list.
    pub fn tensor_offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.tensors.len());
        let mut acc = 0;
        for t in &self.tensors {
            out.push(acc);
            acc += t.size;
        }
        out
    }

    /// Whether every dimension uses nested knots under the level map.
    pub fn is_nested(&self) -> bool {
        self.families.iter().all(|f| f.nested_with(self.level_map))
    }
}

/// Deduplicated sparse grid. `m[p]` is the first occurrence of unique knot
/// `p` in the extended list, `n[j]` the unique knot of extended knot `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedGrid {
    pub dim: usize,
    pub knots: Vec<f64>,
    pub weights: Vec<f64>,
    pub size: usize,
    pub m: Vec<usize>,
    pub n: Vec<usize>,
    pub tol: f64,
}

impl ReducedGrid {
    pub fn knot(&self, p: usize) -> &[f64] {
        &self.knots[p * self.dim..(p + 1) * self.dim]
    }

    pub fn iter_knots(&self) -> std::slice::ChunksExact<'_, f64> {
        self.knots.chunks_exact(self.dim)
    }
}

fn check_families(dim: usize, families: &[KnotFamily]) -> Result<()> {
    if families.len() != dim {
        return Err(SgError::DimensionMismatch { expected: dim, got: families.len() });
    }
    Ok(())
}

/// Memo of univariate rules per (dimension, knot count).
struct RuleMemo<'a> {
    families: &'a [KnotFamily],
    rules: HashMap<(usize, usize), Rule1D>,
}

impl<'a> RuleMemo<'a> {
    fn new(families: &'a [KnotFamily]) -> Self {
        RuleMemo { families, rules: HashMap::new() }
    }

    fn get(&mut self, n: usize, count: usize) -> Result<Rule1D> {
        if let Some(r) = self.rules.get(&(n, count)) {
            return Ok(r.clone());
        }
        let r = self.families[n].rule(count)?;
        self.rules.insert((n, count), r.clone());
        Ok(r)
    }

    fn tensor_rules(&mut self, idx: &[u32], map: LevelMap) -> Result<Vec<Rule1D>> {
        if idx.contains(&0) {
            return Err(SgError::Parameter(format!("multi-index entries must be >= 1, got {idx:?}")));
        }
        idx.iter().enumerate().map(|(n, &i)| self.get(n, map.apply(i)?)).collect()
    }
}

/// Tensor grid for `idx` with coefficient 1.
pub fn build_tensor_grid(idx: &[u32], families: &[KnotFamily], level_map: LevelMap) -> Result<TensorGrid> {
    check_families(idx.len(), families)?;
    let rules = RuleMemo::new(families).tensor_rules(idx, level_map)?;
    Ok(TensorGrid::from_rules(idx.to_vec(), rules, 1))
}

/// Sparse grid over a downward-closed set. Tensors of `previous` with the
/// same multi-index are reused (reweighted when the coefficient changed).
pub fn build_sparse_grid(
    set: &MultiIndexSet,
    families: &[KnotFamily],
    level_map: LevelMap,
    previous: Option<&SparseGrid>,
) -> Result<SparseGrid> {
    check_families(set.dim(), families)?;
    if set.is_empty() {
        return Err(SgError::Parameter("cannot build a sparse grid on an empty index set".into()));
    }
    let coeffs = combination_coefficients(set)?;
    let previous = previous.filter(|p| p.families == families && p.level_map == level_map && p.dim == set.dim());
    let mut memo = RuleMemo::new(families);
    let mut slots: Vec<Option<TensorGrid>> = Vec::new();
    let mut pending: Vec<(usize, Vec<u32>, Vec<Rule1D>, i64)> = Vec::new();
    for (idx, &c) in set.iter().zip(&coeffs) {
        if c == 0 {
            continue;
        }
        let reused = previous.and_then(|p| {
            p.tensors.binary_search_by(|t| t.idx.as_slice().cmp(idx)).ok().map(|k| p.tensors[k].with_coeff(c))
        });
        match reused {
            Some(t) => slots.push(Some(t)),
            None => {
                pending.push((slots.len(), idx.clone(), memo.tensor_rules(idx, level_map)?, c));
                slots.push(None);
            }
        }
    }
    let built: Vec<(usize, TensorGrid)> =
        pending.into_par_iter().map(|(slot, idx, rules, c)| (slot, TensorGrid::from_rules(idx, rules, c))).collect();
    for (slot, t) in built {
        slots[slot] = Some(t);
    }
    Ok(SparseGrid {
        dim: set.dim(),
        families: families.to_vec(),
        level_map,
        set: set.clone(),
        coeffs,
        tensors: slots.into_iter().map(|t| t.expect("every slot is filled")).collect(),
    })
}

/// Generates `{ i : rule(i) <= w }` and builds the sparse grid on it.
pub fn build_sparse_grid_from_rule(
    dim: usize,
    w: f64,
    families: &[KnotFamily],
    level_map: LevelMap,
    rule: &dyn Fn(&[u32]) -> f64,
    previous: Option<&SparseGrid>,
) -> Result<SparseGrid> {
    let set = generate_rule_set(dim, rule, w, 1)?;
    build_sparse_grid(&set, families, level_map, previous)
}

/// Smolyak grid of level `w` with Clenshaw–Curtis knots on `[-1, 1]^dim`,
/// in both formats.
pub fn quick_preset(dim: usize, w: u32) -> Result<(SparseGrid, ReducedGrid)> {
    let (rule, map) = preset(Preset::SM, dim, None)?;
    let families = vec![KnotFamily::ClenshawCurtis { a: -1.0, b: 1.0 }; dim];
    let s = build_sparse_grid_from_rule(dim, w as f64, &families, map, &|i| rule.eval(i), None)?;
    let r = reduce(&s, None)?;
    Ok((s, r))
}

/// Adds one multi-index to the set of `grid`. Only coefficients of indices
/// `i` with `new_idx - i` in `{0,1}^N` change; at most the tensors whose
/// coefficient becomes nonzero are built.
pub fn add_one_index(grid: &SparseGrid, new_idx: &[u32]) -> Result<SparseGrid> {
    let set = grid.set.with_index(new_idx)?;
    if !is_downward_closed(&set) {
        return Err(SgError::NotDownwardClosed(new_idx.to_vec()));
    }
    let mut coeffs = Vec::with_capacity(set.len());
    for idx in set.iter() {
        let old = grid.set.position(idx).map(|k| grid.coeffs[k]).unwrap_or(0);
        let mut delta = 0;
        if idx.iter().zip(new_idx).all(|(&i, &j)| j == i || j == i + 1) {
            let dist: u32 = idx.iter().zip(new_idx).map(|(&i, &j)| j - i).sum();
            delta = if dist.is_multiple_of(2) { 1 } else { -1 };
        }
        coeffs.push(old + delta);
    }
    let mut memo = RuleMemo::new(&grid.families);
    let mut tensors = Vec::new();
    for (idx, &c) in set.iter().zip(&coeffs) {
        if c == 0 {
            continue;
        }
        match grid.tensors.binary_search_by(|t| t.idx.as_slice().cmp(idx)) {
            Ok(k) => tensors.push(grid.tensors[k].with_coeff(c)),
            Err(_) => tensors.push(TensorGrid::from_rules(idx.clone(), memo.tensor_rules(idx, grid.level_map)?, c)),
        }
    }
    Ok(SparseGrid { dim: grid.dim, families: grid.families.clone(), level_map: grid.level_map, set, coeffs, tensors })
}

/// Deduplicates the extended knots; reduced weights are plain sums of the
/// (coefficient-scaled) tensor weights of all copies.
pub fn reduce(grid: &SparseGrid, tol: Option<f64>) -> Result<ReducedGrid> {
    let tol = tol.unwrap_or(DEFAULT_TOL);
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(SgError::Parameter(format!("dedup tolerance must be non-negative, got {tol}")));
    }
    if grid.tensors.is_empty() {
        return Err(SgError::Parameter("cannot reduce an empty sparse grid".into()));
    }
    let mut all = Vec::with_capacity(grid.extended_size() * grid.dim);
    let mut all_w = Vec::with_capacity(grid.extended_size());
    for t in &grid.tensors {
        all.extend_from_slice(&t.knots);
        all_w.extend_from_slice(&t.weights);
    }
    let (knots, m, n) = unique_points(grid.dim, &all, tol);
    let mut weights = vec![0.0; m.len()];
    for (&p, &w) in n.iter().zip(&all_w) {
        weights[p] += w;
    }
    Ok(ReducedGrid { dim: grid.dim, size: m.len(), knots, weights, m, n, tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knots::Distribution;
    use crate::midx::{box_set, fast_td_set};
    use approx::assert_abs_diff_eq;

    fn cc01(dim: usize) -> Vec<KnotFamily> {
        vec![KnotFamily::ClenshawCurtis { a: 0.0, b: 1.0 }; dim]
    }

    fn td_rule(i: &[u32]) -> f64 {
        i.iter().map(|&v| v as f64 - 1.0).sum()
    }

    #[test]
    fn tensor_grid_examples() {
        let t = build_tensor_grid(&[1, 3], &cc01(2), LevelMap::Doubling).unwrap();
        assert_eq!(t.m, vec![1, 5]);
        assert_eq!(t.size, 5);
        assert_eq!(t.knots_per_dim[0], vec![0.5]);
        for (a, b) in t.knots_per_dim[1].iter().zip([1.0, 0.8536, 0.5, 0.1464, 0.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 5e-5);
        }
        let t = build_tensor_grid(&[1, 1], &cc01(2), LevelMap::Doubling).unwrap();
        assert_eq!((t.size, t.weights.clone()), (1, vec![1.0]));
        let t = build_tensor_grid(&[2, 2], &cc01(2), LevelMap::Doubling).unwrap();
        assert_eq!(t.size, 9);
        // first dimension varies fastest
        assert_eq!(t.knot(1), &[t.knots_per_dim[0][1], t.knots_per_dim[1][0]]);
        assert_eq!(t.knot(3), &[t.knots_per_dim[0][0], t.knots_per_dim[1][1]]);
    }

    #[test]
    fn listing_grid() {
        let s = build_sparse_grid_from_rule(2, 3.0, &cc01(2), LevelMap::Doubling, &td_rule, None).unwrap();
        assert_eq!(s.tensors.len(), 7);
        assert_eq!(s.extended_size(), 67);
        let first = &s.tensors[0];
        assert_eq!((first.idx.clone(), first.m.clone(), first.coeff), (vec![1, 3], vec![1, 5], -1));
        for (a, b) in first.weights.iter().zip([-0.0333, -0.2667, -0.4, -0.2667, -0.0333]) {
            assert_abs_diff_eq!(*a, b, epsilon = 5e-5);
        }
        for t in &s.tensors {
            assert_abs_diff_eq!(t.weights.iter().sum::<f64>(), t.coeff as f64, epsilon = 1e-12);
        }
        let r = reduce(&s, None).unwrap();
        assert_eq!((r.size, r.m.len(), r.n.len()), (29, 29, 67));
        assert_abs_diff_eq!(r.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
        for p in 0..r.size {
            assert_eq!(r.n[r.m[p]], p);
        }
    }

    #[test]
    fn example_one_drops_zero_coefficient() {
        let set = MultiIndexSet::new(2, vec![vec![1, 1], vec![1, 2], vec![2, 1], vec![3, 1]]).unwrap();
        let s = build_sparse_grid(&set, &cc01(2), LevelMap::Doubling, None).unwrap();
        let idx: Vec<Vec<u32>> = s.tensors.iter().map(|t| t.idx.clone()).collect();
        assert_eq!(idx, vec![vec![1, 1], vec![1, 2], vec![3, 1]]);
        let single = build_sparse_grid(&box_set(&[1, 1]).unwrap(), &cc01(2), LevelMap::Doubling, None).unwrap();
        assert_eq!(single.extended_size(), 1);
    }

    #[test]
    fn recycling_matches_cold_build() {
        let old = build_sparse_grid_from_rule(2, 4.0, &cc01(2), LevelMap::Doubling, &td_rule, None).unwrap();
        let warm = build_sparse_grid_from_rule(2, 5.0, &cc01(2), LevelMap::Doubling, &td_rule, Some(&old)).unwrap();
        let cold = build_sparse_grid_from_rule(2, 5.0, &cc01(2), LevelMap::Doubling, &td_rule, None).unwrap();
        assert_eq!(warm, cold);
    }

    #[test]
    fn add_one_index_matches_cold_build() {
        let set = MultiIndexSet::new(2, vec![vec![1, 1], vec![1, 2], vec![2, 1], vec![3, 1]]).unwrap();
        let s = build_sparse_grid(&set, &cc01(2), LevelMap::Doubling, None).unwrap();
        let grown = add_one_index(&s, &[4, 1]).unwrap();
        let cold = build_sparse_grid(&set.with_index(&[4, 1]).unwrap(), &cc01(2), LevelMap::Doubling, None).unwrap();
        assert_eq!(grown, cold);
        let grown = add_one_index(&s, &[2, 2]).unwrap();
        let cold = build_sparse_grid(&set.with_index(&[2, 2]).unwrap(), &cc01(2), LevelMap::Doubling, None).unwrap();
        assert_eq!(grown, cold);

        let root = build_sparse_grid(&box_set(&[1, 1]).unwrap(), &cc01(2), LevelMap::Doubling, None).unwrap();
        let g = add_one_index(&root, &[2, 1]).unwrap();
        assert_eq!(g.coeffs, vec![0, 1]);
        assert!(add_one_index(&root, &[1, 1]).is_err());
        assert!(matches!(add_one_index(&root, &[3, 1]), Err(SgError::NotDownwardClosed(_))));
    }

    #[test]
    fn quick_preset_sizes() {
        let (_, r) = quick_preset(2, 3).unwrap();
        assert_eq!(r.size, 29);
        let (_, r) = quick_preset(1, 0).unwrap();
        assert_eq!(r.knots, vec![0.0]);
        let (s, r) = quick_preset(3, 2).unwrap();
        let mut all: Vec<Vec<u64>> = Vec::new();
        for t in &s.tensors {
            for j in 0..t.size {
                all.push(t.knot(j).iter().map(|v| (v + 0.0).to_bits()).collect());
            }
        }
        all.sort();
        all.dedup();
        assert_eq!(r.size, all.len());
    }

    #[test]
    fn non_nested_reduction_matches_exact_dedup() {
        let fam = vec![KnotFamily::Gauss { dist: Distribution::uniform(0.0, 1.0) }; 2];
        let s = build_sparse_grid(&fast_td_set(2, 2).unwrap(), &fam, LevelMap::Linear, None).unwrap();
        let r = reduce(&s, None).unwrap();
        // symmetric Gauss nodes: rationalize to a fine lattice before exact comparison
        let mut all: Vec<(i64, i64)> = Vec::new();
        for t in &s.tensors {
            for j in 0..t.size {
                let k = t.knot(j);
                all.push(((k[0] * 1e9).round() as i64, (k[1] * 1e9).round() as i64));
            }
        }
        all.sort();
        all.dedup();
        assert_eq!(r.size, all.len());
        assert_abs_diff_eq!(r.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn reduction_preserves_quadrature() {
        let s = build_sparse_grid_from_rule(3, 3.0, &cc01(3), LevelMap::Doubling, &td_rule, None).unwrap();
        let r = reduce(&s, None).unwrap();
        let vals: Vec<f64> = (0..r.size).map(|p| ((p * 7919) % 101) as f64 / 13.0 - 3.0).collect();
        let reduced: f64 = r.weights.iter().zip(&vals).map(|(w, v)| w * v).sum();
        let mut extended = 0.0;
        let mut j = 0;
        for t in &s.tensors {
            for &w in &t.weights {
                extended += w * vals[r.n[j]];
                j += 1;
            }
        }
        assert_abs_diff_eq!(reduced, extended, epsilon = 1e-12);
    }

    #[test]
    fn single_tensor_reduce_is_identity() {
        let t = build_tensor_grid(&[3, 2], &cc01(2), LevelMap::Linear).unwrap();
        let grid = SparseGrid {
            dim: 2,
            families: cc01(2),
            level_map: LevelMap::Linear,
            set: box_set(&[1, 1]).unwrap(),
            coeffs: vec![1],
            tensors: vec![t.clone()],
        };
        let r = reduce(&grid, None).unwrap();
        assert_eq!(r.knots, t.knots);
        assert_eq!(r.weights, t.weights);
        assert_eq!(r.n, (0..t.size).collect::<Vec<_>>());
    }
}
