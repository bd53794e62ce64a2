//! Tolerance-based lookup of points in R^N.
//!
//! Coordinates are hashed on a lattice whose cells are much wider than the
//! tolerance, so that two matching points share a cell unless one of them
//! sits close to a cell boundary; only in that case are neighbouring cells
//! probed.

use std::collections::HashMap;

/// Cell width in units of the per-dimension tolerance.
const CELL: f64 = 20.0;
/// Fraction of a half cell beyond which a neighbour cell may hold a match.
const EDGE: f64 = 0.45;

/// Points inserted so far, searchable up to a per-dimension tolerance.
#[derive(Debug, Clone)]
pub struct PointIndex {
    dim: usize,
    delta: Vec<f64>,
    points: Vec<f64>,
    cells: HashMap<Vec<i64>, Vec<usize>>,
}

impl PointIndex {
    /// Two points match when `|x_n - y_n| <= delta_n` for every `n`.
    pub fn new(delta: Vec<f64>) -> Self {
        PointIndex { dim: delta.len(), delta, points: Vec::new(), cells: HashMap::new() }
    }

    /// Tolerances `tol * max(1, range_n)` from the coordinate ranges of
    /// `points` (point-major storage).
    pub fn scaled_tolerance(dim: usize, points: &[f64], tol: f64) -> Vec<f64> {
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for p in points.chunks_exact(dim) {
            for n in 0..dim {
                lo[n] = lo[n].min(p[n]);
                hi[n] = hi[n].max(p[n]);
            }
        }
        (0..dim)
            .map(|n| {
                let range = if hi[n] >= lo[n] { hi[n] - lo[n] } else { 0.0 };
                tol * range.max(1.0)
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.dim..(k + 1) * self.dim]
    }

    fn key(&self, x: &[f64]) -> (Vec<i64>, Vec<i8>) {
        let mut key = Vec::with_capacity(self.dim);
        let mut side = Vec::with_capacity(self.dim);
        for (n, &v) in x.iter().enumerate() {
            let s = v / (CELL * self.delta[n]);
            let k = s.round();
            let frac = s - k;
            key.push(k as i64);
            side.push(if frac > EDGE {
                1
            } else if frac < -EDGE {
                -1
            } else {
                0
            });
        }
        (key, side)
    }

    fn matches(&self, k: usize, x: &[f64]) -> bool {
        self.point(k).iter().zip(x).zip(&self.delta).all(|((a, b), d)| (a - b).abs() <= *d)
    }

    /// Smallest-index stored point matching `x`.
    pub fn find(&self, x: &[f64]) -> Option<usize> {
        let (key, side) = self.key(x);
        let ambiguous: Vec<usize> = (0..self.dim).filter(|&n| side[n] != 0).collect();
        let mut best: Option<usize> = None;
        let mut probe = key.clone();
        for mask in 0u64..(1u64 << ambiguous.len().min(20)) {
            probe.copy_from_slice(&key);
            for (b, &n) in ambiguous.iter().enumerate() {
                if mask >> b & 1 == 1 {
                    probe[n] += side[n] as i64;
                }
            }
            if let Some(list) = self.cells.get(&probe) {
                for &k in list {
                    if best.is_some_and(|b| b <= k) {
                        break;
                    }
                    if self.matches(k, x) {
                        best = Some(k);
                        break;
                    }
                }
            }
        }
        best
    }

    /// Index of the point matching `x`, inserting it if there is none. The
    /// flag is true when the point was new.
    pub fn find_or_insert(&mut self, x: &[f64]) -> (usize, bool) {
        if let Some(k) = self.find(x) {
            return (k, false);
        }
        (self.insert(x), true)
    }

    /// Appends `x` without searching.
    pub fn insert(&mut self, x: &[f64]) -> usize {
        let k = self.len();
        self.points.extend_from_slice(x);
        let (key, _) = self.key(x);
        self.cells.entry(key).or_default().push(k);
        k
    }

    pub fn into_points(self) -> Vec<f64> {
        self.points
    }
}

/// Unique points of `points` (point-major, `dim` coordinates each) under
/// `tol * max(1, range_n)`. Returns the unique points in first-occurrence
/// order, the position of each one in the input, and the unique index of
/// every input point.
pub fn unique_points(dim: usize, points: &[f64], tol: f64) -> (Vec<f64>, Vec<usize>, Vec<usize>) {
    let delta = PointIndex::scaled_tolerance(dim, points, tol);
    let mut index = PointIndex::new(delta);
    let mut first = Vec::new();
    let mut map = Vec::with_capacity(points.len() / dim);
    for (j, x) in points.chunks_exact(dim).enumerate() {
        let (k, fresh) = index.find_or_insert(x);
        if fresh {
            first.push(j);
        }
        map.push(k);
    }
    (index.into_points(), first, map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_duplicates_collapse_in_first_occurrence_order() {
        let pts = [0.5, 1.0, 0.0, 0.0, 0.5, 1.0, 0.25, 0.0, 0.0, 0.0];
        let (uniq, first, map) = unique_points(2, &pts, 1e-14);
        assert_eq!(uniq, vec![0.5, 1.0, 0.0, 0.0, 0.25, 0.0]);
        assert_eq!(first, vec![0, 1, 3]);
        assert_eq!(map, vec![0, 1, 0, 2, 1]);
    }

    #[test]
    fn matches_across_cell_boundaries() {
        let delta = 1e-10;
        let mut idx = PointIndex::new(vec![delta]);
        let edge = 10.5 * CELL * delta;
        idx.insert(&[edge - 0.4 * delta]);
        assert_eq!(idx.find(&[edge + 0.4 * delta]), Some(0));
        assert_eq!(idx.find(&[edge + 2.0 * delta]), None);
    }

    proptest! {
        #[test]
        fn agrees_with_brute_force(raw in prop::collection::vec((0u8..6, 0u8..6), 1..60), jitter in 0.0f64..0.5) {
            let tol = 1e-12;
            let mut pts = Vec::new();
            for (i, (a, b)) in raw.iter().enumerate() {
                let e = if i % 2 == 0 { jitter * tol } else { 0.0 };
                pts.push(*a as f64 / 5.0 + e);
                pts.push(*b as f64 / 5.0 - e);
            }
            let (uniq, first, map) = unique_points(2, &pts, tol);
            let mut exact: Vec<(u8, u8)> = raw.clone();
            exact.sort();
            exact.dedup();
            prop_assert_eq!(uniq.len() / 2, exact.len());
            for (j, &k) in map.iter().enumerate() {
                prop_assert_eq!(raw[j], raw[first[k]]);
            }
            for (k, &j) in first.iter().enumerate() {
                prop_assert_eq!(map[j], k);
            }
        }
    }
}
