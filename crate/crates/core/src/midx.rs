//! Multi-index sets, margins and combination-technique coefficients.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::levels::LevelMap;
use crate::{Result, SgError};

/// Lexicographically sorted set of multi-indices of a common length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiIndexSet {
    dim: usize,
    rows: Vec<Vec<u32>>,
}

impl MultiIndexSet {
    /// Builds a set from arbitrary rows, sorting and removing duplicates.
    pub fn new(dim: usize, mut rows: Vec<Vec<u32>>) -> Result<Self> {
        check_rows(dim, &rows)?;
        rows.sort();
        rows.dedup();
        Ok(MultiIndexSet { dim, rows })
    }

    /// Builds a set from rows that must already be strictly increasing.
    pub fn from_sorted(dim: usize, rows: Vec<Vec<u32>>) -> Result<Self> {
        check_rows(dim, &rows)?;
        if rows.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SgError::Unsorted);
        }
        Ok(MultiIndexSet { dim, rows })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Vec<u32>> {
        self.rows.iter()
    }

    pub fn position(&self, idx: &[u32]) -> Option<usize> {
        self.rows.binary_search_by(|r| r.as_slice().cmp(idx)).ok()
    }

    pub fn contains(&self, idx: &[u32]) -> bool {
        self.position(idx).is_some()
    }

    /// Copy of the set with `idx` inserted at its sorted position.
    pub fn with_index(&self, idx: &[u32]) -> Result<Self> {
        check_rows(self.dim, std::slice::from_ref(&idx.to_vec()))?;
        let mut rows = self.rows.clone();
        match rows.binary_search_by(|r| r.as_slice().cmp(idx)) {
            Ok(_) => Err(SgError::Contract(format!("multi-index {idx:?} is already in the set"))),
            Err(pos) => {
                rows.insert(pos, idx.to_vec());
                Ok(MultiIndexSet { dim: self.dim, rows })
            }
        }
    }

    /// Largest entry per dimension.
    pub fn max_per_dim(&self) -> Vec<u32> {
        let mut out = vec![0; self.dim];
        for r in &self.rows {
            for (o, &v) in out.iter_mut().zip(r) {
                *o = (*o).max(v);
            }
        }
        out
    }
}

impl fmt::Display for MultiIndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rows {
            let parts: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            writeln!(f, "{}", parts.join(" "))?;
        }
        Ok(())
    }
}

fn check_rows(dim: usize, rows: &[Vec<u32>]) -> Result<()> {
    if dim == 0 {
        return Err(SgError::Parameter("multi-index sets need dim >= 1".into()));
    }
    for r in rows {
        if r.len() != dim {
            return Err(SgError::DimensionMismatch { expected: dim, got: r.len() });
        }
    }
    Ok(())
}

/// Shape of a rule `r(i)` from the standard families of index sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    /// `max_n g_n (i_n - 1)`
    Max,
    /// `sum_n g_n (i_n - 1)`
    Sum,
    /// `prod_n i_n^g_n`
    Prod,
}

/// A rule together with its anisotropy weights. Evaluated on a prefix of a
/// multi-index, only the first `len` weights are used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRule {
    pub kind: RuleKind,
    pub g: Vec<f64>,
}

impl IndexRule {
    pub fn isotropic(kind: RuleKind, dim: usize) -> Self {
        IndexRule { kind, g: vec![1.0; dim] }
    }

    pub fn eval(&self, idx: &[u32]) -> f64 {
        let g = |n: usize| self.g.get(n).copied().unwrap_or(1.0);
        match self.kind {
            RuleKind::Max => idx.iter().enumerate().map(|(n, &i)| g(n) * (i as f64 - 1.0)).fold(0.0, f64::max),
            RuleKind::Sum => idx.iter().enumerate().map(|(n, &i)| g(n) * (i as f64 - 1.0)).sum(),
            RuleKind::Prod => idx.iter().enumerate().map(|(n, &i)| (i as f64).powf(g(n))).product(),
        }
    }
}

const MAX_LEVEL: u32 = 1 << 20;

/// `{ i >= base : rule(i) <= w }`, built recursively one dimension at a time.
/// The rule is called on prefixes and must be non-decreasing in each entry,
/// with `rule(j) > w` implying `rule([j, base]) > w`.
pub fn generate_rule_set(dim: usize, rule: &dyn Fn(&[u32]) -> f64, w: f64, base: u32) -> Result<MultiIndexSet> {
    if dim == 0 {
        return Err(SgError::Parameter("multi-index sets need dim >= 1".into()));
    }
    if base > 1 {
        return Err(SgError::Parameter(format!("base must be 0 or 1, got {base}")));
    }
    fn recurse(
        dim: usize,
        rule: &dyn Fn(&[u32]) -> f64,
        w: f64,
        base: u32,
        prefix: &mut Vec<u32>,
        out: &mut Vec<Vec<u32>>,
    ) -> Result<()> {
        let mut level = base;
        loop {
            prefix.push(level);
            if rule(prefix) > w {
                prefix.pop();
                return Ok(());
            }
            if prefix.len() == dim {
                out.push(prefix.clone());
            } else {
                recurse(dim, rule, w, base, prefix, out)?;
            }
            prefix.pop();
            level += 1;
            if level > MAX_LEVEL {
                return Err(SgError::Parameter("rule does not bound the index set".into()));
            }
        }
    }
    let mut rows = Vec::new();
    recurse(dim, rule, w, base, &mut Vec::with_capacity(dim), &mut rows)?;
    if cfg!(debug_assertions) {
        for r in rows.iter().take(16) {
            for n in 0..dim {
                let mut up = r.clone();
                up[n] += 1;
                debug_assert!(rule(&up) >= rule(r), "rule is not non-decreasing at {r:?}");
            }
        }
    }
    Ok(MultiIndexSet { dim, rows })
}

/// `{ i : 1 <= i <= jj }`.
pub fn box_set(jj: &[u32]) -> Result<MultiIndexSet> {
    if jj.contains(&0) {
        return Err(SgError::Parameter(format!("box corner must be >= 1 componentwise, got {jj:?}")));
    }
    let dim = jj.len();
    let rule = |idx: &[u32]| if idx.iter().zip(jj).all(|(i, j)| i <= j) { 0.0 } else { 1.0 };
    generate_rule_set(dim, &rule, 0.0, 1)
}

/// `{ i >= 1 : sum(i - 1) <= w }` by lexicographic odometer enumeration.
pub fn fast_td_set(dim: usize, w: u32) -> Result<MultiIndexSet> {
    if dim == 0 {
        return Err(SgError::Parameter("multi-index sets need dim >= 1".into()));
    }
    let mut rows = Vec::new();
    let mut cur = vec![1u32; dim];
    let mut used = 0u32;
    loop {
        rows.push(cur.clone());
        // advance the last position that still has budget, resetting the tail
        let mut n = dim;
        loop {
            if n == 0 {
                return Ok(MultiIndexSet { dim, rows });
            }
            n -= 1;
            if used < w {
                cur[n] += 1;
                used += 1;
                break;
            }
            used -= cur[n] - 1;
            cur[n] = 1;
        }
    }
}

/// Named combinations of rule and level map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    TP,
    TD,
    HC,
    SM,
}

impl Preset {
    pub fn rule_kind(self) -> RuleKind {
        match self {
            Preset::TP => RuleKind::Max,
            Preset::TD | Preset::SM => RuleKind::Sum,
            Preset::HC => RuleKind::Prod,
        }
    }

    pub fn level_map(self) -> LevelMap {
        match self {
            Preset::SM => LevelMap::Doubling,
            _ => LevelMap::Linear,
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = SgError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "TP" => Ok(Preset::TP),
            "TD" => Ok(Preset::TD),
            "HC" => Ok(Preset::HC),
            "SM" => Ok(Preset::SM),
            other => Err(SgError::Config(format!("unknown preset '{other}' (expected TP, TD, HC or SM)"))),
        }
    }
}

/// Rule and level map of a preset; `g` defaults to all ones.
pub fn preset(name: Preset, dim: usize, g: Option<Vec<f64>>) -> Result<(IndexRule, LevelMap)> {
    let g = g.unwrap_or_else(|| vec![1.0; dim]);
    if g.len() != dim {
        return Err(SgError::DimensionMismatch { expected: dim, got: g.len() });
    }
    if g.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
        return Err(SgError::Parameter("anisotropy weights must be positive".into()));
    }
    Ok((IndexRule { kind: name.rule_kind(), g }, name.level_map()))
}

/// Every `k` in the set with `k_n > 1` has `k - e_n` in the set.
pub fn is_downward_closed(set: &MultiIndexSet) -> bool {
    first_closure_violation(set).is_none()
}

fn first_closure_violation(set: &MultiIndexSet) -> Option<Vec<u32>> {
    let mut probe = vec![0u32; set.dim];
    for r in &set.rows {
        if r.contains(&0) {
            return Some(r.clone());
        }
        probe.copy_from_slice(r);
        for n in 0..set.dim {
            if r[n] > 1 {
                probe[n] -= 1;
                let ok = set.contains(&probe);
                probe[n] += 1;
                if !ok {
                    return Some(r.clone());
                }
            }
        }
    }
    None
}

fn require_closed(set: &MultiIndexSet) -> Result<()> {
    match first_closure_violation(set) {
        Some(bad) => Err(SgError::NotDownwardClosed(bad)),
        None => Ok(()),
    }
}

/// Indices outside the set whose backward neighbours all belong to it.
pub fn reduced_margin(set: &MultiIndexSet) -> Result<MultiIndexSet> {
    require_closed(set)?;
    let mut out = Vec::new();
    for r in &set.rows {
        for n in 0..set.dim {
            let mut cand = r.clone();
            cand[n] += 1;
            if set.contains(&cand) {
                continue;
            }
            let admissible = (0..set.dim).all(|k| {
                if cand[k] <= 1 {
                    return true;
                }
                let mut back = cand.clone();
                back[k] -= 1;
                set.contains(&back)
            });
            if admissible {
                out.push(cand);
            }
        }
    }
    if set.is_empty() {
        out.push(vec![1; set.dim]);
    }
    MultiIndexSet::new(set.dim, out)
}

/// `c_i = sum_{j in {0,1}^N, i + j in I} (-1)^|j|`, aligned with the rows of
/// the set (zero coefficients included).
pub fn combination_coefficients(set: &MultiIndexSet) -> Result<Vec<i64>> {
    require_closed(set)?;
    let mut coeffs = Vec::with_capacity(set.len());
    let mut probe = vec![0u32; set.dim];
    for r in &set.rows {
        // only directions with i + e_n in I can appear in a nonzero term
        let mut active = Vec::new();
        for n in 0..set.dim {
            probe.copy_from_slice(r);
            probe[n] += 1;
            if set.contains(&probe) {
                active.push(n);
            }
        }
        let mut c = 0i64;
        for mask in 0u64..(1u64 << active.len()) {
            probe.copy_from_slice(r);
            for (b, &n) in active.iter().enumerate() {
                if mask >> b & 1 == 1 {
                    probe[n] += 1;
                }
            }
            if mask == 0 || set.contains(&probe) {
                c += if mask.count_ones() % 2 == 0 { 1 } else { -1 };
            }
        }
        coeffs.push(c);
    }
    Ok(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(rows: &[&[u32]]) -> MultiIndexSet {
        MultiIndexSet::new(rows[0].len(), rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn td_rule(idx: &[u32]) -> f64 {
        idx.iter().map(|&i| i as f64 - 1.0).sum()
    }

    #[test]
    fn total_degree_examples() {
        let s = generate_rule_set(2, &td_rule, 3.0, 1).unwrap();
        let expect = set(&[&[1, 1], &[1, 2], &[1, 3], &[1, 4], &[2, 1], &[2, 2], &[2, 3], &[3, 1], &[3, 2], &[4, 1]]);
        assert_eq!(s, expect);
        assert_eq!(generate_rule_set(1, &td_rule, 0.0, 1).unwrap().rows(), &[vec![1]]);
        assert_eq!(fast_td_set(2, 3).unwrap(), expect);
        assert_eq!(fast_td_set(3, 0).unwrap().rows(), &[vec![1, 1, 1]]);
        assert_eq!(fast_td_set(2, 4).unwrap().len(), 15);
    }

    #[test]
    fn anisotropic_sum() {
        let rule = IndexRule { kind: RuleKind::Sum, g: vec![1.0, 2.0] };
        let s = generate_rule_set(2, &|i| rule.eval(i), 4.0, 1).unwrap();
        let expect = set(&[&[1, 1], &[1, 2], &[1, 3], &[2, 1], &[2, 2], &[3, 1], &[3, 2], &[4, 1], &[5, 1]]);
        assert_eq!(s, expect);
    }

    #[test]
    fn boxes_and_presets() {
        assert_eq!(box_set(&[2, 2]).unwrap(), set(&[&[1, 1], &[1, 2], &[2, 1], &[2, 2]]));
        assert_eq!(box_set(&[3, 1]).unwrap(), set(&[&[1, 1], &[2, 1], &[3, 1]]));
        assert_eq!(box_set(&[2, 2, 2]).unwrap().len(), 8);
        let (rule, map) = preset(Preset::SM, 2, None).unwrap();
        assert_eq!((rule.kind, map), (RuleKind::Sum, LevelMap::Doubling));
        assert_eq!(rule.eval(&[3, 2]), 3.0);
        let (rule, _) = preset(Preset::HC, 2, Some(vec![1.0, 2.0])).unwrap();
        assert_eq!(rule.eval(&[2, 3]), 18.0);
        let (rule, map) = preset(Preset::TP, 3, None).unwrap();
        assert_eq!(map, LevelMap::Linear);
        for w in 0..4u32 {
            let s = generate_rule_set(3, &|i| rule.eval(i), w as f64, 1).unwrap();
            assert_eq!(s, box_set(&[w + 1; 3]).unwrap());
        }
        assert!("XX".parse::<Preset>().is_err());
    }

    #[test]
    fn downward_closedness() {
        assert!(is_downward_closed(&set(&[&[1, 1], &[1, 2], &[2, 1], &[3, 1]])));
        assert!(!is_downward_closed(&set(&[&[1, 1], &[1, 2], &[2, 1], &[3, 1], &[3, 2]])));
        assert!(is_downward_closed(&set(&[&[1, 1]])));
    }

    #[test]
    fn margins() {
        assert_eq!(reduced_margin(&set(&[&[1, 1]])).unwrap(), set(&[&[1, 2], &[2, 1]]));
        let s = set(&[&[1, 1], &[1, 2], &[2, 1], &[3, 1]]);
        assert_eq!(reduced_margin(&s).unwrap(), set(&[&[1, 3], &[2, 2], &[4, 1]]));
        let bad = set(&[&[1, 1], &[3, 1]]);
        assert!(matches!(reduced_margin(&bad), Err(SgError::NotDownwardClosed(_))));
    }

    #[test]
    fn coefficients() {
        let s = set(&[&[1, 1], &[1, 2], &[2, 1], &[3, 1]]);
        assert_eq!(combination_coefficients(&s).unwrap(), vec![-1, 1, 0, 1]);
        assert_eq!(combination_coefficients(&set(&[&[1, 1]])).unwrap(), vec![1]);
        let td = fast_td_set(2, 3).unwrap();
        let c = combination_coefficients(&td).unwrap();
        let nonzero: Vec<(Vec<u32>, i64)> = td.iter().cloned().zip(c).filter(|(_, c)| *c != 0).collect();
        let idx: Vec<Vec<u32>> = nonzero.iter().map(|p| p.0.clone()).collect();
        assert_eq!(idx, vec![vec![1, 3], vec![1, 4], vec![2, 2], vec![2, 3], vec![3, 1], vec![3, 2], vec![4, 1]]);
        assert_eq!(nonzero[0].1, -1);
        let bad = set(&[&[1, 1], &[1, 3]]);
        assert!(combination_coefficients(&bad).is_err());
    }

    #[test]
    fn insertion_and_sorting() {
        let s = set(&[&[1, 1], &[2, 1]]);
        let t = s.with_index(&[1, 2]).unwrap();
        assert_eq!(t.rows(), &[vec![1, 1], vec![1, 2], vec![2, 1]]);
        assert!(s.with_index(&[2, 1]).is_err());
        assert!(matches!(MultiIndexSet::from_sorted(2, vec![vec![2, 1], vec![1, 1]]), Err(SgError::Unsorted)));
    }

    /// Random downward-closed set: the closure of a few random indices.
    fn closure(dim: usize, tips: &[Vec<u32>]) -> MultiIndexSet {
        let mut rows = Vec::new();
        for t in tips {
            rows.extend(box_set(t).unwrap().rows().iter().cloned());
        }
        MultiIndexSet::new(dim, rows).unwrap()
    }

    fn tips_strategy() -> impl Strategy<Value = (usize, Vec<Vec<u32>>)> {
        (1usize..=3).prop_flat_map(|dim| (Just(dim), prop::collection::vec(prop::collection::vec(1u32..=4, dim), 1..4)))
    }

    proptest! {
        #[test]
        fn coefficients_sum_to_one((dim, tips) in tips_strategy()) {
            let s = closure(dim, &tips);
            let c = combination_coefficients(&s).unwrap();
            prop_assert_eq!(c.iter().sum::<i64>(), 1);
        }

        #[test]
        fn margin_extends_closed_sets((dim, tips) in tips_strategy()) {
            let s = closure(dim, &tips);
            let margin = reduced_margin(&s).unwrap();
            let mut all: Vec<Vec<u32>> = s.rows().to_vec();
            for m in margin.iter() {
                prop_assert!(!s.contains(m));
                prop_assert!(is_downward_closed(&s.with_index(m).unwrap()));
                all.push(m.clone());
            }
            prop_assert!(is_downward_closed(&MultiIndexSet::new(dim, all).unwrap()));
        }

        #[test]
        fn telescoping_on_boxes(jj in prop::collection::vec(1u32..=3, 1..=3), seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let s = box_set(&jj).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let table: Vec<f64> = (0..s.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let c = combination_coefficients(&s).unwrap();
            let combined: f64 = c.iter().zip(&table).map(|(&c, &f)| c as f64 * f).sum();
            let top = table[s.position(&jj).unwrap()];
            prop_assert!((combined - top).abs() < 1e-12);
        }

        #[test]
        fn symmetric_rule_is_permutation_invariant(dim in 2usize..=4, w in 0u32..=4) {
            let s = generate_rule_set(dim, &td_rule, w as f64, 1).unwrap();
            let permuted: Vec<Vec<u32>> = s.iter().map(|r| r.iter().rev().cloned().collect()).collect();
            prop_assert_eq!(MultiIndexSet::new(dim, permuted).unwrap(), s.clone());
            prop_assert_eq!(fast_td_set(dim, w).unwrap(), s);
        }
    }
}
