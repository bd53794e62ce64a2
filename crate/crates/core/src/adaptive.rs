//! A-posteriori adaptive sparse grids: indices of the reduced margin are
//! scored by profits and the best one is moved into the set.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dedup::PointIndex;
use crate::evalkit::{evaluate_points, quadrature, EvaluationTable, Model, TensorInterp};
use crate::grid::{build_sparse_grid, build_tensor_grid, reduce, ReducedGrid, SparseGrid, TensorGrid, DEFAULT_TOL};
use crate::knots::KnotFamily;
use crate::levels::LevelMap;
use crate::midx::{reduced_margin, MultiIndexSet};
use crate::{Result, SgError};

/// Profit definitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profit {
    Deltaint,
    DeltaintPerNewPoints,
    Linf,
    #[default]
    LinfPerNewPoints,
    WeightedLinf,
    WeightedLinfPerNewPoints,
}

impl Profit {
    pub fn name(self) -> &'static str {
        match self {
            Profit::Deltaint => "deltaint",
            Profit::DeltaintPerNewPoints => "deltaint/new_points",
            Profit::Linf => "Linf",
            Profit::LinfPerNewPoints => "Linf/new_points",
            Profit::WeightedLinf => "weighted Linf",
            Profit::WeightedLinfPerNewPoints => "weighted Linf/new_points",
        }
    }

    pub fn is_weighted(self) -> bool {
        matches!(self, Profit::WeightedLinf | Profit::WeightedLinfPerNewPoints)
    }

    pub fn per_work(self) -> bool {
        matches!(self, Profit::DeltaintPerNewPoints | Profit::LinfPerNewPoints | Profit::WeightedLinfPerNewPoints)
    }
}

impl FromStr for Profit {
    type Err = SgError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_lowercase().replace(' ', "_").replace("/new_points", "_per_new_points");
        Ok(match key.as_str() {
            "deltaint" => Profit::Deltaint,
            "deltaint_per_new_points" => Profit::DeltaintPerNewPoints,
            "linf" => Profit::Linf,
            "linf_per_new_points" => Profit::LinfPerNewPoints,
            "weighted_linf" => Profit::WeightedLinf,
            "weighted_linf_per_new_points" => Profit::WeightedLinfPerNewPoints,
            _ => return Err(SgError::Config(format!("unknown profit '{s}'"))),
        })
    }
}

impl fmt::Display for Profit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Weight function for the weighted profits.
pub type PdfWeight = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Controls of the adaptive loop.
#[derive(Clone)]
pub struct AdaptControls {
    pub nested: bool,
    pub profit: Profit,
    pub pdf_weight: Option<PdfWeight>,
    pub max_pts: usize,
    pub prof_tol: f64,
    pub var_buffer_size: usize,
}

impl AdaptControls {
    pub fn new(nested: bool) -> Self {
        AdaptControls {
            nested,
            profit: Profit::default(),
            pdf_weight: None,
            max_pts: 1000,
            prof_tol: 1e-14,
            var_buffer_size: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.profit.is_weighted() && self.pdf_weight.is_none() {
            return Err(SgError::Config(format!("profit '{}' needs a pdf weight", self.profit)));
        }
        if self.max_pts < 1 {
            return Err(SgError::Config("max_pts must be at least 1".into()));
        }
        if !(self.prof_tol >= 0.0) {
            return Err(SgError::Config(format!("prof_tol must be >= 0, got {}", self.prof_tol)));
        }
        Ok(())
    }
}

impl fmt::Debug for AdaptControls {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AdaptControls")
            .field("nested", &self.nested)
            .field("profit", &self.profit)
            .field("pdf_weight", &self.pdf_weight.as_ref().map(|_| "fn"))
            .field("max_pts", &self.max_pts)
            .field("prof_tol", &self.prof_tol)
            .field("var_buffer_size", &self.var_buffer_size)
            .finish()
    }
}

/// Work indicator: new knots brought in by `idx` (nested) or the size of
/// its tensor grid (non-nested).
pub fn work_indicator(idx: &[u32], nested: bool, level_map: LevelMap) -> Result<u64> {
    let mut w: u64 = 1;
    for &i in idx {
        if i == 0 {
            return Err(SgError::Parameter(format!("multi-index entries must be >= 1, got {idx:?}")));
        }
        let m = level_map.apply(i)? as u64;
        let f = if nested { m - level_map.apply(i - 1)? as u64 } else { m };
        w = w.saturating_mul(f);
    }
    Ok(w)
}

/// Everything known about one index of `I` or of its reduced margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRecord {
    pub idx: Vec<u32>,
    /// `Q_{I + idx} - Q_I`, per output component.
    pub delta_q: Vec<f64>,
    /// Quadrature error indicator.
    pub err_quad: f64,
    /// Pointwise error indicator with unit weight.
    pub err_linf: f64,
    /// Pointwise error indicator weighted by the pdf, when one was given.
    pub err_weighted: Option<f64>,
    pub work: u64,
    /// Size of the testing set.
    pub testing_points: usize,
}

impl IndexRecord {
    pub fn profit(&self, profit: Profit) -> Result<f64> {
        let e = match profit {
            Profit::Deltaint | Profit::DeltaintPerNewPoints => self.err_quad,
            Profit::Linf | Profit::LinfPerNewPoints => self.err_linf,
            Profit::WeightedLinf | Profit::WeightedLinfPerNewPoints => {
                self.err_weighted.ok_or_else(|| SgError::Config(format!("profit '{profit}' needs a pdf weight")))?
            }
        };
        Ok(if profit.per_work() { e / self.work as f64 } else { e })
    }
}

/// One pass of the adaptive loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub nb_pts_visited: usize,
    pub intf: Vec<f64>,
    pub max_profit: f64,
    pub added: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxPoints,
    Tolerance,
    Exhausted,
}

/// Resumable state of an adaptive run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptState {
    pub dim: usize,
    pub families: Vec<KnotFamily>,
    pub level_map: LevelMap,
    pub outputs: usize,
    pub set: Vec<Vec<u32>>,
    pub margin: Vec<Vec<u32>>,
    pub records: Vec<IndexRecord>,
    pub delta: Vec<f64>,
    pub points: Vec<f64>,
    pub values: Vec<f64>,
    pub num_evals: usize,
    pub history: Vec<HistoryEntry>,
}

impl AdaptState {
    pub fn record(&self, idx: &[u32]) -> Option<&IndexRecord> {
        self.records.iter().find(|r| r.idx == idx)
    }

    pub fn nb_pts_visited(&self) -> usize {
        self.points.len() / self.dim
    }

    /// Profit of every margin index under `profit`.
    pub fn margin_profits(&self, profit: Profit) -> Result<Vec<f64>> {
        self.margin
            .iter()
            .map(|i| self.record(i).ok_or_else(|| SgError::Contract(format!("no record for {i:?}")))?.profit(profit))
            .collect()
    }
}

/// Output of [`adapt`]: the grid over `I` and its reduced margin, with the
/// function values on it.
#[derive(Debug, Clone)]
pub struct AdaptResult {
    pub dim: usize,
    pub extended: SparseGrid,
    pub reduced: ReducedGrid,
    pub values: EvaluationTable,
    pub nb_pts: usize,
    pub nested: bool,
    pub nb_pts_visited: usize,
    pub num_evals: usize,
    pub intf: Vec<f64>,
    pub stop: StopReason,
    pub state: AdaptState,
}

/// A failed run, with the state reached so far for resuming.
#[derive(Debug)]
pub struct AdaptFailure {
    pub error: SgError,
    pub state: Option<Box<AdaptState>>,
}

impl fmt::Display for AdaptFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for AdaptFailure {}

impl From<AdaptFailure> for SgError {
    fn from(e: AdaptFailure) -> Self {
        e.error
    }
}

impl From<SgError> for AdaptFailure {
    fn from(error: SgError) -> Self {
        AdaptFailure { error, state: None }
    }
}

struct Cached {
    grid: TensorGrid,
    pos: Option<Vec<usize>>,
}

struct Run<'a> {
    f: &'a dyn Model,
    controls: &'a AdaptControls,
    state: AdaptState,
    store: PointIndex,
    lookup: HashMap<Vec<u32>, usize>,
    tensors: HashMap<Vec<u32>, Cached>,
}

fn dedup_delta(families: &[KnotFamily], level_map: LevelMap) -> Result<Vec<f64>> {
    families
        .iter()
        .map(|fam| {
            let (a, b) = fam.distribution().support();
            let range = if a.is_finite() && b.is_finite() {
                b - a
            } else {
                let nodes = fam.rule(level_map.apply(3)?.max(2))?.nodes;
                nodes.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                    - nodes.iter().cloned().fold(f64::INFINITY, f64::min)
            };
            Ok(DEFAULT_TOL * range.max(1.0))
        })
        .collect()
}

impl<'a> Run<'a> {
    fn tensor(&mut self, idx: &[u32]) -> Result<&mut Cached> {
        if !self.tensors.contains_key(idx) {
            let grid = build_tensor_grid(idx, &self.state.families, self.state.level_map)?;
            self.tensors.insert(idx.to_vec(), Cached { grid, pos: None });
        }
        Ok(self.tensors.get_mut(idx).expect("inserted above"))
    }

    /// Store positions of the knots of tensor `idx`, evaluating `f` at the
    /// knots not seen before.
    fn evaluate(&mut self, idx: &[u32]) -> Result<Vec<usize>> {
        if let Some(pos) = &self.tensor(idx)?.pos {
            return Ok(pos.clone());
        }
        let dim = self.state.dim;
        let grid = self.tensors[idx].grid.clone();
        let mut batch = PointIndex::new(self.state.delta.clone());
        let mut slots = Vec::with_capacity(grid.size);
        for j in 0..grid.size {
            let y = grid.knot(j);
            slots.push(match self.store.find(y) {
                Some(p) => Ok(p),
                None => Err(batch.find_or_insert(y).0),
            });
        }
        let base = self.store.len();
        if !batch.is_empty() {
            let pts = batch.into_points();
            let (outputs, values) = evaluate_points(self.f, dim, &pts)?;
            if self.state.outputs == 0 {
                self.state.outputs = outputs;
            } else if outputs != self.state.outputs {
                return Err(SgError::DimensionMismatch { expected: self.state.outputs, got: outputs });
            }
            for y in pts.chunks_exact(dim) {
                self.store.insert(y);
            }
            self.state.points.extend_from_slice(&pts);
            self.state.values.extend(values);
            self.state.num_evals += pts.len() / dim;
        }
        let pos: Vec<usize> = slots.into_iter().map(|s| s.unwrap_or_else(|k| base + k)).collect();
        self.tensors.get_mut(idx).expect("cached").pos = Some(pos.clone());
        Ok(pos)
    }

    fn gather(&self, pos: &[usize]) -> Vec<f64> {
        let v = self.state.outputs;
        let mut out = Vec::with_capacity(pos.len() * v);
        for &p in pos {
            out.extend_from_slice(&self.state.values[p * v..(p + 1) * v]);
        }
        out
    }

    /// Detail of `idx`: the terms `(-1)^|z| F_{idx - z}` over `z` in `{0,1}^N`.
    fn detail_terms(idx: &[u32]) -> Vec<(Vec<u32>, f64)> {
        let active: Vec<usize> = (0..idx.len()).filter(|&n| idx[n] > 1).collect();
        (0u64..1 << active.len())
            .map(|mask| {
                let mut j = idx.to_vec();
                let mut sign = 1.0;
                for (b, &n) in active.iter().enumerate() {
                    if mask >> b & 1 == 1 {
                        j[n] -= 1;
                        sign = -sign;
                    }
                }
                (j, sign)
            })
            .collect()
    }

    fn compute_record(&mut self, idx: &[u32]) -> Result<IndexRecord> {
        let nested = self.controls.nested;
        let work = work_indicator(idx, nested, self.state.level_map)?;
        let terms = Self::detail_terms(idx);
        let mut parts = Vec::with_capacity(terms.len());
        for (j, sign) in &terms {
            let pos = self.evaluate(j)?;
            parts.push((j.clone(), *sign, pos));
        }
        let v = self.state.outputs;
        let mut delta_q = vec![0.0; v];
        let mut interps = Vec::with_capacity(parts.len());
        for (j, sign, pos) in &parts {
            let vals = self.gather(pos);
            let grid = &self.tensors[j].grid;
            for (q, &w) in grid.weights.iter().enumerate() {
                for k in 0..v {
                    delta_q[k] += sign * w * vals[q * v + k];
                }
            }
            interps.push(TensorInterp::new(grid, vals, *sign));
        }
        let own = &self.tensors[idx].grid;
        let testing: Vec<Vec<f64>> = if nested {
            let mut older = PointIndex::new(self.state.delta.clone());
            for n in 0..idx.len() {
                if idx[n] > 1 {
                    let mut b = idx.to_vec();
                    b[n] -= 1;
                    let g = &self.tensors[&b].grid;
                    for q in 0..g.size {
                        older.insert(g.knot(q));
                    }
                }
            }
            (0..own.size).map(|q| own.knot(q)).filter(|y| older.find(y).is_none()).map(<[f64]>::to_vec).collect()
        } else {
            (0..own.size).map(|q| own.knot(q).to_vec()).collect()
        };
        let mut err_linf: f64 = 0.0;
        let mut err_weighted: Option<f64> = self.controls.pdf_weight.as_ref().map(|_| 0.0);
        let (mut scratch, mut basis) = (Vec::new(), Vec::new());
        let mut du = vec![0.0; v];
        for y in &testing {
            du.iter_mut().for_each(|d| *d = 0.0);
            for t in &interps {
                t.add_at(y, &mut du, &mut scratch, &mut basis);
            }
            let e = du.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            err_linf = err_linf.max(e);
            if let (Some(w), Some(pdf)) = (err_weighted.as_mut(), self.controls.pdf_weight.as_ref()) {
                *w = w.max(e * pdf(y));
            }
        }
        let err_quad = delta_q.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        Ok(IndexRecord {
            idx: idx.to_vec(),
            delta_q,
            err_quad,
            err_linf,
            err_weighted,
            work,
            testing_points: testing.len(),
        })
    }

    fn ensure_record(&mut self, idx: &[u32]) -> Result<()> {
        let fresh = match self.lookup.get(idx) {
            None => true,
            Some(&k) => self.controls.profit.is_weighted() && self.state.records[k].err_weighted.is_none(),
        };
        if fresh {
            let r = self.compute_record(idx)?;
            match self.lookup.get(idx) {
                Some(&k) => self.state.records[k] = r,
                None => {
                    self.lookup.insert(idx.to_vec(), self.state.records.len());
                    self.state.records.push(r);
                }
            }
        }
        Ok(())
    }

    fn visible_dims(&self) -> usize {
        let dim = self.state.dim;
        if self.controls.var_buffer_size == 0 {
            return dim;
        }
        let active = self
            .state
            .set
            .iter()
            .flat_map(|i| i.iter().enumerate().filter(|(_, &v)| v > 1).map(|(n, _)| n + 1))
            .max()
            .unwrap_or(0);
        (active + self.controls.var_buffer_size).min(dim)
    }

    fn margin(&self) -> Result<Vec<Vec<u32>>> {
        let set = MultiIndexSet::new(self.state.dim, self.state.set.clone())?;
        let visible = self.visible_dims();
        let map = self.state.level_map;
        Ok(reduced_margin(&set)?
            .rows()
            .iter()
            .filter(|i| i.iter().enumerate().all(|(n, &v)| v == 1 || n < visible))
            .filter(|i| i.iter().all(|&v| map.apply(v).is_ok()))
            .cloned()
            .collect())
    }

    fn intf(&self) -> Vec<f64> {
        let mut q = vec![0.0; self.state.outputs];
        for i in self.state.set.iter().chain(&self.state.margin) {
            let r = &self.state.records[self.lookup[i]];
            for (a, b) in q.iter_mut().zip(&r.delta_q) {
                *a += b;
            }
        }
        q
    }

    fn step(&mut self) -> Result<Option<StopReason>> {
        let margin = self.margin()?;
        for i in &margin {
            self.ensure_record(i)?;
        }
        self.state.margin = margin;
        let profit = self.controls.profit;
        let mut best: Option<(usize, f64)> = None;
        for (k, i) in self.state.margin.iter().enumerate() {
            let p = self.state.records[self.lookup[i]].profit(profit)?;
            if best.is_none_or(|(_, b)| p > b) {
                best = Some((k, p));
            }
        }
        let intf = self.intf();
        let visited = self.state.nb_pts_visited();
        let max_profit = best.map_or(0.0, |b| b.1);
        let stop = if visited > self.controls.max_pts {
            Some(StopReason::MaxPoints)
        } else if best.is_none() {
            Some(StopReason::Exhausted)
        } else if max_profit <= self.controls.prof_tol {
            Some(StopReason::Tolerance)
        } else {
            None
        };
        let added = match (stop, best) {
            (None, Some((k, _))) => {
                let idx = self.state.margin.remove(k);
                let pos = self.state.set.binary_search(&idx).unwrap_err();
                self.state.set.insert(pos, idx.clone());
                Some(idx)
            }
            _ => None,
        };
        self.state.history.push(HistoryEntry { nb_pts_visited: visited, intf, max_profit, added });
        Ok(stop)
    }
}

/// Runs the adaptive algorithm from `I = {[1, ..., 1]}`, or continues from
/// `previous` (whose families and level map must match).
pub fn adapt(
    f: &dyn Model,
    families: &[KnotFamily],
    level_map: LevelMap,
    previous: Option<&AdaptState>,
    controls: &AdaptControls,
) -> std::result::Result<AdaptResult, AdaptFailure> {
    controls.validate()?;
    let dim = families.len();
    if dim == 0 {
        return Err(SgError::Parameter("adaptive grids need dim >= 1".into()).into());
    }
    if controls.nested {
        if let Some(fam) = families.iter().find(|fam| !fam.nested_with(level_map)) {
            return Err(SgError::Config(format!(
                "{} knots are not nested under the {} level map; set nested = false",
                fam.name(),
                level_map.name()
            ))
            .into());
        }
    }
    let state = match previous {
        Some(p) => {
            if p.families != families || p.level_map != level_map {
                return Err(SgError::Contract("resumed run must use the same knots and level map".into()).into());
            }
            p.clone()
        }
        None => AdaptState {
            dim,
            families: families.to_vec(),
            level_map,
            outputs: 0,
            set: vec![vec![1; dim]],
            margin: Vec::new(),
            records: Vec::new(),
            delta: dedup_delta(families, level_map)?,
            points: Vec::new(),
            values: Vec::new(),
            num_evals: 0,
            history: Vec::new(),
        },
    };
    let mut store = PointIndex::new(state.delta.clone());
    for y in state.points.chunks_exact(dim) {
        store.insert(y);
    }
    let lookup = state.records.iter().enumerate().map(|(k, r)| (r.idx.clone(), k)).collect();
    let mut run = Run { f, controls, state, store, lookup, tensors: HashMap::new() };
    let fail = |run: Run<'_>, error: SgError| AdaptFailure { error, state: Some(Box::new(run.state)) };
    let root = vec![1; dim];
    if let Err(e) = run.ensure_record(&root) {
        return Err(fail(run, e));
    }
    let stop = loop {
        match run.step() {
            Ok(Some(reason)) => break reason,
            Ok(None) => {}
            Err(e) => return Err(fail(run, e)),
        }
    };
    finish(run.state, controls.nested, stop).map_err(AdaptFailure::from)
}

fn finish(state: AdaptState, nested: bool, stop: StopReason) -> Result<AdaptResult> {
    let dim = state.dim;
    let mut rows = state.set.clone();
    rows.extend(state.margin.iter().cloned());
    let set = MultiIndexSet::new(dim, rows)?;
    let extended = build_sparse_grid(&set, &state.families, state.level_map, None)?;
    let reduced = reduce(&extended, None)?;
    let mut store = PointIndex::new(state.delta.clone());
    for y in state.points.chunks_exact(dim) {
        store.insert(y);
    }
    let v = state.outputs;
    let mut values = Vec::with_capacity(reduced.size * v);
    for y in reduced.iter_knots() {
        let p = store.find(y).ok_or_else(|| SgError::Contract(format!("knot {y:?} was never evaluated")))?;
        values.extend_from_slice(&state.values[p * v..(p + 1) * v]);
    }
    let values = EvaluationTable::new(v, reduced.size, values)?;
    let intf = quadrature(&values, &reduced)?;
    Ok(AdaptResult {
        dim,
        nb_pts: reduced.size,
        nested,
        nb_pts_visited: state.nb_pts_visited(),
        num_evals: state.num_evals,
        intf,
        stop,
        extended,
        reduced,
        values,
        state,
    })
}
