//! JSON grid files and CSV exports.
//!
//! A grid file stores the knot families, level map and multi-index set (from
//! which the tensor grids are rebuilt on load), per-tensor metadata as a
//! consistency check, the reduced arrays, and optional evaluation table,
//! adaptive state and polynomial chaos expansion.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adaptive::AdaptState;
use crate::dedup::PointIndex;
use crate::evalkit::{EvaluationTable, Interpolant};
use crate::grid::{build_sparse_grid, ReducedGrid, SparseGrid};
use crate::knots::KnotFamily;
use crate::levels::LevelMap;
use crate::midx::MultiIndexSet;
use crate::pce::PcExpansion;
use crate::{Result, SgError};

pub const FORMAT_VERSION: u32 = 1;

/// A grid with everything attached to it.
#[derive(Debug, Clone, PartialEq)]
pub struct GridBundle {
    pub grid: SparseGrid,
    pub reduced: ReducedGrid,
    pub values: Option<EvaluationTable>,
    pub adapt_state: Option<AdaptState>,
    pub pce: Option<PcExpansion>,
}

impl GridBundle {
    pub fn new(grid: SparseGrid, reduced: ReducedGrid) -> Self {
        GridBundle { grid, reduced, values: None, adapt_state: None, pce: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorMeta {
    idx: Vec<u32>,
    coeff: i64,
    m: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GridFile {
    format_version: u32,
    dim: usize,
    families: Vec<KnotFamily>,
    level_map: LevelMap,
    set: Vec<Vec<u32>>,
    tensors: Vec<TensorMeta>,
    reduced: ReducedGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<EvaluationTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    adapt_state: Option<AdaptState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pce: Option<PcExpansion>,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let start: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (start + column.saturating_sub(1)).min(text.len())
}

fn format_error(text: &str, e: serde_json::Error) -> SgError {
    SgError::Format { offset: byte_offset(text, e.line(), e.column()), message: e.to_string() }
}

/// Serializes a bundle to JSON text.
pub fn to_json(bundle: &GridBundle) -> Result<String> {
    let g = &bundle.grid;
    let file = GridFile {
        format_version: FORMAT_VERSION,
        dim: g.dim,
        families: g.families.clone(),
        level_map: g.level_map,
        set: g.set.rows().to_vec(),
        tensors: g.tensors.iter().map(|t| TensorMeta { idx: t.idx.clone(), coeff: t.coeff, m: t.m.clone() }).collect(),
        reduced: bundle.reduced.clone(),
        values: bundle.values.clone(),
        adapt_state: bundle.adapt_state.clone(),
        pce: bundle.pce.clone(),
    };
    let mut s =
        serde_json::to_string_pretty(&file).map_err(|e| SgError::Format { offset: 0, message: e.to_string() })?;
    s.push('\n');
    Ok(s)
}

/// Parses JSON text written by [`to_json`]; tensor grids are rebuilt.
pub fn from_json(text: &str) -> Result<GridBundle> {
    let probe: VersionProbe = serde_json::from_str(text).map_err(|e| format_error(text, e))?;
    if probe.format_version != FORMAT_VERSION {
        return Err(SgError::Version { found: probe.format_version, expected: FORMAT_VERSION });
    }
    let file: GridFile = serde_json::from_str(text).map_err(|e| format_error(text, e))?;
    if file.families.len() != file.dim {
        return Err(SgError::DimensionMismatch { expected: file.dim, got: file.families.len() });
    }
    let set = MultiIndexSet::from_sorted(file.dim, file.set)?;
    let grid = build_sparse_grid(&set, &file.families, file.level_map, None)?;
    let meta: Vec<TensorMeta> =
        grid.tensors.iter().map(|t| TensorMeta { idx: t.idx.clone(), coeff: t.coeff, m: t.m.clone() }).collect();
    if meta != file.tensors {
        return Err(SgError::Format {
            offset: 0,
            message: "tensor metadata does not match the multi-index set".into(),
        });
    }
    let r = &file.reduced;
    if r.dim != file.dim
        || r.knots.len() != r.size * r.dim
        || r.weights.len() != r.size
        || r.n.len() != grid.extended_size()
    {
        return Err(SgError::Format { offset: 0, message: "reduced grid arrays do not match the grid".into() });
    }
    if let Some(v) = &file.values {
        if v.points != r.size || v.values.len() != v.points * v.outputs {
            return Err(SgError::DimensionMismatch { expected: r.size, got: v.points });
        }
    }
    Ok(GridBundle { grid, reduced: file.reduced, values: file.values, adapt_state: file.adapt_state, pce: file.pce })
}

pub fn save_grid(path: &Path, bundle: &GridBundle) -> Result<()> {
    fs::write(path, to_json(bundle)?)?;
    Ok(())
}

pub fn load_grid(path: &Path) -> Result<GridBundle> {
    from_json(&fs::read_to_string(path)?)
}

/// CSV text: header row then one line per record, LF endings.
fn csv(header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("{prefix}{k}")).collect()
}

/// Reduced knots with their weights.
pub fn knots_csv(reduced: &ReducedGrid) -> String {
    let mut header = names("y", reduced.dim);
    header.push("weight".into());
    csv(
        &header,
        reduced.iter_knots().zip(&reduced.weights).map(|(y, &w)| {
            let mut row = y.to_vec();
            row.push(w);
            row
        }),
    )
}

/// Distinct projections of the reduced knots onto three dimensions (0-based).
pub fn knots3d_projection_csv(reduced: &ReducedGrid, dims: [usize; 3]) -> Result<String> {
    if let Some(&bad) = dims.iter().find(|&&d| d >= reduced.dim) {
        return Err(SgError::Config(format!("projection dimension {} out of range 1..={}", bad + 1, reduced.dim)));
    }
    let proj: Vec<f64> = reduced.iter_knots().flat_map(|y| dims.map(|d| y[d])).collect();
    let delta: Vec<f64> =
        dims.iter().map(|&d| PointIndex::scaled_tolerance(reduced.dim, &reduced.knots, reduced.tol)[d]).collect();
    let mut index = PointIndex::new(delta);
    for p in proj.chunks_exact(3) {
        index.find_or_insert(p);
    }
    let header: Vec<String> = dims.iter().map(|d| format!("y{}", d + 1)).collect();
    Ok(csv(&header, index.into_points().chunks_exact(3).map(<[f64]>::to_vec)))
}

/// Rows of a multi-index set.
pub fn midx_csv(set: &MultiIndexSet) -> String {
    csv(&names("i", set.dim()), set.iter().map(|r| r.iter().map(|&v| v as f64).collect()))
}

/// Expansion coefficients by total degree, then lexicographically.
pub fn pce_csv(pce: &PcExpansion) -> String {
    let mut header = names("p", pce.dim());
    header.extend(names("c", pce.outputs));
    csv(
        &header,
        pce.sorted_rows().into_iter().map(|q| {
            let mut row: Vec<f64> = pce.lambda.rows()[q].iter().map(|&v| v as f64).collect();
            row.extend_from_slice(&pce.coeffs[q * pce.outputs..(q + 1) * pce.outputs]);
            row
        }),
    )
}

/// Points and values, one row per point.
pub fn samples_csv(dim: usize, points: &[f64], outputs: usize, values: &[f64]) -> String {
    let mut header = names("y", dim);
    header.extend(names("f", outputs));
    csv(
        &header,
        points.chunks_exact(dim).zip(values.chunks_exact(outputs)).map(|(y, v)| {
            let mut row = y.to_vec();
            row.extend_from_slice(v);
            row
        }),
    )
}

/// A single named column.
pub fn column_csv(name: &str, values: &[f64]) -> String {
    csv(&[name.to_string()], values.iter().map(|&v| vec![v]))
}

/// Sampling box of the interpolant plots: the density support where it is
/// finite, else the extent of the knots.
pub fn plot_box(grid: &SparseGrid, reduced: &ReducedGrid) -> (Vec<f64>, Vec<f64>) {
    let mut lo = Vec::with_capacity(grid.dim);
    let mut hi = Vec::with_capacity(grid.dim);
    for n in 0..grid.dim {
        let (a, b) = grid.families[n].distribution().support();
        let kmin = reduced.iter_knots().map(|y| y[n]).fold(f64::INFINITY, f64::min);
        let kmax = reduced.iter_knots().map(|y| y[n]).fold(f64::NEG_INFINITY, f64::max);
        lo.push(if a.is_finite() { a } else { kmin });
        hi.push(if b.is_finite() { b } else { kmax });
    }
    (lo, hi)
}

/// Interpolant on `resolution x resolution` cartesian samples of each
/// two-dimensional cut (pairs of 0-based dimensions); the other coordinates
/// sit at the middle of the sampling box. One row per sample:
/// cut number, coordinates, values.
pub fn interp_samples_csv(
    grid: &SparseGrid,
    reduced: &ReducedGrid,
    values: &EvaluationTable,
    cuts: &[(usize, usize)],
    resolution: usize,
) -> Result<String> {
    let dim = grid.dim;
    if resolution < 2 {
        return Err(SgError::Config(format!("resolution must be at least 2, got {resolution}")));
    }
    for &(i, j) in cuts {
        if i >= dim || j >= dim || i == j {
            return Err(SgError::Config(format!(
                "cut ({}, {}) is not a pair of distinct dimensions in 1..={dim}",
                i + 1,
                j + 1
            )));
        }
    }
    let (lo, hi) = plot_box(grid, reduced);
    let mid: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let interp = Interpolant::new(grid, reduced, values)?;
    let mut header = vec!["cut".to_string()];
    header.extend(names("y", dim));
    header.extend(names("f", values.outputs));
    let mut rows = Vec::new();
    for (c, &(i, j)) in cuts.iter().enumerate() {
        let lin = |n: usize, k: usize| lo[n] + (hi[n] - lo[n]) * k as f64 / (resolution - 1) as f64;
        let mut pts = Vec::with_capacity(resolution * resolution * dim);
        for b in 0..resolution {
            for a in 0..resolution {
                let mut y = mid.clone();
                y[i] = lin(i, a);
                y[j] = lin(j, b);
                pts.extend(y);
            }
        }
        let vals = interp.eval(&pts)?;
        for (y, v) in pts.chunks_exact(dim).zip(vals.chunks_exact(values.outputs)) {
            let mut row = vec![(c + 1) as f64];
            row.extend_from_slice(y);
            row.extend_from_slice(v);
            rows.push(row);
        }
    }
    Ok(csv(&header, rows))
}

/// Cuts for a `dim`-dimensional grid when none are given: the single pair
/// `(1, 2)`.
pub fn default_cuts(dim: usize) -> Vec<(usize, usize)> {
    if dim >= 2 {
        vec![(0, 1)]
    } else {
        Vec::new()
    }
}

/// Parses `1,2,3,4,1,4` into the 0-based pairs `(0,1), (2,3), (0,3)`.
pub fn parse_cuts(spec: &str) -> Result<Vec<(usize, usize)>> {
    let nums: Vec<usize> = spec
        .split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|_| SgError::Config(format!("bad cut entry '{s}'"))))
        .collect::<Result<_>>()?;
    if !nums.len().is_multiple_of(2) || nums.is_empty() || nums.contains(&0) {
        return Err(SgError::Config(format!("cuts need pairs of 1-based dimensions, got '{spec}'")));
    }
    Ok(nums.chunks_exact(2).map(|p| (p[0] - 1, p[1] - 1)).collect())
}
