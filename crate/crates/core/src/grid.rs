//! Rectilinear grids and node-valued scalar fields.
//!
//! Fields are stored row-major with the last dimension varying fastest.
//! Boundaries are handled with linearly extrapolated ghost nodes.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod format;

/// Largest supported state dimension.
pub const MAX_DIM: usize = 4;

/// Smallest node count per dimension; the fifth-order stencil needs a
/// three-node ghost band on each side of a line.
pub const MIN_NODES: usize = 7;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unsupported dimension {0} (expected 1..={MAX_DIM})")]
    UnsupportedDimension(usize),
    #[error("dimension {dim} has {count} nodes, need at least {MIN_NODES}")]
    TooFewNodes { dim: usize, count: usize },
    #[error("dimension {dim} has degenerate extent [{min}, {max}]")]
    DegenerateExtent { dim: usize, min: f64, max: f64 },
    #[error("point {point:?} lies outside the grid box")]
    OutOfDomain { point: Vec<f64> },
    #[error("field has {got} values, grid has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value {value} at node {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
}

/// Axis-aligned rectilinear grid over a compact box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    mins: Vec<f64>,
    maxs: Vec<f64>,
    counts: Vec<usize>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
}

/// Serialized form of a [`Grid`]; spacing is always re-derived.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    pub counts: Vec<usize>,
}

impl TryFrom<GridSpec> for Grid {
    type Error = GridError;
    fn try_from(spec: GridSpec) -> Result<Self, Self::Error> {
        Grid::new(&spec.mins, &spec.maxs, &spec.counts)
    }
}

impl From<Grid> for GridSpec {
    fn from(grid: Grid) -> Self {
        GridSpec {
            mins: grid.mins,
            maxs: grid.maxs,
            counts: grid.counts,
        }
    }
}

impl Grid {
    pub fn new(mins: &[f64], maxs: &[f64], counts: &[usize]) -> Result<Self, GridError> {
        let ndim = counts.len();
        if mins.len() != ndim || maxs.len() != ndim {
            return Err(GridError::DimensionMismatch(format!(
                "mins has {}, maxs has {}, counts has {} entries",
                mins.len(),
                maxs.len(),
                ndim
            )));
        }
        if ndim == 0 || ndim > MAX_DIM {
            return Err(GridError::UnsupportedDimension(ndim));
        }
        for dim in 0..ndim {
            if counts[dim] < MIN_NODES {
                return Err(GridError::TooFewNodes {
                    dim,
                    count: counts[dim],
                });
            }
            if !(mins[dim].is_finite() && maxs[dim].is_finite() && maxs[dim] > mins[dim]) {
                return Err(GridError::DegenerateExtent {
                    dim,
                    min: mins[dim],
                    max: maxs[dim],
                });
            }
        }
        let spacing = (0..ndim)
            .map(|d| (maxs[d] - mins[d]) / (counts[d] - 1) as f64)
            .collect();
        let mut strides = vec![1; ndim];
        for d in (0..ndim - 1).rev() {
            strides[d] = strides[d + 1] * counts[d + 1];
        }
        Ok(Grid {
            mins: mins.to_vec(),
            maxs: maxs.to_vec(),
            counts: counts.to_vec(),
            spacing,
            strides,
        })
    }

    /// Square/cubic grid with the same extent and count in every dimension.
    pub fn uniform(ndim: usize, min: f64, max: f64, count: usize) -> Result<Self, GridError> {
        Grid::new(&vec![min; ndim], &vec![max; ndim], &vec![count; ndim])
    }

    pub fn ndim(&self) -> usize {
        self.counts.len()
    }

    pub fn mins(&self) -> &[f64] {
        &self.mins
    }

    pub fn maxs(&self) -> &[f64] {
        &self.maxs
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(0.0, f64::max)
    }

    /// Coordinate of node `i` along `dim`. Measured from the box center so
    /// that mirrored nodes of a symmetric box have exactly negated
    /// coordinates.
    #[inline]
    pub fn coord(&self, dim: usize, i: usize) -> f64 {
        let n = self.counts[dim];
        if i == 0 {
            self.mins[dim]
        } else if i + 1 == n {
            self.maxs[dim]
        } else {
            let mid = 0.5 * (self.mins[dim] + self.maxs[dim]);
            mid + (i as f64 - 0.5 * (n - 1) as f64) * self.spacing[dim]
        }
    }

    /// Multi-index of a flat node index.
    pub fn unflatten(&self, mut flat: usize, out: &mut [usize]) {
        for d in (0..self.ndim()).rev() {
            out[d] = flat % self.counts[d];
            flat /= self.counts[d];
        }
    }

    pub fn flatten(&self, index: &[usize]) -> usize {
        index
            .iter()
            .zip(&self.strides)
            .map(|(i, s)| i * s)
            .sum()
    }

    /// Physical coordinates of a flat node index.
    pub fn node_point(&self, flat: usize, out: &mut [f64]) {
        let mut idx = [0usize; MAX_DIM];
        self.unflatten(flat, &mut idx[..self.ndim()]);
        for d in 0..self.ndim() {
            out[d] = self.coord(d, idx[d]);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.ndim()
            && (0..self.ndim()).all(|d| {
                let slack = 1e-12 * (self.maxs[d] - self.mins[d]);
                x[d] >= self.mins[d] - slack && x[d] <= self.maxs[d] + slack
            })
    }

    /// Same node layout and extent.
    pub fn same_shape(&self, other: &Grid) -> bool {
        self.counts == other.counts && self.mins == other.mins && self.maxs == other.maxs
    }

    /// Lower cell index and fractional offset of `x` along `dim`.
    fn locate(&self, dim: usize, x: f64) -> (usize, f64) {
        let n = self.counts[dim];
        let s = ((x - self.mins[dim]) / self.spacing[dim]).max(0.0);
        let i = (s.floor() as usize).min(n - 2);
        let w = (s - i as f64).clamp(0.0, 1.0);
        (i, w)
    }
}

/// Node values of one function on a grid at one game time.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
    time: f64,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>, time: f64) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(GridError::NonFinite { index, value });
        }
        Ok(ScalarField { grid, values, time })
    }

    /// Caller guarantees length and finiteness.
    pub(crate) fn from_parts(grid: Arc<Grid>, values: Vec<f64>, time: f64) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField { grid, values, time }
    }

    /// Samples `f` at every node. Panics if `f` returns a non-finite value.
    pub fn from_fn<F>(grid: Arc<Grid>, time: f64, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64,
    {
        let ndim = grid.ndim();
        let mut x = [0.0; MAX_DIM];
        let values = (0..grid.len())
            .map(|i| {
                grid.node_point(i, &mut x);
                let v = f(&x[..ndim]);
                assert!(v.is_finite(), "sampled non-finite value {v} at node {i}");
                v
            })
            .collect();
        ScalarField { grid, values, time }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn ndim(&self) -> usize {
        self.grid.ndim()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Multilinear interpolation. Points outside the box are an error.
    pub fn interpolate(&self, x: &[f64]) -> Result<f64, GridError> {
        let grid = &*self.grid;
        if !grid.contains(x) {
            return Err(GridError::OutOfDomain { point: x.to_vec() });
        }
        let ndim = grid.ndim();
        let mut base = 0;
        let mut weights = [0.0; MAX_DIM];
        for d in 0..ndim {
            let (i, w) = grid.locate(d, x[d]);
            base += i * grid.strides[d];
            weights[d] = w;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << ndim) {
            let mut w = 1.0;
            let mut offset = 0;
            for d in 0..ndim {
                if corner & (1 << d) != 0 {
                    w *= weights[d];
                    offset += grid.strides[d];
                } else {
                    w *= 1.0 - weights[d];
                }
            }
            if w != 0.0 {
                acc += w * self.values[base + offset];
            }
        }
        Ok(acc)
    }

    /// Every grid line along `dim`, each extended by `width` linearly
    /// extrapolated ghost values on both ends. Lines are returned in flat
    /// order of their remaining indices.
    pub fn ghost_lines(&self, dim: usize, width: usize) -> Vec<Vec<f64>> {
        let grid = &*self.grid;
        let n = grid.counts[dim];
        let stride = grid.strides[dim];
        let inner = stride;
        let outer = grid.len() / (n * inner);
        let mut lines = Vec::with_capacity(outer * inner);
        let mut line = vec![0.0; n];
        for o in 0..outer {
            for j in 0..inner {
                let start = o * n * inner + j;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = self.values[start + k * stride];
                }
                lines.push(extend_line(&line, width));
            }
        }
        lines
    }

    /// Lower-dimensional cross-section with the listed dimensions fixed at
    /// the given coordinates (linear interpolation along fixed axes).
    pub fn slice(&self, fixed: &[(usize, f64)]) -> Result<ScalarField, GridError> {
        let grid = &*self.grid;
        let ndim = grid.ndim();
        let mut is_fixed = [None; MAX_DIM];
        for &(d, x) in fixed {
            if d >= ndim {
                return Err(GridError::DimensionMismatch(format!(
                    "cannot fix dimension {d} of a {ndim}-D field"
                )));
            }
            let slack = 1e-12 * (grid.maxs[d] - grid.mins[d]);
            if x < grid.mins[d] - slack || x > grid.maxs[d] + slack {
                return Err(GridError::OutOfDomain {
                    point: vec![x],
                });
            }
            is_fixed[d] = Some(grid.locate(d, x));
        }
        let free: Vec<usize> = (0..ndim).filter(|&d| is_fixed[d].is_none()).collect();
        if free.is_empty() {
            return Err(GridError::DimensionMismatch(
                "slice must keep at least one dimension".into(),
            ));
        }
        let sub = Grid::new(
            &free.iter().map(|&d| grid.mins[d]).collect::<Vec<_>>(),
            &free.iter().map(|&d| grid.maxs[d]).collect::<Vec<_>>(),
            &free.iter().map(|&d| grid.counts[d]).collect::<Vec<_>>(),
        )?;
        let fixed_dims: Vec<usize> = (0..ndim).filter(|&d| is_fixed[d].is_some()).collect();
        let mut sub_idx = [0usize; MAX_DIM];
        let mut values = Vec::with_capacity(sub.len());
        for flat in 0..sub.len() {
            sub.unflatten(flat, &mut sub_idx[..free.len()]);
            let mut base = 0;
            for (k, &d) in free.iter().enumerate() {
                base += sub_idx[k] * grid.strides[d];
            }
            let mut acc = 0.0;
            for corner in 0..(1usize << fixed_dims.len()) {
                let mut w = 1.0;
                let mut offset = base;
                for (k, &d) in fixed_dims.iter().enumerate() {
                    let (i, frac) = is_fixed[d].unwrap();
                    if corner & (1 << k) != 0 {
                        w *= frac;
                        offset += (i + 1) * grid.strides[d];
                    } else {
                        w *= 1.0 - frac;
                        offset += i * grid.strides[d];
                    }
                }
                if w != 0.0 {
                    acc += w * self.values[offset];
                }
            }
            values.push(acc);
        }
        Ok(ScalarField::from_parts(Arc::new(sub), values, self.time))
    }
}

/// Extends a line by `width` ghost values per side, continuing the
/// boundary slope linearly.
pub fn extend_line(line: &[f64], width: usize) -> Vec<f64> {
    let n = line.len();
    let mut out = Vec::with_capacity(n + 2 * width);
    for k in (1..=width).rev() {
        out.push(ghost_value(line, -(k as isize)));
    }
    out.extend_from_slice(line);
    for k in 1..=width {
        out.push(ghost_value(line, (n - 1 + k) as isize));
    }
    out
}

/// Value at (possibly out-of-range) position `k` of a line under linear
/// extrapolation. Lines need at least two nodes.
#[inline]
pub fn ghost_value(line: &[f64], k: isize) -> f64 {
    let n = line.len() as isize;
    if k < 0 {
        line[0] + k as f64 * (line[1] - line[0])
    } else if k >= n {
        let last = line[(n - 1) as usize];
        last + (k - n + 1) as f64 * (last - line[(n - 2) as usize])
    } else {
        line[k as usize]
    }
}
