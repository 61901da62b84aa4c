//! Uniform Cartesian grids, nodal scalar fields, target masks and the
//! objective corpus.
//!
//! Nodes are stored row-major: the last axis varies fastest. Only one- and
//! two-dimensional grids are supported.

pub mod corpus;
pub mod io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use corpus::{corpus, find_objective, ObjectiveFunction};

/// Largest supported grid dimension.
pub const MAX_DIM: usize = 2;

/// Above this node count `distance_to_mask` switches from the exact
/// brute-force transform to unit-speed fast sweeping.
pub const BRUTE_FORCE_NODE_LIMIT: usize = 100_000;

/// A uniform Cartesian sampling of a box in one or two dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub origin: Vec<f64>,
    pub spacing: f64,
    pub counts: Vec<usize>,
}

impl GridSpec {
    pub fn new(origin: Vec<f64>, spacing: f64, counts: Vec<usize>) -> Result<Self> {
        let grid = GridSpec {
            dim: origin.len(),
            origin,
            spacing,
            counts,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid covering `[lower, upper]` with spacing `h`. Each side length must
    /// be an integer multiple of `h` up to rounding.
    pub fn from_box(lower: &[f64], upper: &[f64], h: f64) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::InvalidGrid("box corners differ in dimension".into()));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "spacing must be positive, got {h}"
            )));
        }
        let mut counts = Vec::with_capacity(lower.len());
        for (&lo, &hi) in lower.iter().zip(upper) {
            let cells = (hi - lo) / h;
            let rounded = cells.round();
            if !(rounded >= 2.0) || (cells - rounded).abs() > 1e-9 * rounded.max(1.0) {
                return Err(Error::InvalidGrid(format!(
                    "side [{lo}, {hi}] is not a multiple of spacing {h}"
                )));
            }
            counts.push(rounded as usize + 1);
        }
        GridSpec::new(lower.to_vec(), h, counts)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim > MAX_DIM {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1 or 2, got {}",
                self.dim
            )));
        }
        if self.origin.len() != self.dim || self.counts.len() != self.dim {
            return Err(Error::InvalidGrid(
                "origin and counts must have one entry per axis".into(),
            ));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "spacing must be positive, got {}",
                self.spacing
            )));
        }
        if self.origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        if self.counts.iter().any(|&n| n < 3) {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 nodes per axis, got {:?}",
                self.counts
            )));
        }
        Ok(())
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lower(&self, axis: usize) -> f64 {
        self.origin[axis]
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.origin[axis] + self.spacing * (self.counts[axis] - 1) as f64
    }

    /// Euclidean diameter of the box.
    pub fn diameter(&self) -> f64 {
        (0..self.dim)
            .map(|k| (self.upper(k) - self.lower(k)).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub(crate) fn stride(&self, axis: usize) -> usize {
        self.counts[axis + 1..].iter().product()
    }

    pub fn multi_index(&self, index: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        let mut rem = index;
        for axis in (0..self.dim).rev() {
            out[axis] = rem % self.counts[axis];
            rem /= self.counts[axis];
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi[..self.dim]
            .iter()
            .zip(&self.counts)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub(crate) fn node_array(&self, index: usize) -> [f64; MAX_DIM] {
        let multi = self.multi_index(index);
        let mut x = [0.0; MAX_DIM];
        for axis in 0..self.dim {
            x[axis] = self.origin[axis] + self.spacing * multi[axis] as f64;
        }
        x
    }

    /// Coordinates of node `index`.
    pub fn node(&self, index: usize) -> Vec<f64> {
        self.node_array(index)[..self.dim].to_vec()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let slack = 1e-12 * self.spacing;
        x.len() == self.dim
            && (0..self.dim).all(|k| x[k] >= self.lower(k) - slack && x[k] <= self.upper(k) + slack)
    }

    /// Index of the node closest to `x` (coordinates clamped to the box).
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let mut multi = [0; MAX_DIM];
        for axis in 0..self.dim {
            let s = ((x[axis] - self.origin[axis]) / self.spacing).round();
            multi[axis] = s.clamp(0.0, (self.counts[axis] - 1) as f64) as usize;
        }
        self.flat_index(&multi)
    }

    /// Neighbor of `index` shifted by `offset` along `axis`, if inside the grid.
    pub(crate) fn shifted(&self, index: usize, axis: usize, offset: isize) -> Option<usize> {
        let multi = self.multi_index(index);
        let moved = multi[axis] as isize + offset;
        if moved < 0 || moved >= self.counts[axis] as isize {
            None
        } else {
            Some((index as isize + offset * self.stride(axis) as isize) as usize)
        }
    }

    pub(crate) fn same_as(&self, other: &GridSpec) -> bool {
        self == other
    }

    /// Multilinear interpolation weights for `x`, with coordinates clamped
    /// to the box. Returns up to `2^dim` (node, weight) pairs.
    pub(crate) fn interpolation_stencil(&self, x: &[f64]) -> ([(usize, f64); 4], usize) {
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for axis in 0..self.dim {
            let n = self.counts[axis];
            let mut s = ((x[axis] - self.origin[axis]) / self.spacing).clamp(0.0, (n - 1) as f64);
            // Node coordinates do not always map back to exact integers.
            if (s - s.round()).abs() < 1e-9 {
                s = s.round();
            }
            let cell = (s.floor() as usize).min(n - 2);
            base[axis] = cell;
            frac[axis] = s - cell as f64;
        }
        let mut out = [(0usize, 0.0); 4];
        let corners = 1 << self.dim;
        for (c, slot) in out.iter_mut().enumerate().take(corners) {
            let mut multi = base;
            let mut w = 1.0;
            for axis in 0..self.dim {
                if c >> axis & 1 == 1 {
                    multi[axis] += 1;
                    w *= frac[axis];
                } else {
                    w *= 1.0 - frac[axis];
                }
            }
            *slot = (self.flat_index(&multi), w);
        }
        (out, corners)
    }
}

/// Nodal values on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                index,
                location: grid.node(index),
                value,
            });
        }
        Ok(ScalarField { grid, values })
    }

    /// Field with value `f(x)` at every node.
    pub fn from_fn(grid: &GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.len())
            .map(|i| f(&grid.node_array(i)[..grid.dim]))
            .collect();
        ScalarField::new(grid.clone(), values)
    }

    pub fn constant(grid: &GridSpec, value: f64) -> Result<Self> {
        ScalarField::new(grid.clone(), vec![value; grid.len()])
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sup-norm distance to another field on the same grid.
    pub fn sup_distance(&self, other: &ScalarField) -> Result<f64> {
        self.ensure_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<ScalarField> {
        ScalarField::new(
            self.grid.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    pub(crate) fn ensure_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch("fields live on different grids".into()))
        }
    }

    /// Multilinear interpolation at `x`. No extrapolation outside the box.
    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        if !self.grid.contains(x) {
            return Err(Error::OutOfBox { point: x.to_vec() });
        }
        Ok(self.interpolate_clamped(x))
    }

    /// Multilinear interpolation with `x` projected onto the box first.
    pub fn interpolate_clamped(&self, x: &[f64]) -> f64 {
        let (stencil, n) = self.grid.interpolation_stencil(x);
        stencil[..n]
            .iter()
            .map(|&(i, w)| if w == 0.0 { 0.0 } else { w * self.values[i] })
            .sum()
    }
}

/// Nodes forming the discrete target set.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetMask {
    grid: GridSpec,
    flags: Vec<bool>,
    boundary: Vec<[f64; MAX_DIM]>,
}

impl TargetMask {
    pub fn new(grid: GridSpec, flags: Vec<bool>) -> Result<Self> {
        if flags.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} flags for {} nodes",
                flags.len(),
                grid.len()
            )));
        }
        if !flags.iter().any(|&b| b) {
            return Err(Error::Input("target mask has no flagged node".into()));
        }
        let boundary = (0..grid.len())
            .filter(|&i| flags[i] && is_mask_boundary(&grid, &flags, i))
            .map(|i| grid.node_array(i))
            .collect();
        Ok(TargetMask {
            grid,
            flags,
            boundary,
        })
    }

    /// Mask flagging exactly the given node indices.
    pub fn from_indices(grid: &GridSpec, indices: &[usize]) -> Result<Self> {
        let mut flags = vec![false; grid.len()];
        for &i in indices {
            if i >= flags.len() {
                return Err(Error::Input(format!("node index {i} out of range")));
            }
            flags[i] = true;
        }
        TargetMask::new(grid.clone(), flags)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn contains(&self, index: usize) -> bool {
        self.flags[index]
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&b| b).count()
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.flags.len()).filter(|&i| self.flags[i]).collect()
    }

    /// Exact Euclidean distance from an arbitrary point of the box to the
    /// nearest flagged node.
    ///
    /// The nearest flagged node is either the nearest grid node or a flagged
    /// node with an unflagged axis neighbor, so only those are scanned.
    pub fn distance_from(&self, x: &[f64]) -> f64 {
        let nearest = self.grid.nearest_node(x);
        if self.flags[nearest] {
            let node = self.grid.node_array(nearest);
            return euclid(&node[..self.grid.dim], x);
        }
        self.boundary
            .iter()
            .map(|z| euclid(&z[..self.grid.dim], x))
            .fold(f64::INFINITY, f64::min)
    }
}

fn is_mask_boundary(grid: &GridSpec, flags: &[bool], index: usize) -> bool {
    (0..grid.dim).any(|axis| {
        [-1isize, 1].iter().any(|&o| {
            grid.shifted(index, axis, o)
                .map(|j| !flags[j])
                .unwrap_or(false)
        })
    })
}

pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

/// Samples `obj` at every node.
pub fn sample(obj: &ObjectiveFunction, grid: &GridSpec) -> Result<ScalarField> {
    grid.validate()?;
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let x = grid.node_array(i);
        let value = obj.eval(&x[..grid.dim]);
        if !value.is_finite() {
            return Err(Error::NonFinite {
                index: i,
                location: grid.node(i),
                value,
            });
        }
        values.push(value);
    }
    ScalarField::new(grid.clone(), values)
}

/// Flags every node with `f <= c_hat + eps_target`.
pub fn build_target_mask(f: &ScalarField, c_hat: f64, eps_target: f64) -> Result<TargetMask> {
    if !(eps_target > 0.0) {
        return Err(Error::Input(format!(
            "eps_target must be positive, got {eps_target}"
        )));
    }
    let threshold = c_hat + eps_target;
    let flags: Vec<bool> = f.values().iter().map(|&v| v <= threshold).collect();
    if !flags.iter().any(|&b| b) {
        return Err(Error::EmptyMask {
            gap: f.min() - c_hat,
        });
    }
    TargetMask::new(f.grid().clone(), flags)
}

/// Euclidean distance from every node to the nearest flagged node.
///
/// Exact brute force up to [`BRUTE_FORCE_NODE_LIMIT`] nodes, unit-speed
/// fast sweeping above.
pub fn distance_to_mask(mask: &TargetMask) -> Result<ScalarField> {
    if mask.grid().len() <= BRUTE_FORCE_NODE_LIMIT {
        distance_to_mask_exact(mask)
    } else {
        distance_to_mask_sweeping(mask)
    }
}

pub fn distance_to_mask_exact(mask: &TargetMask) -> Result<ScalarField> {
    let grid = mask.grid();
    let values = (0..grid.len())
        .map(|i| {
            if mask.contains(i) {
                0.0
            } else {
                mask.distance_from(&grid.node_array(i)[..grid.dim])
            }
        })
        .collect();
    ScalarField::new(grid.clone(), values)
}

pub fn distance_to_mask_sweeping(mask: &TargetMask) -> Result<ScalarField> {
    let ones = ScalarField::constant(mask.grid(), 1.0)?;
    crate::hj::solve_eikonal_dirichlet(&ones, mask, &crate::hj::EikonalSolveConfig::default())
}
