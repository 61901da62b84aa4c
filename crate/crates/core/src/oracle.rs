//! Independent references for the solvers: graph shortest paths, radial
//! closed forms and grid minima.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, TargetMask};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    Axis,
    AxisDiagonal,
}

/// Graph used by [`dijkstra_value`]. Edge cost is the trapezoid of ℓ at the
/// endpoints times the Euclidean edge length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphOracleConfig {
    pub neighbor_stencil: Stencil,
}

impl Default for GraphOracleConfig {
    fn default() -> Self {
        GraphOracleConfig {
            neighbor_stencil: Stencil::AxisDiagonal,
        }
    }
}

#[derive(PartialEq)]
struct Entry {
    cost: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on cost, ties by node index.
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Least ℓ-weighted path cost from every node to the target on the grid graph.
pub fn dijkstra_value(
    ell: &ScalarField,
    mask: &TargetMask,
    cfg: &GraphOracleConfig,
) -> Result<ScalarField> {
    let grid = ell.grid();
    if !grid.same_as(mask.grid()) {
        return Err(Error::GridMismatch(
            "running cost and mask grids differ".into(),
        ));
    }
    if ell.values().iter().any(|&l| l < 0.0) {
        return Err(Error::Input("running cost must be non-negative".into()));
    }
    let h = grid.spacing;
    let mut offsets: Vec<[isize; 2]> = vec![[1, 0], [-1, 0]];
    if grid.dim == 2 {
        offsets.extend([[0, 1], [0, -1]]);
        if cfg.neighbor_stencil == Stencil::AxisDiagonal {
            offsets.extend([[1, 1], [1, -1], [-1, 1], [-1, -1]]);
        }
    }
    let ell = ell.values();
    let mut dist = vec![f64::INFINITY; grid.len()];
    let mut heap = BinaryHeap::new();
    for i in mask.indices() {
        dist[i] = 0.0;
        heap.push(Entry { cost: 0.0, node: i });
    }
    while let Some(Entry { cost, node }) = heap.pop() {
        if cost > dist[node] {
            continue;
        }
        let multi = grid.multi_index(node);
        for off in &offsets {
            let mut target = [0usize; 2];
            let mut inside = true;
            for axis in 0..grid.dim {
                let m = multi[axis] as isize + off[axis];
                if m < 0 || m >= grid.counts[axis] as isize {
                    inside = false;
                    break;
                }
                target[axis] = m as usize;
            }
            if !inside {
                continue;
            }
            let j = grid.flat_index(&target);
            let length = h * ((off[0] * off[0] + off[1] * off[1]) as f64).sqrt();
            let next = cost + 0.5 * (ell[node] + ell[j]) * length;
            if next < dist[j] {
                dist[j] = next;
                heap.push(Entry {
                    cost: next,
                    node: j,
                });
            }
        }
    }
    ScalarField::new(grid.clone(), dist)
}

/// Absolute tolerance of [`exact_v_radial`].
pub const RADIAL_QUADRATURE_TOL: f64 = 1e-10;

/// `∫₀ᵈ γ̃(s) ds`, the value at distance `d` when `ℓ = γ̃(dist(·, target))`
/// within distance `r` of the target.
pub fn exact_v_radial(gamma_tilde: impl Fn(f64) -> f64, d: f64, r: f64) -> Result<f64> {
    if !(d >= 0.0) {
        return Err(Error::Input(format!(
            "distance must be non-negative, got {d}"
        )));
    }
    if d > r {
        return Err(Error::Input(format!(
            "distance {d} lies beyond the radial profile radius {r}"
        )));
    }
    if d == 0.0 {
        return Ok(0.0);
    }
    Ok(adaptive_simpson(
        &gamma_tilde,
        0.0,
        d,
        RADIAL_QUADRATURE_TOL,
    ))
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Grid minimum of `f` and every node attaining it.
pub fn brute_force_min(f: &ScalarField) -> (f64, Vec<Vec<f64>>) {
    let min = f.min();
    let points = f
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == min)
        .map(|(i, _)| f.grid().node(i))
        .collect();
    (min, points)
}
