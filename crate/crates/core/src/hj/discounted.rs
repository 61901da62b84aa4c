use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::SolveReport;
use crate::error::{Error, Result};
use crate::field::{ScalarField, MAX_DIM};

/// Semi-Lagrangian value iteration for `λu + ½|Du|² = f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscountedSolveConfig {
    pub lambda: f64,
    /// Pseudo-time step of the discrete dynamics.
    pub pseudo_time_step: f64,
    /// Largest control speed `A`.
    pub control_magnitude_cap: f64,
    /// Unit directions; ignored in 1D where only ±1 exist.
    pub direction_count: usize,
    /// Nonzero speeds, evenly spaced in `(0, A]`. The zero control is always
    /// included, and dyadic fractions of the slowest speed are added down to
    /// [`SLOW_SPEED_FLOOR`] times the grid spacing.
    pub magnitude_count: usize,
    pub tol: f64,
    pub max_iters: usize,
}

/// Slowest refinement speed relative to the grid spacing. Without speeds
/// near zero the cheapest approach to a minimizer costs about `a_min·|x|/2`,
/// a spurious convex corner.
pub const SLOW_SPEED_FLOOR: f64 = 0.1;

/// Default speed cap: 1.25 times the a-priori gradient bound `sqrt(4‖f‖∞)`.
pub fn default_control_cap(f: &ScalarField) -> f64 {
    1.25 * (4.0 * f.sup_norm()).sqrt()
}

impl DiscountedSolveConfig {
    /// Defaults for `f`: step equal to the spacing, cap from
    /// [`default_control_cap`], 32 speeds and 16 directions.
    pub fn for_field(f: &ScalarField, lambda: f64) -> Self {
        DiscountedSolveConfig {
            lambda,
            pseudo_time_step: f.grid().spacing,
            control_magnitude_cap: default_control_cap(f).max(f64::MIN_POSITIVE),
            direction_count: 16,
            magnitude_count: 32,
            tol: 1e-8,
            max_iters: 200_000,
        }
    }

    pub fn validate(&self, f: &ScalarField) -> Result<()> {
        if !(self.lambda > 0.0) || !(self.pseudo_time_step > 0.0) {
            return Err(Error::Config(
                "lambda and pseudo_time_step must be positive".into(),
            ));
        }
        if self.lambda * self.pseudo_time_step >= 1.0 {
            return Err(Error::Config(format!(
                "lambda * pseudo_time_step = {} must be below 1",
                self.lambda * self.pseudo_time_step
            )));
        }
        let needed = (4.0 * f.sup_norm()).sqrt();
        if !(self.control_magnitude_cap > 0.0) || self.control_magnitude_cap < needed {
            return Err(Error::Config(format!(
                "control cap {} is below the gradient bound {needed}",
                self.control_magnitude_cap
            )));
        }
        if self.magnitude_count == 0 || (f.grid().dim == 2 && self.direction_count < 4) {
            return Err(Error::Config(
                "need at least one speed and, in 2D, four directions".into(),
            ));
        }
        if !(self.tol > 0.0) || self.max_iters == 0 {
            return Err(Error::Config("tol and max_iters must be positive".into()));
        }
        Ok(())
    }

    fn controls(&self, dim: usize, spacing: f64) -> Vec<[f64; MAX_DIM]> {
        let dirs: Vec<[f64; MAX_DIM]> = if dim == 1 {
            vec![[1.0, 0.0], [-1.0, 0.0]]
        } else {
            (0..self.direction_count)
                .map(|k| {
                    let th = 2.0 * PI * k as f64 / self.direction_count as f64;
                    [th.cos(), th.sin()]
                })
                .collect()
        };
        let slowest = self.control_magnitude_cap / self.magnitude_count as f64;
        let mut speeds: Vec<f64> = (1..=self.magnitude_count)
            .map(|j| slowest * j as f64)
            .collect();
        let mut refine = 0.5 * slowest;
        while refine >= SLOW_SPEED_FLOOR * spacing {
            speeds.push(refine);
            refine *= 0.5;
        }
        let mut out = vec![[0.0; MAX_DIM]];
        for speed in speeds {
            out.extend(dirs.iter().map(|d| [speed * d[0], speed * d[1]]));
        }
        out
    }
}

/// Interpolation weights of one control's foot point and how many are used.
type Stencil = ([(usize, f64); 4], usize);

pub fn solve_discounted(f: &ScalarField, cfg: &DiscountedSolveConfig) -> Result<ScalarField> {
    solve_discounted_report(f, cfg).map(|(u, _)| u)
}

/// Fixed point of
/// `u(x) = min_a [h_a (½|a|² + f(x)) + (1 - λ h_a) u(x + h_a a)]`
/// with feet clamped to the box.
///
/// Iteration starts from the supersolution `f/λ` and sweeps Gauss–Seidel
/// style through the `2^dim` orderings. The weight a foot puts on the node
/// being updated is eliminated exactly, which keeps slow controls from
/// stalling convergence.
pub fn solve_discounted_report(
    f: &ScalarField,
    cfg: &DiscountedSolveConfig,
) -> Result<(ScalarField, SolveReport)> {
    cfg.validate(f)?;
    let grid = f.grid();
    let dim = grid.dim;
    let n = grid.len();
    let ha = cfg.pseudo_time_step;
    let beta = 1.0 - cfg.lambda * ha;
    let controls = cfg.controls(dim, grid.spacing);
    let running: Vec<f64> = controls
        .iter()
        .map(|a| 0.5 * ha * (a[0] * a[0] + a[1] * a[1]))
        .collect();

    // Foot stencils, precomputed once per node and control.
    let mut stencils: Vec<Vec<Stencil>> = Vec::with_capacity(n);
    for i in 0..n {
        let x = grid.node_array(i);
        stencils.push(
            controls
                .iter()
                .map(|a| {
                    let mut foot = [0.0; MAX_DIM];
                    for k in 0..dim {
                        foot[k] = x[k] + ha * a[k];
                    }
                    grid.interpolation_stencil(&foot[..dim])
                })
                .collect(),
        );
    }

    let fv = f.values();
    let mut u: Vec<f64> = fv.iter().map(|&v| v / cfg.lambda).collect();
    let orderings = 1usize << dim;
    let n0 = grid.counts[0];
    let n1 = if dim == 2 { grid.counts[1] } else { 1 };
    let mut cycle_change = 0.0f64;
    let mut iters = 0;
    loop {
        if iters >= cfg.max_iters {
            return Err(Error::NoConvergence {
                iterations: iters,
                residual: cycle_change,
            });
        }
        let order = iters % orderings;
        if order == 0 {
            cycle_change = 0.0;
        }
        for a in 0..n0 {
            let i0 = if order & 1 == 1 { n0 - 1 - a } else { a };
            for b in 0..n1 {
                let i1 = if order & 2 == 2 { n1 - 1 - b } else { b };
                let idx = i0 * n1 + i1;
                let mut best = f64::INFINITY;
                for (c, (stencil, len)) in stencils[idx].iter().enumerate() {
                    let mut others = 0.0;
                    let mut self_weight = 0.0;
                    for &(j, w) in &stencil[..*len] {
                        if j == idx {
                            self_weight += w;
                        } else if w != 0.0 {
                            others += w * u[j];
                        }
                    }
                    let cost = running[c] + ha * fv[idx];
                    let value = (cost + beta * others) / (1.0 - beta * self_weight);
                    if value < best {
                        best = value;
                    }
                }
                cycle_change = cycle_change.max((best - u[idx]).abs());
                u[idx] = best;
            }
        }
        iters += 1;
        if iters % orderings == 0 && cycle_change < cfg.tol {
            break;
        }
    }
    let field = ScalarField::new(grid.clone(), u)?;
    Ok((
        field,
        SolveReport {
            iterations: iters,
            residual: cycle_change,
        },
    ))
}
