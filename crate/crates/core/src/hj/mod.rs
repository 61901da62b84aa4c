//! Solvers for the critical value `min f` and the critical solution `v` of
//! `min f + ½|Dv|² = f`.
//!
//! Three routes are provided:
//! - small discount: `λu_λ + ½|Du_λ|² = f`, with `λu_λ → min f` and
//!   `u_λ - min f/λ → v` as `λ → 0`;
//! - long time: `∂ₜu + ½|Du|² = f`, with `u/t → min f` and `u - t min f → v`;
//! - Dirichlet eikonal: `|∇v| = ℓ` off the target, `v = 0` on it, where
//!   `ℓ = sqrt(2(f - min f))`.

mod discounted;
mod eikonal;
mod evolutive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;

pub use discounted::{
    default_control_cap, solve_discounted, solve_discounted_report, DiscountedSolveConfig,
};
pub use eikonal::{solve_eikonal_dirichlet, solve_eikonal_dirichlet_report, EikonalSolveConfig};
pub use evolutive::{solve_evolutive, solve_evolutive_unchecked, EvolutiveSolveConfig};

/// Largest accepted overshoot of the critical value estimate above the
/// grid minimum in [`build_ell`].
pub const ELL_OVERSHOOT_TOL: f64 = 1e-3;

/// Iteration count and final residual of an iterative solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Discounted,
    Evolutive,
    Eikonal,
}

/// Estimated critical value with the corresponding critical solution.
#[derive(Clone, Debug)]
pub struct CriticalSolution {
    pub c_hat: f64,
    pub v: ScalarField,
    pub method: Method,
    pub residual: f64,
    pub iterations: usize,
}

impl CriticalSolution {
    /// `v = u_λ - ĉ/λ` with `ĉ = min λu_λ`.
    pub fn from_discounted(u: &ScalarField, lambda: f64, report: SolveReport) -> Result<Self> {
        let c_hat = lambda * u.min();
        Ok(CriticalSolution {
            c_hat,
            v: u.map(|x| x - u.min())?,
            method: Method::Discounted,
            residual: report.residual,
            iterations: report.iterations,
        })
    }

    /// `v = u(·, t) - ĉ t` with `ĉ = min u(·, t)/t`.
    pub fn from_evolutive(u: &ScalarField, t: f64, steps: usize) -> Result<Self> {
        let c_hat = u.min() / t;
        Ok(CriticalSolution {
            c_hat,
            v: u.map(|x| x - u.min())?,
            method: Method::Evolutive,
            residual: 0.0,
            iterations: steps,
        })
    }

    pub fn from_eikonal(v: ScalarField, c_hat: f64, report: SolveReport) -> Self {
        CriticalSolution {
            c_hat,
            v,
            method: Method::Eikonal,
            residual: report.residual,
            iterations: report.iterations,
        }
    }
}

/// `ℓ = sqrt(2 max(f - ĉ, 0))`.
pub fn build_ell(f: &ScalarField, c_hat: f64) -> Result<ScalarField> {
    build_ell_with_tolerance(f, c_hat, ELL_OVERSHOOT_TOL)
}

pub fn build_ell_with_tolerance(f: &ScalarField, c_hat: f64, tol: f64) -> Result<ScalarField> {
    let min = f.min();
    if c_hat > min + tol {
        return Err(Error::Input(format!(
            "critical value estimate {c_hat} exceeds the grid minimum {min} by more than {tol}"
        )));
    }
    f.map(|v| (2.0 * (v - c_hat).max(0.0)).sqrt())
}

/// Which limit drives the critical value estimate.
#[derive(Clone, Debug)]
pub enum CriticalRoute {
    /// Decreasing discounts; the config supplies everything but `lambda`.
    Discounted {
        lambdas: Vec<f64>,
        base: DiscountedSolveConfig,
    },
    /// Increasing horizons; `t_final` and `record_times` are taken from `times`.
    Evolutive {
        times: Vec<f64>,
        base: EvolutiveSolveConfig,
    },
}

#[derive(Clone, Debug)]
pub struct CriticalEstimate {
    pub c_hat: f64,
    /// `(λ or t, estimate)` in sequence order.
    pub sequence: Vec<(f64, f64)>,
    /// Solution fields `u_λ` or `u(·, t)` matching `sequence`.
    pub fields: Vec<ScalarField>,
    /// Set when the estimates are not monotone within tolerance.
    pub non_monotone: bool,
}

const MONOTONE_TOL: f64 = 1e-9;

/// Estimates `min f` from `min λu_λ` or `min u(·, t)/t` along the route.
pub fn estimate_critical_value(f: &ScalarField, route: &CriticalRoute) -> Result<CriticalEstimate> {
    let (params, decreasing) = match route {
        CriticalRoute::Discounted { lambdas, .. } => (lambdas, true),
        CriticalRoute::Evolutive { times, .. } => (times, false),
    };
    if params.len() < 2 {
        return Err(Error::Input(
            "need at least two terms in the sequence".into(),
        ));
    }
    let strictly_monotone =
        params
            .windows(2)
            .all(|w| if decreasing { w[1] < w[0] } else { w[1] > w[0] });
    if !strictly_monotone {
        return Err(Error::Input(
            "discounts must strictly decrease and horizons strictly increase".into(),
        ));
    }

    let mut sequence = Vec::with_capacity(params.len());
    let mut fields = Vec::with_capacity(params.len());
    match route {
        CriticalRoute::Discounted { lambdas, base } => {
            for &lambda in lambdas {
                let cfg = DiscountedSolveConfig {
                    lambda,
                    ..base.clone()
                };
                let u = solve_discounted(f, &cfg)?;
                sequence.push((lambda, lambda * u.min()));
                fields.push(u);
            }
        }
        CriticalRoute::Evolutive { times, base } => {
            let cfg = EvolutiveSolveConfig {
                t_final: *times.last().expect("length checked"),
                record_times: times.clone(),
                ..base.clone()
            };
            for (t, u) in solve_evolutive(f, &cfg)? {
                sequence.push((t, u.min() / t));
                fields.push(u);
            }
        }
    }
    let est: Vec<f64> = sequence.iter().map(|s| s.1).collect();
    let up = est.windows(2).all(|w| w[1] >= w[0] - MONOTONE_TOL);
    let down = est.windows(2).all(|w| w[1] <= w[0] + MONOTONE_TOL);
    Ok(CriticalEstimate {
        c_hat: *est.last().expect("length checked"),
        sequence,
        fields,
        non_monotone: !(up || down),
    })
}
