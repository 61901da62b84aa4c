use serde::{Deserialize, Serialize};

use super::SolveReport;
use crate::error::{Error, Result};
use crate::field::{ScalarField, TargetMask};

/// Fast sweeping controls for `|∇v| = ℓ`, `v = 0` on the target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EikonalSolveConfig {
    pub sweep_tol: f64,
    pub max_sweeps: usize,
}

impl Default for EikonalSolveConfig {
    fn default() -> Self {
        EikonalSolveConfig {
            sweep_tol: 1e-10,
            max_sweeps: 10_000,
        }
    }
}

impl EikonalSolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sweep_tol > 0.0) {
            return Err(Error::Config("sweep_tol must be positive".into()));
        }
        if self.max_sweeps == 0 {
            return Err(Error::Config("max_sweeps must be positive".into()));
        }
        Ok(())
    }
}

pub fn solve_eikonal_dirichlet(
    ell: &ScalarField,
    mask: &TargetMask,
    cfg: &EikonalSolveConfig,
) -> Result<ScalarField> {
    solve_eikonal_dirichlet_report(ell, mask, cfg).map(|(v, _)| v)
}

/// Gauss–Seidel fast sweeping with the Godunov upwind discretization.
///
/// Sweeps cycle through the `2^dim` axis orderings in a fixed sequence and
/// stop once a complete cycle changes no node by more than `sweep_tol`.
pub fn solve_eikonal_dirichlet_report(
    ell: &ScalarField,
    mask: &TargetMask,
    cfg: &EikonalSolveConfig,
) -> Result<(ScalarField, SolveReport)> {
    cfg.validate()?;
    let grid = ell.grid();
    if !grid.same_as(mask.grid()) {
        return Err(Error::GridMismatch(
            "running cost and mask grids differ".into(),
        ));
    }
    if let Some(i) = ell.values().iter().position(|&l| l < 0.0) {
        return Err(Error::Input(format!(
            "running cost is negative ({}) at node {i}",
            ell.values()[i]
        )));
    }
    let h = grid.spacing;
    let dim = grid.dim;
    let counts = &grid.counts;
    let stride1 = if dim == 2 { counts[1] } else { 1 };
    let n = grid.len();

    let mut v: Vec<f64> = (0..n)
        .map(|i| if mask.contains(i) { 0.0 } else { f64::INFINITY })
        .collect();
    let cost = ell.values();
    let orderings = 1usize << dim;

    let mut cycle_change = 0.0f64;
    let mut sweeps = 0;
    loop {
        if sweeps >= cfg.max_sweeps {
            return Err(Error::NoConvergence {
                iterations: sweeps,
                residual: cycle_change,
            });
        }
        let order = sweeps % orderings;
        if order == 0 {
            cycle_change = 0.0;
        }
        let rev0 = order & 1 == 1;
        let rev1 = order & 2 == 2;
        let n0 = counts[0];
        let n1 = if dim == 2 { counts[1] } else { 1 };
        for a in 0..n0 {
            let i0 = if rev0 { n0 - 1 - a } else { a };
            for b in 0..n1 {
                let i1 = if rev1 { n1 - 1 - b } else { b };
                let idx = i0 * stride1 + i1;
                if mask.contains(idx) {
                    continue;
                }
                let along0 = {
                    let lo = if i0 > 0 {
                        v[idx - stride1]
                    } else {
                        f64::INFINITY
                    };
                    let hi = if i0 + 1 < n0 {
                        v[idx + stride1]
                    } else {
                        f64::INFINITY
                    };
                    lo.min(hi)
                };
                let candidate = if dim == 1 {
                    along0 + h * cost[idx]
                } else {
                    let lo = if i1 > 0 { v[idx - 1] } else { f64::INFINITY };
                    let hi = if i1 + 1 < n1 {
                        v[idx + 1]
                    } else {
                        f64::INFINITY
                    };
                    godunov_2d(along0, lo.min(hi), h * cost[idx])
                };
                if candidate < v[idx] {
                    let change = if v[idx].is_finite() {
                        v[idx] - candidate
                    } else {
                        f64::INFINITY
                    };
                    cycle_change = cycle_change.max(change);
                    v[idx] = candidate;
                }
            }
        }
        sweeps += 1;
        if sweeps % orderings == 0 && cycle_change < cfg.sweep_tol {
            break;
        }
    }
    let field = ScalarField::new(grid.clone(), v)?;
    Ok((
        field,
        SolveReport {
            iterations: sweeps,
            residual: cycle_change,
        },
    ))
}

/// Upwind update from the smallest neighbor value along each axis.
fn godunov_2d(a: f64, b: f64, hl: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    if !lo.is_finite() {
        return f64::INFINITY;
    }
    if hi - lo >= hl {
        lo + hl
    } else {
        0.5 * (lo + hi + (2.0 * hl * hl - (hi - lo) * (hi - lo)).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{distance_to_mask_exact, GridSpec};
    use proptest::prelude::*;

    fn line(lo: f64, hi: f64, h: f64) -> GridSpec {
        GridSpec::from_box(&[lo], &[hi], h).unwrap()
    }

    #[test]
    fn unit_cost_gives_distance() {
        let g = line(-1.0, 1.0, 1.0 / 16.0);
        let mask = TargetMask::from_indices(&g, &[16]).unwrap();
        let ones = ScalarField::constant(&g, 1.0).unwrap();
        let v = solve_eikonal_dirichlet(&ones, &mask, &Default::default()).unwrap();
        let d = distance_to_mask_exact(&mask).unwrap();
        assert!(v.sup_distance(&d).unwrap() < 1e-14);
    }

    #[test]
    fn linear_cost_gives_half_square_within_h() {
        let h = 1.0 / 64.0;
        let g = line(-1.0, 1.0, h);
        let mask = TargetMask::from_indices(&g, &[64]).unwrap();
        let ell = ScalarField::from_fn(&g, |x| x[0].abs()).unwrap();
        let v = solve_eikonal_dirichlet(&ell, &mask, &Default::default()).unwrap();
        for i in 0..g.len() {
            let x = g.node(i)[0];
            // Right-endpoint sums: v = x^2/2 + h|x|/2 on this grid.
            assert!((v.values()[i] - 0.5 * x * x).abs() <= 0.5 * h * x.abs() + 1e-14);
        }
    }

    #[test]
    fn zero_cost_whole_mask() {
        let g = GridSpec::from_box(&[0.0, 0.0], &[1.0, 1.0], 0.25).unwrap();
        let mask = TargetMask::new(g.clone(), vec![true; g.len()]).unwrap();
        let zero = ScalarField::constant(&g, 0.0).unwrap();
        let v = solve_eikonal_dirichlet(&zero, &mask, &Default::default()).unwrap();
        assert!(v.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_negative_cost_and_reports_non_convergence() {
        let g = line(0.0, 1.0, 0.25);
        let mask = TargetMask::from_indices(&g, &[0]).unwrap();
        let bad = ScalarField::from_fn(&g, |x| x[0] - 0.5).unwrap();
        assert!(matches!(
            solve_eikonal_dirichlet(&bad, &mask, &Default::default()),
            Err(Error::Input(_))
        ));
        let ell = ScalarField::constant(&g, 1.0).unwrap();
        let cfg = EikonalSolveConfig {
            sweep_tol: 1e-10,
            max_sweeps: 1,
        };
        assert!(matches!(
            solve_eikonal_dirichlet(&ell, &mask, &cfg),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn two_dimensional_distance_is_close_to_euclidean() {
        let h = 1.0 / 32.0;
        let g = GridSpec::from_box(&[-1.0, -1.0], &[1.0, 1.0], h).unwrap();
        let center = g.nearest_node(&[0.0, 0.0]);
        let mask = TargetMask::from_indices(&g, &[center]).unwrap();
        let ones = ScalarField::constant(&g, 1.0).unwrap();
        let v = solve_eikonal_dirichlet(&ones, &mask, &Default::default()).unwrap();
        let d = distance_to_mask_exact(&mask).unwrap();
        for i in 0..g.len() {
            // First-order Godunov overestimates off-axis distances by O(h |log h|).
            assert!(v.values()[i] >= d.values()[i] - 1e-12);
            assert!(v.values()[i] <= d.values()[i] + 4.0 * h);
        }
    }

    proptest! {
        #[test]
        fn solution_is_monotone_in_running_cost(
            base in proptest::collection::vec(0.0f64..2.0, 9 * 9),
            bump in proptest::collection::vec(0.0f64..1.0, 9 * 9),
        ) {
            let g = GridSpec::new(vec![0.0, 0.0], 0.125, vec![9, 9]).unwrap();
            let mask = TargetMask::from_indices(&g, &[40]).unwrap();
            let l1 = ScalarField::new(g.clone(), base.clone()).unwrap();
            let l2 = ScalarField::new(
                g.clone(),
                base.iter().zip(&bump).map(|(a, b)| a + b).collect(),
            ).unwrap();
            let cfg = EikonalSolveConfig::default();
            let v1 = solve_eikonal_dirichlet(&l1, &mask, &cfg).unwrap();
            let v2 = solve_eikonal_dirichlet(&l2, &mask, &cfg).unwrap();
            for (a, b) in v1.values().iter().zip(v2.values()) {
                prop_assert!(*a <= *b + 1e-9);
            }
            prop_assert!(v1.values().iter().all(|&x| x >= 0.0));
        }
    }
}
