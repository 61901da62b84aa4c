use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Explicit time marching for `∂ₜu + ½|Du|² = f`, `u(·, 0) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutiveSolveConfig {
    /// Time step; `None` picks the largest step the CFL bound allows.
    #[serde(default)]
    pub dt: Option<f64>,
    pub t_final: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub record_times: Vec<f64>,
    /// Gradient cap entering the CFL bound; defaults to 1.25 sqrt(4‖f‖∞).
    #[serde(default)]
    pub gradient_cap: Option<f64>,
}

fn default_cfl() -> f64 {
    0.9
}

impl EvolutiveSolveConfig {
    pub fn new(t_final: f64, record_times: Vec<f64>) -> Self {
        EvolutiveSolveConfig {
            dt: None,
            t_final,
            cfl: default_cfl(),
            record_times,
            gradient_cap: None,
        }
    }

    pub fn gradient_cap_for(&self, f: &ScalarField) -> f64 {
        self.gradient_cap
            .unwrap_or_else(|| super::discounted::default_control_cap(f))
    }

    /// Largest step with `dt · dim · max(1, A) ≤ cfl · h`.
    pub fn max_stable_dt(&self, f: &ScalarField) -> f64 {
        let grid = f.grid();
        self.cfl * grid.spacing / (grid.dim as f64 * self.gradient_cap_for(f).max(1.0))
    }

    pub fn resolved_dt(&self, f: &ScalarField) -> f64 {
        self.dt.unwrap_or_else(|| self.max_stable_dt(f))
    }

    pub fn validate(&self, f: &ScalarField) -> Result<()> {
        if !(self.t_final > 0.0) {
            return Err(Error::Config("t_final must be positive".into()));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Config(format!(
                "cfl must lie in (0, 1], got {}",
                self.cfl
            )));
        }
        let dt = self.resolved_dt(f);
        let limit = self.max_stable_dt(f);
        if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "dt = {dt} violates the CFL bound {limit}"
            )));
        }
        let mut last = 0.0;
        for &t in &self.record_times {
            if !(t >= last && t <= self.t_final) {
                return Err(Error::Config(
                    "record_times must ascend within [0, t_final]".into(),
                ));
            }
            last = t;
        }
        Ok(())
    }
}

/// Marches `u` to `t_final` with the Godunov Hamiltonian
/// `½ Σₖ max((D⁻ₖu)⁺, (D⁺ₖu)⁻)²` and returns snapshots at `record_times`
/// (only the final state when none are requested). Steps are shortened to
/// land exactly on every snapshot time. Box edges use the one-sided
/// difference that exists.
pub fn solve_evolutive(
    f: &ScalarField,
    cfg: &EvolutiveSolveConfig,
) -> Result<Vec<(f64, ScalarField)>> {
    cfg.validate(f)?;
    solve_evolutive_unchecked(f, cfg)
}

/// Same as [`solve_evolutive`] without the CFL precheck; instability is
/// then caught by the runtime increment bound.
pub fn solve_evolutive_unchecked(
    f: &ScalarField,
    cfg: &EvolutiveSolveConfig,
) -> Result<Vec<(f64, ScalarField)>> {
    let grid = f.grid();
    let dim = grid.dim;
    let h = grid.spacing;
    let n0 = grid.counts[0];
    let n1 = if dim == 2 { grid.counts[1] } else { 1 };
    let dt = cfg.resolved_dt(f);
    let cap = cfg.gradient_cap_for(f);
    let fnorm = f.sup_norm();
    let blowup = fnorm + dim as f64 * cap * cap + 1.0;
    let fv = f.values();

    let mut targets = cfg.record_times.clone();
    if targets.is_empty() {
        targets.push(cfg.t_final);
    }
    let mut u = vec![0.0; grid.len()];
    let mut next = vec![0.0; grid.len()];
    let mut t = 0.0;
    let mut out = Vec::with_capacity(targets.len());
    for &target in &targets {
        while t < target {
            let remaining = target - t;
            let step = if remaining <= dt * (1.0 + 1e-9) {
                remaining
            } else {
                dt
            };
            for i0 in 0..n0 {
                for i1 in 0..n1 {
                    let idx = i0 * n1 + i1;
                    let c = u[idx];
                    let mut ham = 0.0;
                    let mut axis = |lo: Option<f64>, hi: Option<f64>| {
                        let back = lo.map_or(0.0, |l| ((c - l) / h).max(0.0));
                        let fwd = hi.map_or(0.0, |r| ((r - c) / h).min(0.0));
                        let p = back.max(-fwd);
                        ham += 0.5 * p * p;
                    };
                    axis(
                        (i0 > 0).then(|| u[idx - n1]),
                        (i0 + 1 < n0).then(|| u[idx + n1]),
                    );
                    if dim == 2 {
                        axis(
                            (i1 > 0).then(|| u[idx - 1]),
                            (i1 + 1 < n1).then(|| u[idx + 1]),
                        );
                    }
                    let increment = step * (fv[idx] - ham);
                    if !increment.is_finite() || increment.abs() > step * blowup {
                        return Err(Error::Unstable {
                            time: t,
                            increment,
                            bound: step * blowup,
                        });
                    }
                    next[idx] = c + increment;
                }
            }
            std::mem::swap(&mut u, &mut next);
            t = if step == remaining { target } else { t + step };
        }
        out.push((target, ScalarField::new(grid.clone(), u.clone())?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;

    fn line(h: f64) -> GridSpec {
        GridSpec::from_box(&[-1.0], &[1.0], h).unwrap()
    }

    #[test]
    fn constant_objective_grows_linearly() {
        let f = ScalarField::constant(&line(1.0 / 16.0), 3.0).unwrap();
        let cfg = EvolutiveSolveConfig::new(2.0, vec![0.5, 1.0, 2.0]);
        for (t, u) in solve_evolutive(&f, &cfg).unwrap() {
            assert!(u.values().iter().all(|&v| (v - 3.0 * t).abs() < 1e-12));
        }
    }

    #[test]
    fn snapshots_land_on_requested_times() {
        let f = ScalarField::from_fn(&line(1.0 / 8.0), |x| x[0] * x[0]).unwrap();
        let cfg = EvolutiveSolveConfig::new(1.0, vec![0.0, 0.3, 1.0]);
        let snaps = solve_evolutive(&f, &cfg).unwrap();
        let times: Vec<f64> = snaps.iter().map(|s| s.0).collect();
        assert_eq!(times, vec![0.0, 0.3, 1.0]);
        assert!(snaps[0].1.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn increments_respect_time_derivative_bound() {
        let f = ScalarField::from_fn(&line(1.0 / 32.0), |x| (x[0] * x[0] - 0.3).powi(2)).unwrap();
        let mut cfg = EvolutiveSolveConfig::new(3.0, vec![]);
        let dt = cfg.max_stable_dt(&f);
        cfg.record_times = (0..=40).map(|k| k as f64 * dt).collect();
        let snaps = solve_evolutive(&f, &cfg).unwrap();
        for pair in snaps.windows(2) {
            let step = pair[1].0 - pair[0].0;
            let jump = pair[1].1.sup_distance(&pair[0].1).unwrap();
            assert!(jump <= step * (f.sup_norm() + 1e-9));
        }
    }

    #[test]
    fn cfl_violation_is_rejected_or_caught() {
        let f = ScalarField::from_fn(&line(1.0 / 64.0), |x| 2.0 * x[0] * x[0]).unwrap();
        let mut cfg = EvolutiveSolveConfig::new(5.0, vec![]);
        cfg.dt = Some(cfg.max_stable_dt(&f) * 20.0);
        assert!(matches!(solve_evolutive(&f, &cfg), Err(Error::Config(_))));
        assert!(matches!(
            solve_evolutive_unchecked(&f, &cfg),
            Err(Error::Unstable { .. })
        ));
    }
}
