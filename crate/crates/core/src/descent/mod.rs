//! Normalized gradient descent `ẏ = -p/|p|`, `p ∈ D⁻v(y)`, on a computed
//! critical solution, with hitting times and occupational fractions.

mod occupation;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, TargetMask, MAX_DIM};

pub use occupation::{occupational_fraction, OccupationalStats};

/// Gradients below `GRADIENT_FLOOR_FACTOR · h · ℓ̄` switch the direction
/// choice to neighbor probing.
pub const GRADIENT_FLOOR_FACTOR: f64 = 10.0;

/// A probe step must lower `v` by more than `FLAT_FACTOR · h · ℓ̄ · Δt`,
/// otherwise the descent stalls.
pub const FLAT_FACTOR: f64 = 1e-3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieBreak {
    #[default]
    Lexicographic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescentConfig {
    /// Explicit Euler step `Δt`; at unit speed also the step length.
    pub step: f64,
    pub max_time: f64,
    /// A hit is declared once `dist(y, target) ≤ stop_dist`.
    pub stop_dist: f64,
    #[serde(default)]
    pub tie_break: TieBreak,
}

impl DescentConfig {
    /// `Δt = h/2`, `stop_dist = h`, `max_time = 10 · diam(box)`.
    pub fn for_grid(grid: &crate::field::GridSpec) -> Self {
        DescentConfig {
            step: 0.5 * grid.spacing,
            max_time: 10.0 * grid.diameter(),
            stop_dist: grid.spacing,
            tie_break: TieBreak::Lexicographic,
        }
    }

    pub fn validate(&self, spacing: f64) -> Result<()> {
        if !(self.step > 0.0) || self.step > spacing * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "descent step {} must lie in (0, h = {spacing}]",
                self.step
            )));
        }
        if !(self.stop_dist >= spacing * (1.0 - 1e-12)) {
            return Err(Error::Config(format!(
                "stop_dist {} must be at least h = {spacing}",
                self.stop_dist
            )));
        }
        if !(self.max_time > 0.0) {
            return Err(Error::Config("max_time must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescentStatus {
    Hit,
    /// No direction lowers `v`: a numerically flat spot off the target.
    Stalled,
    MaxTime,
    /// The next step would leave the computational box.
    Boundary,
}

/// A recorded descent path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub start: Vec<f64>,
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub ell_values: Vec<f64>,
    /// `v(y(t)) + ∫₀ᵗ ℓ(y(s)) ds`, trapezoid rule.
    pub h_values: Vec<f64>,
    /// Distance to the target at each point.
    pub dist_values: Vec<f64>,
    pub hit_time: Option<f64>,
    pub status: DescentStatus,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        *self
            .times
            .last()
            .expect("trajectories hold at least the start")
    }

    pub fn final_distance(&self) -> f64 {
        *self
            .dist_values
            .last()
            .expect("trajectories hold at least the start")
    }

    /// CSV with header `t,x0[,x1],ell,h,d`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let dim = self.start.len();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((0..dim).map(|k| format!("x{k}")));
        header.extend(["ell", "h", "d"].map(String::from));
        w.write_record(&header)?;
        for k in 0..self.times.len() {
            let mut row = vec![self.times[k].to_string()];
            row.extend(self.points[k].iter().map(|c| c.to_string()));
            row.push(self.ell_values[k].to_string());
            row.push(self.h_values[k].to_string());
            row.push(self.dist_values[k].to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn hitting_time(traj: &Trajectory) -> Option<f64> {
    traj.hit_time
}

/// Integrates the descent from `x0` with explicit unit-speed Euler steps.
///
/// The direction is `-p/|p|` for the Godunov upwind gradient `p` of the
/// interpolated `v` at the current point. When `|p|` is numerically zero the
/// axis and diagonal neighbors are probed one step ahead and the largest
/// decrease of `v` wins, first index on ties; if nothing decreases the run
/// stalls.
pub fn integrate_descent(
    v: &ScalarField,
    ell: &ScalarField,
    mask: &TargetMask,
    x0: &[f64],
    cfg: &DescentConfig,
) -> Result<Trajectory> {
    let grid = v.grid();
    v.ensure_same_grid(ell)?;
    if !grid.same_as(mask.grid()) {
        return Err(Error::GridMismatch("value and mask grids differ".into()));
    }
    cfg.validate(grid.spacing)?;
    if !grid.contains(x0) {
        return Err(Error::Input(format!("start {x0:?} lies outside the box")));
    }
    let dim = grid.dim;
    let h = grid.spacing;
    let ell_bar = ell.max();
    let gradient_floor = GRADIENT_FLOOR_FACTOR * h * ell_bar;
    let flat = FLAT_FACTOR * h * ell_bar * cfg.step;
    let probes = probe_directions(dim);

    let mut y = [0.0; MAX_DIM];
    y[..dim].copy_from_slice(x0);
    let mut traj = Trajectory {
        start: x0.to_vec(),
        times: vec![0.0],
        points: vec![x0.to_vec()],
        ell_values: vec![ell.interpolate_clamped(x0)],
        h_values: vec![v.interpolate_clamped(x0)],
        dist_values: vec![mask.distance_from(x0)],
        hit_time: None,
        status: DescentStatus::MaxTime,
    };
    if traj.dist_values[0] <= cfg.stop_dist {
        traj.hit_time = Some(0.0);
        traj.status = DescentStatus::Hit;
        return Ok(traj);
    }

    let mut integral = 0.0;
    let mut step_count: u64 = 0;
    loop {
        let t = step_count as f64 * cfg.step;
        if t >= cfg.max_time {
            traj.status = DescentStatus::MaxTime;
            break;
        }
        let here = &y[..dim];
        let mut direction = [0.0; MAX_DIM];
        let p = upwind_gradient(v, here);
        let norm = (p[0] * p[0] + p[1] * p[1]).sqrt();
        if norm >= gradient_floor && norm > 0.0 {
            for k in 0..dim {
                direction[k] = -p[k] / norm;
            }
        } else {
            let v_here = v.interpolate_clamped(here);
            let mut best: Option<(f64, usize)> = None;
            for (idx, dir) in probes.iter().enumerate() {
                let mut probe = [0.0; MAX_DIM];
                for k in 0..dim {
                    probe[k] = y[k] + cfg.step * dir[k];
                }
                if !grid.contains(&probe[..dim]) {
                    continue;
                }
                let decrease = v_here - v.interpolate_clamped(&probe[..dim]);
                if best.is_none_or(|(b, _)| decrease > b) {
                    best = Some((decrease, idx));
                }
            }
            match best {
                Some((decrease, idx)) if decrease > flat => direction = probes[idx],
                _ => {
                    traj.status = DescentStatus::Stalled;
                    break;
                }
            }
        }

        let mut next = [0.0; MAX_DIM];
        for k in 0..dim {
            next[k] = y[k] + cfg.step * direction[k];
        }
        if !grid.contains(&next[..dim]) {
            traj.status = DescentStatus::Boundary;
            break;
        }
        step_count += 1;
        let t_next = step_count as f64 * cfg.step;
        let ell_next = ell.interpolate_clamped(&next[..dim]);
        let d_prev = *traj.dist_values.last().expect("nonempty");
        let d_next = mask.distance_from(&next[..dim]);
        integral += 0.5 * cfg.step * (traj.ell_values.last().expect("nonempty") + ell_next);
        traj.times.push(t_next);
        traj.points.push(next[..dim].to_vec());
        traj.ell_values.push(ell_next);
        traj.h_values
            .push(v.interpolate_clamped(&next[..dim]) + integral);
        traj.dist_values.push(d_next);
        y = next;
        if d_next <= cfg.stop_dist {
            let frac = (d_prev - cfg.stop_dist) / (d_prev - d_next);
            traj.hit_time = Some(t + frac.clamp(0.0, 1.0) * cfg.step);
            traj.status = DescentStatus::Hit;
            break;
        }
    }
    Ok(traj)
}

/// Descents from many starts, in parallel, results in start order.
pub fn integrate_many(
    v: &ScalarField,
    ell: &ScalarField,
    mask: &TargetMask,
    starts: &[Vec<f64>],
    cfg: &DescentConfig,
) -> Result<Vec<Trajectory>> {
    starts
        .par_iter()
        .map(|x0| integrate_descent(v, ell, mask, x0, cfg))
        .collect()
}

/// Godunov upwind gradient of the interpolated field at `x`, one grid
/// spacing to either side, shortened at the box edges.
pub(crate) fn upwind_gradient(v: &ScalarField, x: &[f64]) -> [f64; MAX_DIM] {
    let grid = v.grid();
    let h = grid.spacing;
    let center = v.interpolate_clamped(x);
    let mut p = [0.0; MAX_DIM];
    for k in 0..grid.dim {
        let mut lo = [0.0; MAX_DIM];
        let mut hi = [0.0; MAX_DIM];
        lo[..grid.dim].copy_from_slice(x);
        hi[..grid.dim].copy_from_slice(x);
        lo[k] = (x[k] - h).max(grid.lower(k));
        hi[k] = (x[k] + h).min(grid.upper(k));
        let back = if x[k] - lo[k] > 0.0 {
            ((center - v.interpolate_clamped(&lo[..grid.dim])) / (x[k] - lo[k])).max(0.0)
        } else {
            0.0
        };
        let fwd = if hi[k] - x[k] > 0.0 {
            ((center - v.interpolate_clamped(&hi[..grid.dim])) / (hi[k] - x[k])).max(0.0)
        } else {
            0.0
        };
        p[k] = if back >= fwd { back } else { -fwd };
    }
    p
}

/// Unit axis directions, then diagonals, in a fixed order.
fn probe_directions(dim: usize) -> Vec<[f64; MAX_DIM]> {
    if dim == 1 {
        return vec![[1.0, 0.0], [-1.0, 0.0]];
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    vec![
        [1.0, 0.0],
        [-1.0, 0.0],
        [0.0, 1.0],
        [0.0, -1.0],
        [s, s],
        [s, -s],
        [-s, s],
        [-s, -s],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{build_target_mask, GridSpec};
    use crate::hj::{build_ell, solve_eikonal_dirichlet, EikonalSolveConfig};

    struct Setup {
        v: ScalarField,
        ell: ScalarField,
        mask: TargetMask,
    }

    fn setup(grid: &GridSpec, f: impl Fn(&[f64]) -> f64) -> Setup {
        let f = ScalarField::from_fn(grid, f).unwrap();
        let mask = build_target_mask(&f, f.min(), 1e-12).unwrap();
        let ell = build_ell(&f, f.min()).unwrap();
        let v = solve_eikonal_dirichlet(&ell, &mask, &EikonalSolveConfig::default()).unwrap();
        Setup { v, ell, mask }
    }

    fn quadratic(h: f64) -> Setup {
        let g = GridSpec::from_box(&[-1.0], &[1.0], h).unwrap();
        setup(&g, |x| 0.5 * x[0] * x[0])
    }

    #[test]
    fn start_on_target_hits_immediately() {
        let s = quadratic(1.0 / 64.0);
        let cfg = DescentConfig::for_grid(s.v.grid());
        let traj = integrate_descent(&s.v, &s.ell, &s.mask, &[0.0], &cfg).unwrap();
        assert_eq!(traj.hit_time, Some(0.0));
        assert_eq!(traj.points.len(), 1);
        assert_eq!(hitting_time(&traj), Some(0.0));
    }

    #[test]
    fn quadratic_hits_after_unit_speed_travel() {
        let h = 1.0 / 128.0;
        let s = quadratic(h);
        let cfg = DescentConfig::for_grid(s.v.grid());
        let traj = integrate_descent(&s.v, &s.ell, &s.mask, &[0.8], &cfg).unwrap();
        let hit = traj.hit_time.unwrap();
        assert!((hit - 0.8).abs() <= 0.05 * 0.8);
        // Straight unit-speed path reaches the band |y| = h at 0.8 - h.
        assert!((hit - (0.8 - h)).abs() < 1e-9);
        for w in traj.points.windows(2) {
            let step = (w[1][0] - w[0][0]).abs();
            assert!((step - cfg.step).abs() <= 1e-12);
        }
    }

    #[test]
    fn distance_descent_follows_straight_segment() {
        let h = 1.0 / 64.0;
        let g = GridSpec::from_box(&[-1.0, -1.0], &[1.0, 1.0], h).unwrap();
        let target = g.nearest_node(&[0.25, -0.5]);
        let mask = TargetMask::from_indices(&g, &[target]).unwrap();
        let ones = ScalarField::constant(&g, 1.0).unwrap();
        let v = solve_eikonal_dirichlet(&ones, &mask, &EikonalSolveConfig::default()).unwrap();
        let x0 = [-0.6, 0.55];
        let cfg = DescentConfig::for_grid(&g);
        let traj = integrate_descent(&v, &ones, &mask, &x0, &cfg).unwrap();
        assert_eq!(traj.status, DescentStatus::Hit);
        let z = [0.25, -0.5];
        let len = ((z[0] - x0[0]).powi(2) + (z[1] - x0[1]).powi(2)).sqrt();
        let dir = [(z[0] - x0[0]) / len, (z[1] - x0[1]) / len];
        for p in &traj.points {
            let rel = [p[0] - x0[0], p[1] - x0[1]];
            let off_line = (rel[0] * dir[1] - rel[1] * dir[0]).abs();
            assert!(
                off_line <= 2.0 * h,
                "point {p:?} is {off_line} off the segment"
            );
        }
        assert!((traj.hit_time.unwrap() - (len - h)).abs() <= 3.0 * h);
    }

    #[test]
    fn flat_region_stalls() {
        let g = GridSpec::from_box(&[-6.0], &[6.0], 1.0 / 16.0).unwrap();
        let s = setup(&g, |x| 0.5 * x[0] * x[0] * (-2.0 * x[0] * x[0]).exp());
        // The tails of f sit below 1e-12 and join the mask at that tolerance.
        let f =
            ScalarField::from_fn(&g, |x| 0.5 * x[0] * x[0] * (-2.0 * x[0] * x[0]).exp()).unwrap();
        let origin_only = build_target_mask(&f, 0.0, 1e-300).unwrap();
        assert_eq!(origin_only.count(), 1);
        let v =
            solve_eikonal_dirichlet(&s.ell, &origin_only, &EikonalSolveConfig::default()).unwrap();
        let cfg = DescentConfig::for_grid(&g);
        let traj = integrate_descent(&v, &s.ell, &origin_only, &[5.0], &cfg).unwrap();
        assert_eq!(traj.status, DescentStatus::Stalled);
        assert_eq!(traj.hit_time, None);
    }

    #[test]
    fn monitored_quantity_does_not_increase() {
        let h = 1.0 / 64.0;
        let g = GridSpec::from_box(&[-2.0], &[2.0], h).unwrap();
        let s = setup(&g, |x| (x[0] * x[0] - 1.0).powi(2));
        let cfg = DescentConfig::for_grid(&g);
        for x0 in [-1.9, -0.3, 0.0, 0.7, 1.8] {
            let traj = integrate_descent(&s.v, &s.ell, &s.mask, &[x0], &cfg).unwrap();
            assert_eq!(traj.status, DescentStatus::Hit, "x0 = {x0}");
            for w in traj.h_values.windows(2) {
                assert!(w[1] <= w[0] + 4.0 * (h + cfg.step));
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = quadratic(1.0 / 16.0);
        let cfg = DescentConfig::for_grid(s.v.grid());
        assert!(matches!(
            integrate_descent(&s.v, &s.ell, &s.mask, &[1.5], &cfg),
            Err(Error::Input(_))
        ));
        let mut big = cfg.clone();
        big.step = 1.0;
        assert!(matches!(
            integrate_descent(&s.v, &s.ell, &s.mask, &[0.5], &big),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn batch_matches_serial() {
        let s = quadratic(1.0 / 32.0);
        let cfg = DescentConfig::for_grid(s.v.grid());
        let starts: Vec<Vec<f64>> = (0..8).map(|k| vec![-0.9 + 0.25 * k as f64]).collect();
        let batch = integrate_many(&s.v, &s.ell, &s.mask, &starts, &cfg).unwrap();
        for (x0, traj) in starts.iter().zip(&batch) {
            let serial = integrate_descent(&s.v, &s.ell, &s.mask, x0, &cfg).unwrap();
            assert_eq!(&serial, traj);
        }
    }
}
