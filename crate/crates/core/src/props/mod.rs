//! One check per proven inequality, each returning a [`CheckReport`].
//!
//! Continuum bounds are compared with grid quantities, so every check
//! carries an explicit tolerance; grid-dependent ones use `κ·h` with the
//! constants below.

use serde::{Deserialize, Serialize};

use crate::descent::{occupational_fraction, DescentStatus, OccupationalStats, Trajectory};
use crate::error::{Error, Result};
use crate::field::{ScalarField, TargetMask};

/// Absolute slack on `min f ≤ λu_λ ≤ max f`, covering the fixpoint tolerance.
pub const VALUE_BOUNDS_TOL: f64 = 1e-6;
/// `κ` for the gradient bound `|Du| ≤ sqrt(4‖f‖∞)`.
pub const KAPPA_GRADIENT: f64 = 1.0;
/// `κ` for the semiconcavity bound, scaled by the semiconcavity constant.
pub const KAPPA_SEMICONCAVITY: f64 = 2.0;
/// Half-width of the second differences in [`check_semiconcavity`].
pub const SEMICONCAVITY_SCALE: f64 = 0.125;
/// `κ` for `v ≤ ℓ̄ · dist`, scaled by `ℓ̄`.
pub const KAPPA_V_UPPER: f64 = 2.0;
/// Absolute slack on the occupational bound.
pub const RHO_TOL: f64 = 1e-3;
/// Relative band for radial hitting times.
pub const RADIAL_REL_TOL: f64 = 0.05;
/// Smallest `inf{ℓ : dist > δ}` accepted as positive.
pub const H_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    /// Worst signed slack; positive means satisfied.
    pub margin: f64,
    pub worst_location: Option<Vec<f64>>,
    pub tolerance: f64,
    pub details: String,
}

impl CheckReport {
    pub fn new(
        name: &str,
        margin: f64,
        tolerance: f64,
        worst_location: Option<Vec<f64>>,
        details: String,
    ) -> Self {
        CheckReport {
            name: name.to_string(),
            passed: margin >= -tolerance,
            margin,
            worst_location,
            tolerance,
            details,
        }
    }

    /// A check whose hypothesis never triggers.
    pub fn vacuous(name: &str, details: &str) -> Self {
        CheckReport::new(name, 0.0, 0.0, None, format!("vacuous: {details}"))
    }

    /// Folds reports of the same check into the worst one.
    pub fn worst(name: &str, reports: Vec<CheckReport>) -> Self {
        if reports.is_empty() {
            return CheckReport::vacuous(name, "no cases");
        }
        let passed = reports.iter().all(|r| r.passed);
        let worst = reports
            .iter()
            .min_by(|a, b| (a.margin + a.tolerance).total_cmp(&(b.margin + b.tolerance)))
            .expect("nonempty");
        let details = format!(
            "{} cases, {} failed; worst: {}",
            reports.len(),
            reports.iter().filter(|r| !r.passed).count(),
            worst.details
        );
        CheckReport {
            name: name.to_string(),
            passed,
            margin: worst.margin,
            worst_location: worst.worst_location.clone(),
            tolerance: worst.tolerance,
            details,
        }
    }
}

/// Tracks the smallest slack and where it occurs.
struct Worst {
    margin: f64,
    index: Option<usize>,
}

impl Worst {
    fn new() -> Self {
        Worst {
            margin: f64::INFINITY,
            index: None,
        }
    }

    fn offer(&mut self, slack: f64, index: usize) {
        if slack < self.margin {
            self.margin = slack;
            self.index = Some(index);
        }
    }
}

/// `min f ≤ λu_λ ≤ max f` at every node.
pub fn check_value_bounds(f: &ScalarField, u: &ScalarField, lambda: f64) -> Result<CheckReport> {
    f.ensure_same_grid(u)?;
    let (lo, hi) = (f.min(), f.max());
    let mut worst = Worst::new();
    for (i, &ui) in u.values().iter().enumerate() {
        let scaled = lambda * ui;
        worst.offer((scaled - lo).min(hi - scaled), i);
    }
    Ok(CheckReport::new(
        "value_bounds",
        worst.margin,
        VALUE_BOUNDS_TOL,
        worst.index.map(|i| u.grid().node(i)),
        format!("lambda = {lambda}, min f = {lo}, max f = {hi}"),
    ))
}

/// Discrete gradient: central differences inside, one-sided at the edges.
pub fn discrete_gradient(field: &ScalarField, index: usize) -> [f64; 2] {
    let grid = field.grid();
    let vals = field.values();
    let h = grid.spacing;
    let mut g = [0.0; 2];
    for (axis, slot) in g.iter_mut().enumerate().take(grid.dim) {
        let lo = grid.shifted(index, axis, -1);
        let hi = grid.shifted(index, axis, 1);
        *slot = match (lo, hi) {
            (Some(l), Some(r)) => (vals[r] - vals[l]) / (2.0 * h),
            (None, Some(r)) => (vals[r] - vals[index]) / h,
            (Some(l), None) => (vals[index] - vals[l]) / h,
            (None, None) => 0.0,
        };
    }
    g
}

/// `|Du| ≤ sqrt(4‖f‖∞)` at every node.
pub fn check_gradient_bound(field: &ScalarField, f: &ScalarField) -> Result<CheckReport> {
    f.ensure_same_grid(field)?;
    let bound = (4.0 * f.sup_norm()).sqrt();
    let mut worst = Worst::new();
    for i in 0..field.values().len() {
        let g = discrete_gradient(field, i);
        worst.offer(bound - (g[0] * g[0] + g[1] * g[1]).sqrt(), i);
    }
    let h = field.grid().spacing;
    Ok(CheckReport::new(
        "gradient_bound",
        worst.margin,
        KAPPA_GRADIENT * h,
        worst.index.map(|i| field.grid().node(i)),
        format!("bound sqrt(4 |f|_inf) = {bound}"),
    ))
}

/// Semiconcavity constant `sqrt(2(C₁ + C₂) + 1)` for Lipschitz constant
/// `C₁` and semiconcavity constant `C₂` of `f`.
pub fn semiconcavity_constant(c1: f64, c2: f64) -> f64 {
    (2.0 * (c1 + c2) + 1.0).sqrt()
}

/// Centered second differences along the axes and, in 2D, the diagonals
/// stay below `sqrt(2(C₁ + C₂) + 1)`.
///
/// Differences span [`SEMICONCAVITY_SCALE`] rather than one cell: first-order
/// schemes carry `O(h)`-sized kinks and curvature overshoot at minimizers
/// that a one-cell difference turns into `O(1)` or `O(1/h)` artifacts.
pub fn check_semiconcavity(field: &ScalarField, c1: f64, c2: f64) -> Result<CheckReport> {
    let grid = field.grid();
    let widest = (grid.counts.iter().min().copied().unwrap_or(3) - 1) / 2;
    let stride = ((SEMICONCAVITY_SCALE / grid.spacing).round() as usize).clamp(1, widest.max(1));
    check_semiconcavity_with_stride(field, c1, c2, stride)
}

/// [`check_semiconcavity`] with differences spanning `stride` cells.
pub fn check_semiconcavity_with_stride(
    field: &ScalarField,
    c1: f64,
    c2: f64,
    stride: usize,
) -> Result<CheckReport> {
    let grid = field.grid();
    let vals = field.values();
    let h = grid.spacing;
    let bound = semiconcavity_constant(c1, c2);
    let directions: &[[isize; 2]] = if grid.dim == 1 {
        &[[1, 0]]
    } else {
        &[[1, 0], [0, 1], [1, 1], [1, -1]]
    };
    let mut worst = Worst::new();
    for i in 0..grid.len() {
        let m = grid.multi_index(i);
        for dir in directions {
            let step = |sign: isize| -> Option<usize> {
                let mut out = [0usize; 2];
                for axis in 0..grid.dim {
                    let k = m[axis] as isize + sign * dir[axis] * stride as isize;
                    if k < 0 || k >= grid.counts[axis] as isize {
                        return None;
                    }
                    out[axis] = k as usize;
                }
                Some(grid.flat_index(&out))
            };
            if let (Some(a), Some(b)) = (step(-1), step(1)) {
                let s = h * stride as f64;
                let len2 = s * s * (dir[0] * dir[0] + dir[1] * dir[1]) as f64;
                let second = (vals[a] - 2.0 * vals[i] + vals[b]) / len2;
                worst.offer(bound - second, i);
            }
        }
    }
    Ok(CheckReport::new(
        "semiconcavity",
        worst.margin,
        KAPPA_SEMICONCAVITY * bound * h,
        worst.index.map(|i| grid.node(i)),
        format!("C1 = {c1}, C2 = {c2}, bound = {bound}, stride = {stride}"),
    ))
}

/// `v ≤ ℓ̄ · dist(·, target)` at every node.
pub fn check_v_upper_bound(
    v: &ScalarField,
    ell: &ScalarField,
    mask: &TargetMask,
) -> Result<CheckReport> {
    v.ensure_same_grid(ell)?;
    if !v.grid().same_as(mask.grid()) {
        return Err(Error::GridMismatch("value and mask grids differ".into()));
    }
    let ell_bar = ell.max();
    let mut worst = Worst::new();
    for (i, &vi) in v.values().iter().enumerate() {
        let x = v.grid().node_array(i);
        let d = mask.distance_from(&x[..v.grid().dim]);
        worst.offer(ell_bar * d - vi, i);
    }
    Ok(CheckReport::new(
        "v_upper_bound",
        worst.margin,
        KAPPA_V_UPPER * ell_bar * v.grid().spacing,
        worst.index.map(|i| v.grid().node(i)),
        format!("sup ell = {ell_bar}"),
    ))
}

/// Share of time with `ℓ > δ` below `ℓ̄ · dist(x₀) / (tδ)`.
pub fn check_rho_bound(stats: &OccupationalStats) -> CheckReport {
    CheckReport::new(
        "rho_bound",
        stats.bound - stats.fraction,
        RHO_TOL,
        None,
        format!(
            "delta = {}, t = {}, fraction = {}, bound = {}",
            stats.delta, stats.horizon, stats.fraction, stats.bound
        ),
    )
}

/// `inf{ℓ(x) : dist(x, target) > δ}` over grid nodes; `None` when no node
/// lies that far out.
pub fn measured_gamma(ell: &ScalarField, mask: &TargetMask, delta: f64) -> Option<f64> {
    let grid = ell.grid();
    (0..grid.len())
        .filter(|&i| {
            let x = grid.node_array(i);
            mask.distance_from(&x[..grid.dim]) > delta
        })
        .map(|i| ell.values()[i])
        .min_by(f64::total_cmp)
}

/// After an excursion to distance `δ` at time `τ`, the share of `[0, t]`
/// with `ℓ > γ(δ/2)` is at least `δ/t` for every recorded `t > τ + δ/2`.
///
/// `γ(δ/2)` is half the smallest `ℓ` sampled at nodes farther than
/// `δ/2 - h·sqrt(dim)` from the target, so that it sits strictly below the
/// infimum seen by interpolated path values.
pub fn check_rho_lower_bound_excursion(
    traj: &Trajectory,
    ell: &ScalarField,
    mask: &TargetMask,
    delta: f64,
) -> Result<CheckReport> {
    const NAME: &str = "rho_lower_bound_excursion";
    if !(delta > 0.0) {
        return Err(Error::Input(format!("delta must be positive, got {delta}")));
    }
    let tau = traj
        .times
        .iter()
        .zip(&traj.dist_values)
        .find(|&(&t, &d)| d > delta && t >= 0.5 * delta)
        .map(|(&t, _)| t);
    let Some(tau) = tau else {
        return Ok(CheckReport::vacuous(NAME, "no excursion beyond delta"));
    };
    let grid = ell.grid();
    let reach = 0.5 * delta - grid.spacing * (grid.dim as f64).sqrt();
    let Some(inf) = measured_gamma(ell, mask, reach.max(0.0)) else {
        return Ok(CheckReport::vacuous(NAME, "no nodes beyond delta/2"));
    };
    let gamma = 0.5 * inf;
    if !(gamma > 0.0) {
        return Ok(CheckReport::new(
            NAME,
            f64::NEG_INFINITY,
            0.0,
            None,
            format!("running cost vanishes beyond delta/2 = {}", 0.5 * delta),
        ));
    }
    let max_gap = traj
        .times
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    let mut worst = Worst::new();
    for (k, &t) in traj.times.iter().enumerate() {
        if t > tau + 0.5 * delta {
            let rho = occupational_fraction(traj, ell, gamma, t)?.fraction;
            worst.offer(rho - delta / t, k);
        }
    }
    let Some(k) = worst.index else {
        return Ok(CheckReport::vacuous(
            NAME,
            "trajectory ends before tau + delta/2",
        ));
    };
    Ok(CheckReport::new(
        NAME,
        worst.margin,
        2.0 * max_gap / (tau + 0.5 * delta),
        Some(traj.points[k].clone()),
        format!(
            "delta = {delta}, tau = {tau}, gamma = {gamma}, worst t = {}",
            traj.times[k]
        ),
    ))
}

/// Measured `γ(δ) = inf{ℓ : dist > δ}` for each `δ`, failing when any lies
/// below `floor`.
pub fn check_assumption_h(
    ell: &ScalarField,
    mask: &TargetMask,
    deltas: &[f64],
    floor: f64,
) -> Result<CheckReport> {
    const NAME: &str = "assumption_H";
    if !ell.grid().same_as(mask.grid()) {
        return Err(Error::GridMismatch(
            "running cost and mask grids differ".into(),
        ));
    }
    let grid = ell.grid();
    let dists: Vec<f64> = (0..grid.len())
        .map(|i| {
            let x = grid.node_array(i);
            mask.distance_from(&x[..grid.dim])
        })
        .collect();
    let mut margin = f64::INFINITY;
    let mut location = None;
    let mut notes = Vec::new();
    for &delta in deltas {
        let best = (0..grid.len())
            .filter(|&i| dists[i] > delta)
            .min_by(|&a, &b| ell.values()[a].total_cmp(&ell.values()[b]));
        match best {
            Some(i) => {
                let gamma = ell.values()[i];
                notes.push(format!("gamma({delta}) = {gamma}"));
                if gamma - floor < margin {
                    margin = gamma - floor;
                    location = Some(grid.node(i));
                }
            }
            None => notes.push(format!("gamma({delta}) vacuous")),
        }
    }
    if location.is_none() {
        return Ok(CheckReport::vacuous(NAME, &notes.join(", ")));
    }
    Ok(CheckReport::new(
        NAME,
        margin,
        0.0,
        location,
        format!("floor = {floor}; {}", notes.join(", ")),
    ))
}

/// Under a radial running cost `ℓ = γ̃(dist)` the hitting time equals the
/// starting distance, here within [`RADIAL_REL_TOL`].
pub fn check_hitting_time_radial(
    traj: &Trajectory,
    gamma_tilde: impl Fn(f64) -> f64,
    d_x0: f64,
    r: f64,
) -> Result<CheckReport> {
    const NAME: &str = "hitting_time_radial";
    if !(d_x0 >= 0.0) || d_x0 > r {
        return Err(Error::Input(format!(
            "starting distance {d_x0} must lie in [0, {r}]"
        )));
    }
    let profile_gap = traj
        .ell_values
        .iter()
        .zip(&traj.dist_values)
        .map(|(&l, &d)| (l - gamma_tilde(d.min(r))).abs())
        .fold(0.0, f64::max);
    let start = Some(traj.start.clone());
    let Some(hit) = traj.hit_time else {
        return Ok(CheckReport::new(
            NAME,
            f64::NEG_INFINITY,
            0.0,
            start,
            format!("no hit, status {:?}", traj.status),
        ));
    };
    Ok(CheckReport::new(
        NAME,
        RADIAL_REL_TOL * d_x0 - (hit - d_x0).abs(),
        1e-12,
        start,
        format!("d = {d_x0}, hit = {hit}, max |ell - profile(d)| = {profile_gap}"),
    ))
}

/// Finite hitting time under `ℓ ≥ c · dist^β` with `β < 3/2`:
/// `t_x ≤ v(x₀)^{1-ρ} / (C₄(1-ρ))`, `ρ = 2β/3`, where
/// `C₄ = min ℓ/v^ρ` along the recorded path before the hit (`ℓ = |∇v|` on
/// the path).
pub fn check_lojasiewicz_hitting(
    traj: &Trajectory,
    v: &ScalarField,
    c: f64,
    beta: f64,
    d_x0: f64,
) -> Result<CheckReport> {
    const NAME: &str = "lojasiewicz_hitting";
    if !(beta > 0.0 && beta < 1.5) {
        return Err(Error::Input(format!(
            "beta must lie in (0, 3/2), got {beta}"
        )));
    }
    if d_x0 <= 0.0 {
        return Ok(CheckReport::vacuous(NAME, "start on target"));
    }
    let start = Some(traj.start.clone());
    let Some(hit) = traj.hit_time else {
        return Ok(CheckReport::new(
            NAME,
            f64::NEG_INFINITY,
            0.0,
            start,
            format!("no hit, status {:?}", traj.status),
        ));
    };
    let rho = 2.0 * beta / 3.0;
    let mut c4 = f64::INFINITY;
    let mut lower = f64::INFINITY;
    for ((p, &l), &d) in traj
        .points
        .iter()
        .zip(&traj.ell_values)
        .zip(&traj.dist_values)
    {
        let vp = v.interpolate_clamped(p);
        if vp > 0.0 && l > 0.0 {
            c4 = c4.min(l / vp.powf(rho));
        }
        if d > 0.0 {
            lower = lower.min(l / (c * d.powf(beta)));
        }
    }
    if !c4.is_finite() {
        return Ok(CheckReport::vacuous(NAME, "v vanishes along the path"));
    }
    let v0 = v.interpolate_clamped(&traj.start);
    let bound = v0.powf(1.0 - rho) / (c4 * (1.0 - rho));
    let step = traj.times.get(1).copied().unwrap_or(0.0);
    Ok(CheckReport::new(
        NAME,
        bound - hit,
        step,
        start,
        format!(
            "beta = {beta}, C4 = {c4}, bound = {bound}, hit = {hit}, min ell/(c d^beta) = {lower}"
        ),
    ))
}

/// `v(y(t)) + ∫ℓ` does not increase along the path by more than `tol`.
pub fn check_monitored_h(traj: &Trajectory, tol: f64) -> CheckReport {
    let mut worst = Worst::new();
    let mut running_min = f64::INFINITY;
    for (k, &hv) in traj.h_values.iter().enumerate() {
        running_min = running_min.min(hv);
        worst.offer(running_min - hv, k);
    }
    CheckReport::new(
        "monitored_h",
        worst.margin,
        tol,
        worst.index.map(|k| traj.points[k].clone()),
        format!("{} samples", traj.h_values.len()),
    )
}

/// Radius `η = ε γ(ε/2) / ℓ̄` of starts guaranteed to stay within `ε` of the
/// target, with `γ` measured on the grid.
pub fn lyapunov_radius(ell: &ScalarField, mask: &TargetMask, eps: f64) -> Option<f64> {
    let gamma = measured_gamma(ell, mask, 0.5 * eps)?;
    let ell_bar = ell.max();
    (ell_bar > 0.0).then(|| eps * gamma / ell_bar)
}

/// Every trajectory starting within `η` stays within `eps + tol` of the
/// target.
pub fn check_lyapunov(trajs: &[Trajectory], eps: f64, eta: f64, tol: f64) -> CheckReport {
    const NAME: &str = "lyapunov";
    let mut margin = f64::INFINITY;
    let mut location = None;
    let mut count = 0;
    for traj in trajs.iter().filter(|t| t.dist_values[0] <= eta) {
        count += 1;
        for (p, &d) in traj.points.iter().zip(&traj.dist_values) {
            if eps - d < margin {
                margin = eps - d;
                location = Some(p.clone());
            }
        }
    }
    if count == 0 {
        return CheckReport::vacuous(NAME, "no start within eta");
    }
    CheckReport::new(
        NAME,
        margin,
        tol,
        location,
        format!("eps = {eps}, eta = {eta}, {count} starts"),
    )
}

/// Whether a run reached the band `dist ≤ radius` before stopping.
pub fn reached_target(traj: &Trajectory, radius: f64) -> bool {
    traj.status == DescentStatus::Hit && traj.final_distance() <= radius
}
