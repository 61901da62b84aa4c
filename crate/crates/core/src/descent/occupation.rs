use serde::{Deserialize, Serialize};

use super::{DescentStatus, Trajectory};
use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Fraction of `[0, t]` a trajectory spends where `ℓ > δ`, next to its
/// upper bound `ℓ̄ · dist(x₀, target) / (tδ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupationalStats {
    pub delta: f64,
    pub horizon: f64,
    /// `|{s ∈ [0, t] : ℓ(y(s)) > δ}| / t`.
    pub fraction: f64,
    pub bound: f64,
}

/// Share of `[0, t]` spent outside `{ℓ ≤ δ}`.
///
/// `ℓ` is taken linear in time between recorded points, so crossings of the
/// level `δ` are resolved inside a step. Past the final
/// record of a trajectory that hit the target the path rests on the target,
/// where `ℓ` vanishes; any other trajectory must cover `[0, t]`.
pub fn occupational_fraction(
    traj: &Trajectory,
    ell: &ScalarField,
    delta: f64,
    t: f64,
) -> Result<OccupationalStats> {
    if !(delta > 0.0) {
        return Err(Error::Input(format!("delta must be positive, got {delta}")));
    }
    if !(t > 0.0) {
        return Err(Error::Input(format!("horizon must be positive, got {t}")));
    }
    let last = traj.final_time();
    if t > last * (1.0 + 1e-12) && traj.status != DescentStatus::Hit {
        return Err(Error::Input(format!(
            "horizon {t} exceeds the trajectory length {last}"
        )));
    }
    let mut outside = 0.0;
    for k in 0..traj.times.len().saturating_sub(1) {
        let (t0, t1) = (traj.times[k], traj.times[k + 1]);
        if t0 >= t {
            break;
        }
        let (l0, l1) = (traj.ell_values[k], traj.ell_values[k + 1]);
        let end = t1.min(t);
        let l_end = l0 + (l1 - l0) * (end - t0) / (t1 - t0);
        outside += (end - t0) - sublevel_length(t0, end, l0, l_end, delta);
    }
    let d0 = traj.dist_values[0];
    Ok(OccupationalStats {
        delta,
        horizon: t,
        fraction: (outside / t).clamp(0.0, 1.0),
        bound: ell.max() * d0 / (t * delta),
    })
}

/// Length of `{s ∈ [a, b] : ℓ(s) ≤ δ}` for `ℓ` linear from `la` to `lb`.
fn sublevel_length(a: f64, b: f64, la: f64, lb: f64, delta: f64) -> f64 {
    let len = b - a;
    match (la <= delta, lb <= delta) {
        (true, true) => len,
        (false, false) => 0.0,
        (true, false) => len * (delta - la) / (lb - la),
        (false, true) => len * (delta - lb) / (la - lb),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;

    fn traj(times: Vec<f64>, ell: Vec<f64>, status: DescentStatus) -> Trajectory {
        let n = times.len();
        Trajectory {
            start: vec![0.5],
            points: vec![vec![0.0]; n],
            h_values: vec![0.0; n],
            dist_values: vec![0.5; n],
            hit_time: (status == DescentStatus::Hit).then_some(times[n - 1]),
            times,
            ell_values: ell,
            status,
        }
    }

    fn unit_ell() -> ScalarField {
        let g = GridSpec::from_box(&[-1.0], &[1.0], 0.5).unwrap();
        ScalarField::constant(&g, 1.0).unwrap()
    }

    #[test]
    fn unit_speed_path_on_linear_cost() {
        // y(s) = 0.8 - s under ℓ = |x|: ℓ > 0.4 exactly on the first half.
        let times: Vec<f64> = (0..=16).map(|k| 0.05 * k as f64).collect();
        let ell: Vec<f64> = times.iter().map(|s| 0.8 - s).collect();
        let mut tr = traj(times, ell, DescentStatus::Hit);
        tr.dist_values[0] = 0.8;
        let stats = occupational_fraction(&tr, &unit_ell(), 0.4, 0.8).unwrap();
        assert!((stats.fraction - 0.5).abs() < 1e-12);
        assert!((stats.bound - 1.0 * 0.8 / (0.8 * 0.4)).abs() < 1e-12);
    }

    #[test]
    fn path_inside_sublevel_set_has_zero_fraction() {
        let tr = traj(
            vec![0.0, 1.0, 2.0],
            vec![0.1, 0.2, 0.0],
            DescentStatus::MaxTime,
        );
        let stats = occupational_fraction(&tr, &unit_ell(), 0.5, 2.0).unwrap();
        assert_eq!(stats.fraction, 0.0);
    }

    #[test]
    fn linear_crossing_is_resolved() {
        let tr = traj(vec![0.0, 1.0], vec![1.0, 0.0], DescentStatus::MaxTime);
        let stats = occupational_fraction(&tr, &unit_ell(), 0.25, 1.0).unwrap();
        assert!((stats.fraction - 0.75).abs() < 1e-12);
        let partial = occupational_fraction(&tr, &unit_ell(), 0.25, 0.5).unwrap();
        assert_eq!(partial.fraction, 1.0);
    }

    #[test]
    fn tail_after_hit_rests_on_target() {
        let tr = traj(vec![0.0, 1.0], vec![1.0, 1.0], DescentStatus::Hit);
        let stats = occupational_fraction(&tr, &unit_ell(), 0.5, 4.0).unwrap();
        assert!((stats.fraction - 0.25).abs() < 1e-12);
        let stalled = traj(vec![0.0, 1.0], vec![1.0, 1.0], DescentStatus::Stalled);
        assert!(occupational_fraction(&stalled, &unit_ell(), 0.5, 4.0).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        let tr = traj(vec![0.0, 1.0], vec![1.0, 1.0], DescentStatus::Hit);
        assert!(occupational_fraction(&tr, &unit_ell(), 0.0, 1.0).is_err());
        assert!(occupational_fraction(&tr, &unit_ell(), 0.5, 0.0).is_err());
    }
}
