//! JSON run configuration. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{find_objective, GridSpec, ObjectiveFunction, ScalarField};
use crate::hj::{DiscountedSolveConfig, EikonalSolveConfig, EvolutiveSolveConfig};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Prefix of every output file.
    #[serde(default = "default_run_id")]
    pub run_id: String,
    pub objective: ObjectiveSpec,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub target: TargetConfig,
    #[serde(default)]
    pub descent: Option<DescentSection>,
    #[serde(default)]
    pub checks: Vec<String>,
    #[serde(default)]
    pub check_options: CheckOptions,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_run_id() -> String {
    "run".to_string()
}

/// A corpus name or an inline expression in `x` (and `y`).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObjectiveSpec {
    Named(String),
    Inline(InlineObjective),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineObjective {
    pub expr: String,
    pub dim: usize,
    pub domain: Vec<(f64, f64)>,
    #[serde(default)]
    pub lipschitz_c1: Option<f64>,
    #[serde(default)]
    pub semiconcave_c2: Option<f64>,
}

impl ObjectiveSpec {
    pub fn resolve(&self) -> Result<ObjectiveFunction> {
        match self {
            ObjectiveSpec::Named(name) => find_objective(name),
            ObjectiveSpec::Inline(spec) => {
                let mut obj =
                    ObjectiveFunction::from_expression(&spec.expr, spec.dim, spec.domain.clone())?;
                obj.lipschitz_c1 = spec.lipschitz_c1;
                obj.semiconcave_c2 = spec.semiconcave_c2;
                Ok(obj)
            }
        }
    }
}

/// Either a full grid or a spacing over the objective's default box.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridConfig {
    Full(GridSpec),
    Spacing(SpacingOnly),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacingOnly {
    pub spacing: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig::Spacing(SpacingOnly {
            spacing: 1.0 / 64.0,
        })
    }
}

impl GridConfig {
    pub fn resolve(&self, obj: &ObjectiveFunction) -> Result<GridSpec> {
        let grid = match self {
            GridConfig::Full(spec) => {
                spec.validate()?;
                spec.clone()
            }
            GridConfig::Spacing(s) => GridSpec::from_box(&obj.lower(), &obj.upper(), s.spacing)?,
        };
        if grid.dim != obj.dim {
            return Err(Error::Config(format!(
                "grid has dimension {} but the objective has {}",
                grid.dim, obj.dim
            )));
        }
        Ok(grid)
    }
}

/// Solver choice; `method` selects the variant.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase", deny_unknown_fields)]
pub enum SolverConfig {
    Eikonal {
        #[serde(default)]
        c_hat: CHatSource,
        #[serde(default = "default_sweep_tol")]
        sweep_tol: f64,
        #[serde(default = "default_max_sweeps")]
        max_sweeps: usize,
    },
    Discounted {
        lambda: f64,
        #[serde(default)]
        pseudo_time_step: Option<f64>,
        #[serde(default)]
        control_magnitude_cap: Option<f64>,
        #[serde(default)]
        direction_count: Option<usize>,
        #[serde(default)]
        magnitude_count: Option<usize>,
        #[serde(default)]
        tol: Option<f64>,
        #[serde(default)]
        max_iters: Option<usize>,
    },
    Evolutive {
        t_final: f64,
        #[serde(default)]
        dt: Option<f64>,
        #[serde(default)]
        cfl: Option<f64>,
        #[serde(default)]
        gradient_cap: Option<f64>,
    },
}

fn default_sweep_tol() -> f64 {
    EikonalSolveConfig::default().sweep_tol
}

fn default_max_sweeps() -> usize {
    EikonalSolveConfig::default().max_sweeps
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::Eikonal {
            c_hat: CHatSource::default(),
            sweep_tol: default_sweep_tol(),
            max_sweeps: default_max_sweeps(),
        }
    }
}

/// Where the eikonal route takes the critical value from: `"grid_min"` or
/// a number.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CHatSource {
    Named(CHatRule),
    Value(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CHatRule {
    GridMin,
}

impl Default for CHatSource {
    fn default() -> Self {
        CHatSource::Named(CHatRule::GridMin)
    }
}

/// A solver configuration with every default filled in.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum ResolvedSolver {
    Eikonal {
        c_hat: f64,
        #[serde(flatten)]
        config: EikonalSolveConfig,
    },
    Discounted(DiscountedSolveConfig),
    Evolutive(EvolutiveSolveConfig),
}

impl SolverConfig {
    pub fn resolve(&self, f: &ScalarField) -> Result<ResolvedSolver> {
        Ok(match self {
            SolverConfig::Eikonal {
                c_hat,
                sweep_tol,
                max_sweeps,
            } => ResolvedSolver::Eikonal {
                c_hat: match c_hat {
                    CHatSource::Named(CHatRule::GridMin) => f.min(),
                    CHatSource::Value(c) => *c,
                },
                config: EikonalSolveConfig {
                    sweep_tol: *sweep_tol,
                    max_sweeps: *max_sweeps,
                },
            },
            SolverConfig::Discounted {
                lambda,
                pseudo_time_step,
                control_magnitude_cap,
                direction_count,
                magnitude_count,
                tol,
                max_iters,
            } => {
                let mut cfg = DiscountedSolveConfig::for_field(f, *lambda);
                if let Some(v) = pseudo_time_step {
                    cfg.pseudo_time_step = *v;
                }
                if let Some(v) = control_magnitude_cap {
                    cfg.control_magnitude_cap = *v;
                }
                if let Some(v) = direction_count {
                    cfg.direction_count = *v;
                }
                if let Some(v) = magnitude_count {
                    cfg.magnitude_count = *v;
                }
                if let Some(v) = tol {
                    cfg.tol = *v;
                }
                if let Some(v) = max_iters {
                    cfg.max_iters = *v;
                }
                cfg.validate(f)?;
                ResolvedSolver::Discounted(cfg)
            }
            SolverConfig::Evolutive {
                t_final,
                dt,
                cfl,
                gradient_cap,
            } => {
                let mut cfg = EvolutiveSolveConfig::new(*t_final, Vec::new());
                cfg.gradient_cap = Some(gradient_cap.unwrap_or_else(|| cfg.gradient_cap_for(f)));
                if let Some(c) = cfl {
                    cfg.cfl = *c;
                }
                cfg.dt = Some(dt.unwrap_or_else(|| cfg.max_stable_dt(f)));
                cfg.validate(f)?;
                ResolvedSolver::Evolutive(cfg)
            }
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    /// Nodes with `f ≤ ĉ + eps` form the target.
    pub eps: f64,
}

impl Default for TargetConfig {
    fn default() -> Self {
        TargetConfig { eps: 1e-12 }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescentSection {
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default)]
    pub max_time: Option<f64>,
    #[serde(default)]
    pub stop_dist: Option<f64>,
    #[serde(default)]
    pub starts: Vec<Vec<f64>>,
    /// Extra starts drawn uniformly over the box.
    #[serde(default)]
    pub random_starts: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Levels `δ` of the occupational tables.
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    /// Horizons of the occupational tables; quarters of each run when empty.
    #[serde(default)]
    pub horizons: Vec<f64>,
}

fn default_deltas() -> Vec<f64> {
    vec![0.1, 0.3]
}

/// Parameters of the checks that need more than the fields.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckOptions {
    /// Discount of the field the value, gradient and semiconcavity checks inspect.
    #[serde(default = "default_check_lambda")]
    pub lambda: f64,
    /// Levels `δ` for the positivity hypothesis and the excursion check.
    #[serde(default = "default_check_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "default_h_floor")]
    pub h_floor: f64,
    /// Radius within which the running cost is radial.
    #[serde(default)]
    pub radial_radius: Option<f64>,
    #[serde(default)]
    pub lojasiewicz: Option<PowerLowerBound>,
    /// Lyapunov probe radius `ε`.
    #[serde(default = "default_lyapunov_eps")]
    pub lyapunov_eps: f64,
    /// Replaces a computed field with one read from disk.
    #[serde(default)]
    pub input_field: Option<InputField>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            lambda: default_check_lambda(),
            deltas: default_check_deltas(),
            h_floor: default_h_floor(),
            radial_radius: None,
            lojasiewicz: None,
            lyapunov_eps: default_lyapunov_eps(),
            input_field: None,
        }
    }
}

fn default_check_lambda() -> f64 {
    0.1
}

fn default_check_deltas() -> Vec<f64> {
    vec![0.25, 0.5]
}

fn default_h_floor() -> f64 {
    crate::props::H_FLOOR
}

fn default_lyapunov_eps() -> f64 {
    0.25
}

/// `ℓ ≥ c · dist^β` near the target.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerLowerBound {
    pub c: f64,
    pub beta: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputField {
    /// Field CSV on the run grid.
    pub path: PathBuf,
    pub replaces: FieldRole,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldRole {
    /// The discounted solution seen by the value, gradient and
    /// semiconcavity checks.
    ULambda,
    /// The critical solution seen by the upper-bound check.
    V,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = RunConfig::from_json(r#"{"objective": "quadratic"}"#).unwrap();
        assert_eq!(cfg.run_id, "run");
        assert!(matches!(
            cfg.solver,
            SolverConfig::Eikonal {
                c_hat: CHatSource::Named(CHatRule::GridMin),
                ..
            }
        ));
        assert!(cfg.checks.is_empty());
    }

    #[test]
    fn solver_variants_parse() {
        let cfg = RunConfig::from_json(
            r#"{"objective": "constant", "solver": {"method": "discounted", "lambda": 0.5}}"#,
        )
        .unwrap();
        assert!(matches!(cfg.solver, SolverConfig::Discounted { lambda, .. } if lambda == 0.5));
        let cfg = RunConfig::from_json(
            r#"{"objective": "constant", "solver": {"method": "eikonal", "c_hat": 3.0}}"#,
        )
        .unwrap();
        assert!(
            matches!(cfg.solver, SolverConfig::Eikonal { c_hat: CHatSource::Value(c), .. } if c == 3.0)
        );
        let cfg = RunConfig::from_json(
            r#"{"objective": {"expr": "x^2", "dim": 1, "domain": [[-1, 1]]},
                "grid": {"dim": 1, "origin": [-1.0], "spacing": 0.25, "counts": [9]},
                "solver": {"method": "evolutive", "t_final": 2.0}}"#,
        )
        .unwrap();
        assert!(matches!(cfg.grid, GridConfig::Full(_)));
        assert!(matches!(cfg.objective, ObjectiveSpec::Inline(_)));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for bad in [
            r#"{"objective": "quadratic", "colour": 1}"#,
            r#"{"objective": "quadratic", "solver": {"method": "eikonal", "lamda": 1}}"#,
            r#"{"objective": "quadratic", "solver": {"method": "discounted", "lambda": 0.1, "x": 1}}"#,
            r#"{"objective": "quadratic", "descent": {"stepsize": 0.1}}"#,
            r#"{"objective": "quadratic", "grid": {"spacing": 0.1, "extra": 2}}"#,
            r#"{"objective": "quadratic", "solver": {"method": "eikonal", "c_hat": "grid_max"}}"#,
            r#"{"objective": "quadratic", "solver": {"method": "newton"}}"#,
        ] {
            assert!(
                matches!(RunConfig::from_json(bad), Err(Error::Config(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn resolution_fills_defaults_and_validates() {
        let obj = find_objective("double_well").unwrap();
        let grid = GridConfig::Spacing(SpacingOnly { spacing: 0.125 })
            .resolve(&obj)
            .unwrap();
        assert_eq!(grid.counts, vec![33]);
        let f = crate::field::sample(&obj, &grid).unwrap();
        let solver = SolverConfig::Evolutive {
            t_final: 1.0,
            dt: None,
            cfl: None,
            gradient_cap: None,
        };
        match solver.resolve(&f).unwrap() {
            ResolvedSolver::Evolutive(cfg) => assert!(cfg.dt.unwrap() > 0.0),
            other => panic!("unexpected {other:?}"),
        }
        let too_big = SolverConfig::Discounted {
            lambda: 100.0,
            pseudo_time_step: None,
            control_magnitude_cap: None,
            direction_count: None,
            magnitude_count: None,
            tol: None,
            max_iters: None,
        };
        assert!(matches!(too_big.resolve(&f), Err(Error::Config(_))));
        let flat = find_objective("quadratic_2d").unwrap();
        assert!(GridConfig::Full(grid).resolve(&flat).is_err());
    }
}
