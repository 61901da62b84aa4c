use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use super::config::{FieldRole, ObjectiveSpec, ResolvedSolver, RunConfig};
use crate::descent::{
    integrate_many, occupational_fraction, DescentConfig, DescentStatus, Trajectory,
};
use crate::error::{Error, Result};
use crate::field::io::{read_field_csv, write_field_csv};
use crate::field::{
    build_target_mask, sample, GridSpec, ObjectiveFunction, ScalarField, TargetMask,
};
use crate::hj::{
    build_ell, solve_discounted, solve_discounted_report, solve_eikonal_dirichlet_report,
    solve_evolutive, CriticalSolution, DiscountedSolveConfig, Method,
};
use crate::props::{self, CheckReport};

/// Every check the `check` command knows.
pub const CHECK_NAMES: &[&str] = &[
    "value_bounds",
    "gradient_bound",
    "semiconcavity",
    "v_upper_bound",
    "assumption_H",
    "rho_bound",
    "rho_lower_bound_excursion",
    "hitting_time_radial",
    "lojasiewicz_hitting",
    "monitored_h",
    "lyapunov",
    "asymptotic",
];

const DESCENT_CHECKS: &[&str] = &[
    "rho_bound",
    "rho_lower_bound_excursion",
    "hitting_time_radial",
    "lojasiewicz_hitting",
    "monitored_h",
    "lyapunov",
    "asymptotic",
];

/// `C` in the tolerance `C·(h + Δt)` on increases of the monitored quantity.
pub const MONITORED_H_FACTOR: f64 = 4.0;

/// Command-line overrides of the config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Objective, grid and solver with every default resolved.
pub struct Prepared {
    pub config: RunConfig,
    pub objective: ObjectiveFunction,
    pub grid: GridSpec,
    pub f: ScalarField,
    pub solver: ResolvedSolver,
    out_dir: PathBuf,
}

impl Prepared {
    pub fn new(mut config: RunConfig, overrides: &Overrides) -> Result<Self> {
        if let Some(seed) = overrides.seed {
            if let Some(d) = config.descent.as_mut() {
                d.seed = Some(seed);
            }
        }
        let objective = config.objective.resolve()?;
        let grid = config.grid.resolve(&objective)?;
        let f = sample(&objective, &grid)?;
        let solver = config.solver.resolve(&f)?;
        let out_dir = overrides
            .output
            .clone()
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok(Prepared {
            config,
            objective,
            grid,
            f,
            solver,
            out_dir,
        })
    }

    fn outputs(&self) -> Result<Outputs> {
        fs::create_dir_all(&self.out_dir)?;
        Ok(Outputs {
            dir: self.out_dir.clone(),
            run_id: self.config.run_id.clone(),
            written: Vec::new(),
        })
    }

    fn provenance(
        &self,
        command: &str,
        extra: serde_json::Value,
        outputs: &[String],
    ) -> serde_json::Value {
        let objective = match &self.config.objective {
            ObjectiveSpec::Named(name) => json!({ "name": name }),
            ObjectiveSpec::Inline(spec) => serde_json::to_value(spec).unwrap_or_default(),
        };
        json!({
            "command": command,
            "run_id": self.config.run_id,
            "version": env!("CARGO_PKG_VERSION"),
            "objective": objective,
            "grid": self.grid,
            "solver": self.solver,
            "target": self.config.target,
            "resolved": extra,
            "outputs": outputs,
        })
    }
}

/// Writes files named `<run_id>_<name>` and remembers them.
struct Outputs {
    dir: PathBuf,
    run_id: String,
    written: Vec<String>,
}

impl Outputs {
    fn path(&mut self, name: &str) -> PathBuf {
        let file = format!("{}_{name}", self.run_id);
        let path = self.dir.join(&file);
        self.written.push(file);
        path
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        write_json(&path, value)
    }

    fn field(&mut self, name: &str, field: &ScalarField) -> Result<()> {
        let path = self.path(name);
        write_field_csv(field, BufWriter::new(File::create(path)?))
    }

    fn provenance(
        &mut self,
        prepared: &Prepared,
        command: &str,
        extra: serde_json::Value,
    ) -> Result<()> {
        let name = format!("{command}_provenance.json");
        let file = format!("{}_{name}", self.run_id);
        let value = prepared.provenance(command, extra, &self.written);
        write_json(&self.dir.join(&file), &value)?;
        self.written.push(file);
        Ok(())
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Raw solver output together with the critical solution derived from it.
pub struct Solved {
    pub raw: ScalarField,
    pub raw_role: &'static str,
    pub critical: CriticalSolution,
    pub ell: ScalarField,
    pub mask: TargetMask,
}

pub fn run_solver(p: &Prepared) -> Result<Solved> {
    let eps = p.config.target.eps;
    let (raw, raw_role, critical) = match &p.solver {
        ResolvedSolver::Eikonal { c_hat, config } => {
            let ell = build_ell(&p.f, *c_hat)?;
            let mask = build_target_mask(&p.f, *c_hat, eps)?;
            let (v, report) = solve_eikonal_dirichlet_report(&ell, &mask, config)?;
            (
                v.clone(),
                "v",
                CriticalSolution::from_eikonal(v, *c_hat, report),
            )
        }
        ResolvedSolver::Discounted(cfg) => {
            let (u, report) = solve_discounted_report(&p.f, cfg)?;
            let critical = CriticalSolution::from_discounted(&u, cfg.lambda, report)?;
            (u, "u_lambda", critical)
        }
        ResolvedSolver::Evolutive(cfg) => {
            let (t, u) = solve_evolutive(&p.f, cfg)?
                .pop()
                .ok_or_else(|| Error::Config("evolutive solve returned no snapshot".into()))?;
            let steps = (t / cfg.resolved_dt(&p.f)).ceil() as usize;
            let critical = CriticalSolution::from_evolutive(&u, t, steps)?;
            (u, "u", critical)
        }
    };
    let ell = build_ell(&p.f, critical.c_hat)?;
    let mask = build_target_mask(&p.f, critical.c_hat, eps)?;
    Ok(Solved {
        raw,
        raw_role,
        critical,
        ell,
        mask,
    })
}

#[derive(Serialize)]
struct Sidecar<'a> {
    method: Method,
    c_hat: f64,
    residual: f64,
    iterations: usize,
    field: &'a str,
}

/// Solves and writes the raw field, the critical solution, the grid header,
/// a sidecar and provenance.
pub fn cmd_solve(config: RunConfig, overrides: &Overrides) -> Result<()> {
    let p = Prepared::new(config, overrides)?;
    let solved = run_solver(&p)?;
    let mut out = p.outputs()?;
    out.field("solution.csv", &solved.raw)?;
    out.json(
        "solution.json",
        &Sidecar {
            method: solved.critical.method,
            c_hat: solved.critical.c_hat,
            residual: solved.critical.residual,
            iterations: solved.critical.iterations,
            field: solved.raw_role,
        },
    )?;
    out.field("v.csv", &solved.critical.v)?;
    out.json("grid.json", &p.grid)?;
    out.provenance(&p, "solve", json!({}))?;
    Ok(())
}

/// Descent settings and start points after defaults and the RNG.
#[derive(Clone, Debug, Serialize)]
pub struct ResolvedDescent {
    pub config: DescentConfig,
    pub starts: Vec<Vec<f64>>,
    pub seed: Option<u64>,
    pub deltas: Vec<f64>,
    pub horizons: Vec<f64>,
}

pub fn resolve_descent(p: &Prepared) -> Result<ResolvedDescent> {
    let section = p
        .config
        .descent
        .clone()
        .ok_or_else(|| Error::Config("this command needs a \"descent\" section".into()))?;
    let mut cfg = DescentConfig::for_grid(&p.grid);
    if let Some(s) = section.step {
        cfg.step = s;
    }
    if let Some(t) = section.max_time {
        cfg.max_time = t;
    }
    if let Some(d) = section.stop_dist {
        cfg.stop_dist = d;
    }
    cfg.validate(p.grid.spacing)?;
    let mut starts = section.starts.clone();
    if section.random_starts > 0 {
        let seed = section.seed.ok_or_else(|| {
            Error::Config("random_starts requires a seed (config or --seed)".into())
        })?;
        starts.extend(random_starts(&p.grid, section.random_starts, seed));
    }
    if starts.is_empty() {
        return Err(Error::Config(
            "descent needs starts or random_starts".into(),
        ));
    }
    for s in &starts {
        if s.len() != p.grid.dim {
            return Err(Error::Config(format!(
                "start {s:?} does not have dimension {}",
                p.grid.dim
            )));
        }
    }
    if section.deltas.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::Config("descent deltas must be positive".into()));
    }
    Ok(ResolvedDescent {
        config: cfg,
        starts,
        seed: section.seed,
        deltas: section.deltas,
        horizons: section.horizons,
    })
}

/// `count` points drawn uniformly over the grid box from a ChaCha8 stream.
pub fn random_starts(grid: &GridSpec, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (0..grid.dim)
                .map(|k| rng.random_range(grid.lower(k)..=grid.upper(k)))
                .collect()
        })
        .collect()
}

fn descend(solved: &Solved, d: &ResolvedDescent) -> Result<Vec<Trajectory>> {
    integrate_many(
        &solved.critical.v,
        &solved.ell,
        &solved.mask,
        &d.starts,
        &d.config,
    )
}

fn horizons_for(traj: &Trajectory, requested: &[f64]) -> Vec<f64> {
    let last = traj.final_time();
    if requested.is_empty() {
        if last <= 0.0 {
            return Vec::new();
        }
        return (1..=4).map(|k| last * k as f64 / 4.0).collect();
    }
    requested
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && (t <= last || traj.status == DescentStatus::Hit))
        .collect()
}

/// Runs the descents and writes one CSV per trajectory, a summary and
/// provenance.
pub fn cmd_descend(config: RunConfig, overrides: &Overrides) -> Result<()> {
    let p = Prepared::new(config, overrides)?;
    let d = resolve_descent(&p)?;
    let solved = run_solver(&p)?;
    let trajs = descend(&solved, &d)?;
    let mut out = p.outputs()?;
    for (k, traj) in trajs.iter().enumerate() {
        let path = out.path(&format!("traj_{k:03}.csv"));
        traj.write_csv(BufWriter::new(File::create(path)?))?;
    }

    let runs: Vec<serde_json::Value> = trajs
        .iter()
        .enumerate()
        .map(|(k, t)| {
            json!({
                "index": k,
                "start": t.start,
                "status": t.status,
                "hit_time": t.hit_time,
                "final_time": t.final_time(),
                "final_distance": t.final_distance(),
            })
        })
        .collect();
    let hits: Vec<f64> = trajs.iter().filter_map(|t| t.hit_time).collect();
    let stats = (!hits.is_empty()).then(|| {
        json!({
            "min": hits.iter().copied().fold(f64::INFINITY, f64::min),
            "max": hits.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            "mean": hits.iter().sum::<f64>() / hits.len() as f64,
        })
    });
    let mut status_counts = serde_json::Map::new();
    for status in ["hit", "stalled", "maxtime", "boundary"] {
        let n = trajs
            .iter()
            .filter(|t| serde_json::to_value(t.status).ok() == Some(json!(status)))
            .count();
        status_counts.insert(status.to_string(), json!(n));
    }
    let mut tables = Vec::new();
    for &delta in &d.deltas {
        let mut rows = Vec::new();
        for (k, traj) in trajs.iter().enumerate() {
            for t in horizons_for(traj, &d.horizons) {
                let s = occupational_fraction(traj, &solved.ell, delta, t)?;
                rows.push(json!({
                    "run": k,
                    "t": t,
                    "fraction": s.fraction,
                    "bound": s.bound,
                }));
            }
        }
        tables.push(json!({ "delta": delta, "rows": rows }));
    }
    let summary = json!({
        "method": solved.critical.method,
        "c_hat": solved.critical.c_hat,
        "total": trajs.len(),
        "hits": hits.len(),
        "hit_rate": hits.len() as f64 / trajs.len() as f64,
        "statuses": status_counts,
        "hitting_time_stats": stats,
        "runs": runs,
        "rho_tables": tables,
    });
    out.json("summary.json", &summary)?;
    out.provenance(&p, "descend", json!({ "descent": d }))?;
    Ok(())
}

/// Runs the requested checks, writes the report array and returns it.
pub fn cmd_check(config: RunConfig, overrides: &Overrides) -> Result<Vec<CheckReport>> {
    let p = Prepared::new(config, overrides)?;
    for name in &p.config.checks {
        if !CHECK_NAMES.contains(&name.as_str()) {
            return Err(Error::Config(format!(
                "unknown check \"{name}\"; known: {}",
                CHECK_NAMES.join(", ")
            )));
        }
    }
    let needs_descent = p
        .config
        .checks
        .iter()
        .any(|c| DESCENT_CHECKS.contains(&c.as_str()));
    let descent = if needs_descent {
        Some(resolve_descent(&p)?)
    } else {
        None
    };
    let mut reports = Vec::new();
    if !p.config.checks.is_empty() {
        let solved = run_solver(&p)?;
        let ctx = CheckContext::new(&p, &solved, descent.as_ref())?;
        for name in &p.config.checks {
            reports.push(ctx.run(name)?);
        }
    }
    let mut out = p.outputs()?;
    out.json("checks.json", &reports)?;
    out.provenance(
        &p,
        "check",
        json!({ "checks": p.config.checks, "options": p.config.check_options, "descent": descent }),
    )?;
    Ok(reports)
}

struct CheckContext<'a> {
    p: &'a Prepared,
    solved: &'a Solved,
    u_lambda: Option<(ScalarField, f64)>,
    v: ScalarField,
    descent: Option<(&'a ResolvedDescent, Vec<Trajectory>)>,
}

impl<'a> CheckContext<'a> {
    fn new(
        p: &'a Prepared,
        solved: &'a Solved,
        descent: Option<&'a ResolvedDescent>,
    ) -> Result<Self> {
        let opts = &p.config.check_options;
        let wants_u = p.config.checks.iter().any(|c| {
            matches!(
                c.as_str(),
                "value_bounds" | "gradient_bound" | "semiconcavity"
            )
        });
        let replacement = match &opts.input_field {
            Some(input) => Some((input.replaces, read_input_field(&p.grid, &input.path)?)),
            None => None,
        };
        let mut u_lambda = None;
        if wants_u {
            u_lambda = Some(match (&p.solver, &replacement) {
                (ResolvedSolver::Discounted(cfg), _) => (solved.raw.clone(), cfg.lambda),
                _ => {
                    let cfg = DiscountedSolveConfig::for_field(&p.f, opts.lambda);
                    (solve_discounted(&p.f, &cfg)?, opts.lambda)
                }
            });
        }
        let mut v = solved.critical.v.clone();
        if let Some((role, field)) = replacement {
            match role {
                FieldRole::ULambda => {
                    if let Some(u) = u_lambda.as_mut() {
                        u.0 = field;
                    }
                }
                FieldRole::V => v = field,
            }
        }
        let descent = match descent {
            Some(d) => Some((d, descend(solved, d)?)),
            None => None,
        };
        Ok(CheckContext {
            p,
            solved,
            u_lambda,
            v,
            descent,
        })
    }

    fn constants(&self) -> Result<(f64, f64)> {
        match (
            self.p.objective.lipschitz_c1,
            self.p.objective.semiconcave_c2,
        ) {
            (Some(c1), Some(c2)) => Ok((c1, c2)),
            _ => Err(Error::Config(
                "semiconcavity needs lipschitz_c1 and semiconcave_c2 for this objective".into(),
            )),
        }
    }

    fn trajectories(&self) -> (&ResolvedDescent, &[Trajectory]) {
        let (d, t) = self
            .descent
            .as_ref()
            .expect("descent resolved for descent checks");
        (d, t)
    }

    fn run(&self, name: &str) -> Result<CheckReport> {
        let opts = &self.p.config.check_options;
        let f = &self.p.f;
        let ell = &self.solved.ell;
        let mask = &self.solved.mask;
        let u = || self.u_lambda.as_ref().expect("discounted field prepared");
        Ok(match name {
            "value_bounds" => props::check_value_bounds(f, &u().0, u().1)?,
            "gradient_bound" => props::check_gradient_bound(&u().0, f)?,
            "semiconcavity" => {
                let (c1, c2) = self.constants()?;
                props::check_semiconcavity(&u().0, c1, c2)?
            }
            "v_upper_bound" => props::check_v_upper_bound(&self.v, ell, mask)?,
            "assumption_H" => props::check_assumption_h(ell, mask, &opts.deltas, opts.h_floor)?,
            "rho_bound" => {
                let (d, trajs) = self.trajectories();
                let mut all = Vec::new();
                for traj in trajs {
                    for &delta in &d.deltas {
                        for &t in traj.times.iter().filter(|&&t| t > 0.0) {
                            let stats = occupational_fraction(traj, ell, delta, t)?;
                            let mut r = props::check_rho_bound(&stats);
                            r.worst_location = Some(traj.start.clone());
                            all.push(r);
                        }
                    }
                }
                CheckReport::worst(name, all)
            }
            "rho_lower_bound_excursion" => {
                let (_, trajs) = self.trajectories();
                let mut all = Vec::new();
                for traj in trajs {
                    for &delta in &opts.deltas {
                        all.push(props::check_rho_lower_bound_excursion(
                            traj, ell, mask, delta,
                        )?);
                    }
                }
                CheckReport::worst(name, all)
            }
            "hitting_time_radial" => {
                let r = opts.radial_radius.ok_or_else(|| {
                    Error::Config("hitting_time_radial needs check_options.radial_radius".into())
                })?;
                let (_, trajs) = self.trajectories();
                let mut all = Vec::new();
                for traj in trajs {
                    let d0 = traj.dist_values[0];
                    if d0 > r {
                        continue;
                    }
                    let profile = radial_profile(ell, mask, &traj.start);
                    all.push(props::check_hitting_time_radial(traj, profile, d0, r)?);
                }
                CheckReport::worst(name, all)
            }
            "lojasiewicz_hitting" => {
                let lb = opts.lojasiewicz.ok_or_else(|| {
                    Error::Config("lojasiewicz_hitting needs check_options.lojasiewicz".into())
                })?;
                let (_, trajs) = self.trajectories();
                let mut all = Vec::new();
                for traj in trajs {
                    all.push(props::check_lojasiewicz_hitting(
                        traj,
                        &self.v,
                        lb.c,
                        lb.beta,
                        traj.dist_values[0],
                    )?);
                }
                CheckReport::worst(name, all)
            }
            "monitored_h" => {
                let (d, trajs) = self.trajectories();
                let tol = MONITORED_H_FACTOR * (self.p.grid.spacing + d.config.step);
                let all = trajs
                    .iter()
                    .map(|t| props::check_monitored_h(t, tol))
                    .collect();
                CheckReport::worst(name, all)
            }
            "lyapunov" => {
                let (_, trajs) = self.trajectories();
                let eps = opts.lyapunov_eps;
                match props::lyapunov_radius(ell, mask, eps) {
                    Some(eta) => props::check_lyapunov(trajs, eps, eta, self.p.grid.spacing),
                    None => CheckReport::vacuous(name, "no nodes beyond eps/2"),
                }
            }
            "asymptotic" => {
                let (d, trajs) = self.trajectories();
                let band = 2.0 * d.config.stop_dist;
                let mut all = Vec::new();
                for traj in trajs {
                    let margin = if traj.status == DescentStatus::Hit {
                        band - traj.final_distance()
                    } else {
                        f64::NEG_INFINITY
                    };
                    all.push(CheckReport::new(
                        name,
                        margin,
                        0.0,
                        Some(traj.start.clone()),
                        format!(
                            "status {:?}, final distance {}",
                            traj.status,
                            traj.final_distance()
                        ),
                    ));
                }
                CheckReport::worst(name, all)
            }
            other => return Err(Error::Config(format!("unknown check \"{other}\""))),
        })
    }
}

fn read_input_field(grid: &GridSpec, path: &Path) -> Result<ScalarField> {
    let file = File::open(path)
        .map_err(|e| Error::Config(format!("cannot open input field {}: {e}", path.display())))?;
    read_field_csv(grid, file)
}

/// Running cost along the ray from the nearest target node through `x0`,
/// as a function of distance.
fn radial_profile<'a>(
    ell: &'a ScalarField,
    mask: &TargetMask,
    x0: &[f64],
) -> impl Fn(f64) -> f64 + 'a {
    let grid = ell.grid();
    let dim = grid.dim;
    let nearest = mask
        .indices()
        .into_iter()
        .map(|i| grid.node(i))
        .min_by(|a, b| dist(a, x0).total_cmp(&dist(b, x0)))
        .expect("masks are nonempty");
    let len = dist(&nearest, x0);
    let dir: Vec<f64> = if len > 0.0 {
        (0..dim).map(|k| (x0[k] - nearest[k]) / len).collect()
    } else {
        vec![0.0; dim]
    };
    move |s: f64| {
        let p: Vec<f64> = (0..dim).map(|k| nearest[k] + s * dir[k]).collect();
        ell.interpolate_clamped(&p)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[derive(Serialize)]
struct CorpusRow {
    name: String,
    dim: usize,
    domain: Vec<(f64, f64)>,
    known_min: Option<f64>,
    lipschitz_c1: Option<f64>,
    semiconcave_c2: Option<f64>,
    positive_away_from_argmin: bool,
    description: String,
}

/// Corpus listing as a text table, or JSON lines when `json` is set.
pub fn cmd_corpus_list(filter: Option<&str>, json: bool) -> String {
    let rows: Vec<CorpusRow> = crate::field::corpus::list_corpus(filter)
        .into_iter()
        .map(|o| CorpusRow {
            name: o.name,
            dim: o.dim,
            domain: o.domain,
            known_min: o.known_min,
            lipschitz_c1: o.lipschitz_c1,
            semiconcave_c2: o.semiconcave_c2,
            positive_away_from_argmin: o.positive_away_from_argmin,
            description: o.description,
        })
        .collect();
    if json {
        return serde_json::to_string_pretty(&rows).unwrap_or_default() + "\n";
    }
    let mut s = String::new();
    for r in rows {
        let domain: Vec<String> = r
            .domain
            .iter()
            .map(|(a, b)| format!("[{a}, {b}]"))
            .collect();
        s += &format!(
            "{:<18} {}D  {:<22} {}\n",
            r.name,
            r.dim,
            domain.join("x"),
            r.description
        );
    }
    s
}

/// Fixed-width table of check reports.
pub fn format_reports(reports: &[CheckReport]) -> String {
    let mut s = format!(
        "{:<28} {:<6} {:>14} {:>12}  {}\n",
        "check", "result", "margin", "tolerance", "details"
    );
    for r in reports {
        s += &format!(
            "{:<28} {:<6} {:>14.6e} {:>12.3e}  {}\n",
            r.name,
            if r.passed { "pass" } else { "FAIL" },
            r.margin,
            r.tolerance,
            r.details
        );
    }
    s
}
