//! Stored closed-form oracles replayed against the solvers.

use std::path::PathBuf;

use hjdescent::descent::{integrate_descent, DescentConfig};
use hjdescent::field::{
    build_target_mask, find_objective, sample, GridSpec, ScalarField, TargetMask,
};
use hjdescent::hj::{
    build_ell, solve_discounted, solve_eikonal_dirichlet, DiscountedSolveConfig, EikonalSolveConfig,
};
use serde::Deserialize;
use serde_json::Value;

#[derive(Deserialize)]
struct Fixture {
    input: Value,
    config: Value,
    oracle: Value,
    tolerance: Value,
}

fn load(name: &str) -> Fixture {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name);
    serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

fn solve_field(fx: &Fixture) -> ScalarField {
    let obj = find_objective(fx.input["objective"].as_str().unwrap()).unwrap();
    let h = fx.input["spacing"].as_f64().unwrap();
    let f = sample(
        &obj,
        &GridSpec::from_box(&obj.lower(), &obj.upper(), h).unwrap(),
    )
    .unwrap();
    match fx.config["solver"].as_str().unwrap() {
        "eikonal" => {
            let c = f.min();
            let eps = fx.config["eps_target"].as_f64().unwrap();
            let mask = build_target_mask(&f, c, eps).unwrap();
            let ell = build_ell(&f, c).unwrap();
            solve_eikonal_dirichlet(&ell, &mask, &EikonalSolveConfig::default()).unwrap()
        }
        "discounted" => {
            let lambda = fx.config["lambda"].as_f64().unwrap();
            solve_discounted(&f, &DiscountedSolveConfig::for_field(&f, lambda)).unwrap()
        }
        other => panic!("unknown solver {other}"),
    }
}

fn replay_field(name: &str) {
    let fx = load(name);
    let field = solve_field(&fx);
    let nodes = floats(&fx.oracle["nodes"]);
    let expected = floats(&fx.oracle["v"]);
    let tol = fx.tolerance["sup"].as_f64().unwrap();
    assert_eq!(nodes.len(), field.grid().len());
    for ((x, want), k) in nodes.iter().zip(&expected).zip(0..) {
        assert!((field.grid().node(k)[0] - x).abs() < 1e-12);
        let got = field.values()[k];
        assert!(
            (got - want).abs() <= tol,
            "{name}: at x = {x}, got {got}, want {want}"
        );
    }
}

#[test]
fn quadratic_eikonal_fixture() {
    replay_field("quadratic_eikonal.json");
}

#[test]
fn double_well_eikonal_fixture() {
    replay_field("double_well_eikonal.json");
}

#[test]
fn constant_discounted_fixture() {
    replay_field("constant_discounted.json");
}

#[test]
fn radial_hitting_fixture() {
    let fx = load("radial_hitting.json");
    let power = fx.input["profile_power"].as_f64().unwrap();
    let bounds = floats(&fx.input["domain"]);
    let h = fx.input["spacing"].as_f64().unwrap();
    let g = GridSpec::from_box(&bounds[..1], &bounds[1..], h).unwrap();
    let ell = ScalarField::from_fn(&g, |x| x[0].abs().powf(power)).unwrap();
    let mask = TargetMask::from_indices(&g, &[g.nearest_node(&[0.0])]).unwrap();
    let v = solve_eikonal_dirichlet(&ell, &mask, &EikonalSolveConfig::default()).unwrap();
    let cfg = DescentConfig::for_grid(&g);
    let rel = fx.tolerance["relative"].as_f64().unwrap();
    for (x0, want) in floats(&fx.config["starts"])
        .into_iter()
        .zip(floats(&fx.oracle["hit_times"]))
    {
        let traj = integrate_descent(&v, &ell, &mask, &[x0], &cfg).unwrap();
        let hit = traj.hit_time.expect("descent hits");
        assert!(
            (hit - want).abs() <= rel * want,
            "start {x0}: hit {hit}, want {want}"
        );
    }
}
