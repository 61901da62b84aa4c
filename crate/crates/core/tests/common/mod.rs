#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use hjdescent::field::ObjectiveFunction;
use hjdescent::field::{build_target_mask, sample, GridSpec, ScalarField, TargetMask};
use hjdescent::hj::{build_ell, solve_eikonal_dirichlet, EikonalSolveConfig};

/// Prints the one-line verdict and fails the test when `passed` is false.
pub fn verdict(id: u32, name: &str, passed: bool, details: &str) {
    let tag = if passed { "PASS" } else { "FAIL" };
    println!("criterion {id:>2} [{name}]: {tag} {details}");
    assert!(passed, "criterion {id} ({name}) failed: {details}");
}

pub fn grid_for(obj: &ObjectiveFunction, h: f64) -> GridSpec {
    GridSpec::from_box(&obj.lower(), &obj.upper(), h).unwrap()
}

pub struct Eikonal {
    pub f: ScalarField,
    pub ell: ScalarField,
    pub mask: TargetMask,
    pub v: ScalarField,
}

/// Eikonal critical solution with `ĉ` = grid minimum and the given target
/// tolerance.
pub fn eikonal(obj: &ObjectiveFunction, h: f64, eps: f64) -> Eikonal {
    let f = sample(obj, &grid_for(obj, h)).unwrap();
    let c = f.min();
    let ell = build_ell(&f, c).unwrap();
    let mask = build_target_mask(&f, c, eps).unwrap();
    let v = solve_eikonal_dirichlet(&ell, &mask, &EikonalSolveConfig::default()).unwrap();
    Eikonal { f, ell, mask, v }
}

pub fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_hjdescent")
}

pub fn run_cli(args: &[&str], config: Option<&Path>, out: Option<&Path>) -> Output {
    let mut cmd = Command::new(binary());
    cmd.args(args);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    if let Some(o) = out {
        cmd.arg("--output").arg(o);
    }
    cmd.output().expect("binary runs")
}

/// Sorted `(file name, bytes)` of every file in `dir`.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}
