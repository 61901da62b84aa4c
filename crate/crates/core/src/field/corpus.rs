//! Closed-form objectives with their metadata.
//!
//! Lipschitz and semiconcavity constants are the sup of `|∇f|` and of the
//! largest Hessian eigenvalue over the entry's default box.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use evalexpr::{
    build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node,
    Value,
};

use crate::error::{Error, Result};

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A bounded objective `f` together with what is known about it.
#[derive(Clone)]
pub struct ObjectiveFunction {
    evaluator: Evaluator,
    pub name: String,
    pub dim: usize,
    /// Default computational box, one `(lower, upper)` pair per axis.
    pub domain: Vec<(f64, f64)>,
    pub known_min: Option<f64>,
    pub known_argmin: Vec<Vec<f64>>,
    pub lipschitz_c1: Option<f64>,
    pub semiconcave_c2: Option<f64>,
    /// Whether `ℓ = sqrt(2(f - min f))` stays bounded away from zero away
    /// from the argmin on the default box.
    pub positive_away_from_argmin: bool,
    pub description: String,
}

impl fmt::Debug for ObjectiveFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveFunction")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("known_min", &self.known_min)
            .finish_non_exhaustive()
    }
}

impl ObjectiveFunction {
    /// Objective from a closure, with no metadata beyond its box.
    pub fn from_fn(
        name: &str,
        dim: usize,
        domain: Vec<(f64, f64)>,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ObjectiveFunction {
            evaluator: Arc::new(f),
            name: name.to_string(),
            dim,
            domain,
            known_min: None,
            known_argmin: Vec::new(),
            lipschitz_c1: None,
            semiconcave_c2: None,
            positive_away_from_argmin: true,
            description: String::new(),
        }
    }

    /// Objective parsed from an arithmetic expression in `x` (and `y` in 2D),
    /// e.g. `"(x^2 - 1)^2 + y^2"` or `"0.5 * x^2 * math::exp(-2 * x^2)"`.
    pub fn from_expression(expr: &str, dim: usize, domain: Vec<(f64, f64)>) -> Result<Self> {
        if dim == 0 || dim > 2 || domain.len() != dim {
            return Err(Error::Config(
                "expression objective needs dim 1 or 2 with one box interval per axis".into(),
            ));
        }
        let tree: Node<DefaultNumericTypes> =
            build_operator_tree(expr).map_err(|e| Error::Expression(e.to_string()))?;
        // Fail early on unknown identifiers.
        let probe: Vec<f64> = domain.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
        eval_tree(&tree, &probe)?;
        let evaluator = move |x: &[f64]| eval_tree(&tree, x).unwrap_or(f64::NAN);
        let mut obj = ObjectiveFunction::from_fn(expr, dim, domain, evaluator);
        obj.description = format!("inline expression {expr}");
        Ok(obj)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.evaluator)(x)
    }

    pub fn lower(&self) -> Vec<f64> {
        self.domain.iter().map(|d| d.0).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.domain.iter().map(|d| d.1).collect()
    }

    fn with_meta(
        mut self,
        min: f64,
        argmin: Vec<Vec<f64>>,
        c1: f64,
        c2: f64,
        description: &str,
    ) -> Self {
        self.known_min = Some(min);
        self.known_argmin = argmin;
        self.lipschitz_c1 = Some(c1);
        self.semiconcave_c2 = Some(c2);
        self.description = description.to_string();
        self
    }
}

fn eval_tree(tree: &Node<DefaultNumericTypes>, x: &[f64]) -> Result<f64> {
    let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
    for (name, &value) in ["x", "y"].iter().zip(x) {
        ctx.set_value((*name).into(), Value::Float(value))
            .map_err(|e| Error::Expression(e.to_string()))?;
    }
    tree.eval_number_with_context(&ctx)
        .map_err(|e| Error::Expression(e.to_string()))
}

/// The shipped objectives.
pub fn corpus() -> Vec<ObjectiveFunction> {
    let mut out = vec![
        ObjectiveFunction::from_fn("constant", 1, vec![(-1.0, 1.0)], |_| 3.0).with_meta(
            3.0,
            vec![vec![0.0]],
            0.0,
            0.0,
            "f = 3; every point is a minimizer",
        ),
        ObjectiveFunction::from_fn("quadratic", 1, vec![(-1.0, 1.0)], |x| 0.5 * x[0] * x[0])
            .with_meta(0.0, vec![vec![0.0]], 1.0, 1.0, "f = x^2/2, l = |x|"),
        ObjectiveFunction::from_fn("quadratic_2d", 2, vec![(-1.0, 1.0), (-1.0, 1.0)], |x| {
            0.5 * (x[0] * x[0] + x[1] * x[1])
        })
        .with_meta(
            0.0,
            vec![vec![0.0, 0.0]],
            2f64.sqrt(),
            1.0,
            "f = |x|^2/2, l = |x|",
        ),
        ObjectiveFunction::from_fn("double_well", 1, vec![(-2.0, 2.0)], |x| {
            (x[0] * x[0] - 1.0).powi(2)
        })
        .with_meta(
            0.0,
            vec![vec![-1.0], vec![1.0]],
            24.0,
            44.0,
            "f = (x^2 - 1)^2, minimizers at -1 and 1",
        ),
        ObjectiveFunction::from_fn("double_well_2d", 2, vec![(-1.5, 1.5), (-1.0, 1.0)], |x| {
            (x[0] * x[0] - 1.0).powi(2) + x[1] * x[1]
        })
        .with_meta(
            0.0,
            vec![vec![-1.0, 0.0], vec![1.0, 0.0]],
            7.77,
            23.0,
            "f = (x^2 - 1)^2 + y^2, minimizers at (-1, 0) and (1, 0)",
        ),
        ObjectiveFunction::from_fn("rastrigin_like", 1, vec![(-2.0, 2.0)], |x| {
            x[0] * x[0] + 1.0 - (2.0 * PI * x[0]).cos()
        })
        .with_meta(
            0.0,
            vec![vec![0.0]],
            8.8,
            2.0 + 4.0 * PI * PI,
            "f = x^2 + 1 - cos(2 pi x); local minima near every integer",
        ),
        ObjectiveFunction::from_fn("flat_bottom", 1, vec![(-1.5, 1.5)], |x| {
            (x[0].abs() - 0.5).max(0.0).powi(2)
        })
        .with_meta(
            0.0,
            vec![vec![-0.5], vec![0.0], vec![0.5]],
            2.0,
            2.0,
            "f = max(|x| - 1/2, 0)^2; the whole interval [-1/2, 1/2] minimizes",
        ),
        ObjectiveFunction::from_fn("power_well", 1, vec![(-1.0, 1.0)], |x| {
            0.5 * x[0].abs().powf(2.8)
        })
        .with_meta(
            0.0,
            vec![vec![0.0]],
            1.4,
            2.52,
            "f = |x|^2.8/2, l = |x|^1.4: flat bottom, steep walls",
        ),
        ObjectiveFunction::from_fn("quartic", 1, vec![(-1.0, 1.0)], |x| 0.5 * x[0].powi(4))
            .with_meta(0.0, vec![vec![0.0]], 2.0, 6.0, "f = x^4/2, l = x^2"),
        ObjectiveFunction::from_fn("counterexample_H", 1, vec![(-6.0, 6.0)], |x| {
            0.5 * x[0] * x[0] * (-2.0 * x[0] * x[0]).exp()
        })
        .with_meta(
            0.0,
            vec![vec![0.0]],
            0.21,
            1.0,
            "f = x^2 exp(-2x^2)/2, l = |x| exp(-x^2) vanishes at infinity",
        ),
    ];
    if let Some(cex) = out.iter_mut().find(|o| o.name == "counterexample_H") {
        cex.positive_away_from_argmin = false;
    }
    out
}

pub fn find_objective(name: &str) -> Result<ObjectiveFunction> {
    corpus()
        .into_iter()
        .find(|o| o.name == name)
        .ok_or_else(|| Error::UnknownObjective(name.to_string()))
}

/// Corpus entries whose name contains `filter`.
pub fn list_corpus(filter: Option<&str>) -> Vec<ObjectiveFunction> {
    corpus()
        .into_iter()
        .filter(|o| filter.is_none_or(|f| o.name.contains(f)))
        .collect()
}
