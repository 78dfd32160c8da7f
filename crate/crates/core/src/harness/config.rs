//! Experiment configuration: JSON with keys `problem`, `levels`, `alphas`,
//! `n_ref`, `tol`, overlaid on per-experiment defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::expr::{Axis, Expr, FieldExpr};
use crate::error::{Error, Result};
use crate::linsolve::estimate_constants;
use crate::mesh::{Mesh, Side};
use crate::pde::ProblemSpec;
use crate::space::FeSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    StateConv,
    ControlConv,
    AlphaSweep,
    Diagram,
    Constants,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::StateConv => "state_conv",
            Experiment::ControlConv => "control_conv",
            Experiment::AlphaSweep => "alpha_sweep",
            Experiment::Diagram => "diagram",
            Experiment::Constants => "constants",
        }
    }
}

fn two() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// Source term. Derived as `−Δ exact` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<FieldExpr>,
    pub z_d: FieldExpr,
    pub b: f64,
    /// Control cost weight. Defaults to 4× the contraction threshold on the
    /// coarsest mesh of the run.
    #[serde(rename = "M", alias = "m", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    /// Present for the Robin family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub gamma1_sides: Vec<Side>,
    /// Manufactured exact state; supplies `g` and the Gamma2 flux for
    /// `state-conv`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<Expr>,
    /// Regularity exponent; expected rates are `r − 1`.
    #[serde(default = "two")]
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Allowed shortfall of a fitted rate below `r − 1`.
    pub rate_slack: f64,
    /// Allowed shortfall of a cost-gap rate below `2(r − 1)`.
    pub cost_rate_slack: f64,
    /// RMS log-space residual above which a fit is unreliable.
    pub fit_residual: f64,
    /// Errors at or below this count as exactly zero.
    pub exact_zero: f64,
    /// Required final/initial ratio along the alpha ladder.
    pub alpha_ratio: f64,
    /// Penalty quantities must stay within this factor of their value at
    /// the first alpha above 1.
    pub penalty_factor: f64,
    /// Corner discrepancy factor over the single-limit tails.
    pub diagram_factor: f64,
    /// Fixed-point vs reduced control agreement in the Q norm.
    pub oracle: f64,
    /// Fixed-point stopping tolerance.
    pub solver: f64,
    pub max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rate_slack: 0.15,
            cost_rate_slack: 0.3,
            fit_residual: 0.1,
            exact_zero: 1e-12,
            alpha_ratio: 1e-2,
            penalty_factor: 10.0,
            diagram_factor: 5.0,
            oracle: 1e-7,
            solver: 1e-10,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub levels: Vec<usize>,
    pub alphas: Vec<f64>,
    pub n_ref: usize,
    /// Mesh used by `alpha-sweep`.
    #[serde(default = "default_alpha_level")]
    pub alpha_level: usize,
    #[serde(default)]
    pub tol: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_alpha_level() -> usize {
    16
}

/// `b + y² sin(πx)`: equals `b` on the bottom side with zero normal
/// derivative there.
pub fn manufactured_exact(b: f64) -> Expr {
    Expr::sum(vec![
        Expr::constant(b),
        Expr::product(vec![Expr::monomial(1.0, 0, 2), Expr::sin(Axis::X, 1.0)]),
    ])
}

pub fn default_source() -> Expr {
    Expr::scale(
        10.0,
        Expr::product(vec![Expr::sin(Axis::X, 1.0), Expr::sin(Axis::Y, 1.0)]),
    )
}

fn ladder() -> Vec<f64> {
    vec![1.0, 10.0, 100.0, 1000.0, 10000.0]
}

impl ExperimentConfig {
    pub fn default_for(exp: Experiment) -> Self {
        let control_problem = ProblemConfig {
            g: Some(default_source().into()),
            z_d: FieldExpr::Number(0.5),
            b: 1.0,
            m: None,
            alpha: None,
            gamma1_sides: vec![Side::Bottom],
            exact: None,
            r: 2.0,
        };
        let base = Self {
            problem: control_problem,
            levels: vec![4, 8, 16, 32],
            alphas: ladder(),
            n_ref: 128,
            alpha_level: default_alpha_level(),
            tol: Tolerances::default(),
            out: None,
        };
        match exp {
            Experiment::StateConv => Self {
                problem: ProblemConfig {
                    g: None,
                    exact: Some(manufactured_exact(1.0)),
                    ..base.problem.clone()
                },
                levels: vec![8, 16, 32, 64],
                ..base
            },
            Experiment::Constants => Self {
                levels: vec![2, 4, 8, 16],
                n_ref: 32,
                ..base
            },
            Experiment::ControlConv | Experiment::AlphaSweep | Experiment::Diagram => base,
        }
    }

    /// Parses `text` as a JSON overlay on the defaults for `exp`. The
    /// top level and the `problem` and `tol` sections merge key by key.
    pub fn from_json_overlay(exp: Experiment, text: &str) -> Result<Self> {
        let user: Value = serde_json::from_str(text)?;
        let Value::Object(user) = user else {
            return Err(Error::Config("config must be a JSON object".into()));
        };
        let mut merged = serde_json::to_value(Self::default_for(exp))?;
        let obj = merged.as_object_mut().expect("config serializes to an object");
        for (k, v) in user {
            match (k.as_str(), obj.get_mut(&k), v) {
                ("problem" | "tol", Some(Value::Object(base)), Value::Object(over)) => {
                    if k == "problem" && over.contains_key("exact") && !over.contains_key("g") {
                        base.remove("g");
                    }
                    for (kk, vv) in over {
                        base.insert(kk, vv);
                    }
                }
                (_, _, v) => {
                    obj.insert(k, v);
                }
            }
        }
        let cfg: Self = serde_json::from_value(merged)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(exp: Experiment, path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::from_json_overlay(exp, &std::fs::read_to_string(p)?),
            None => {
                let cfg = Self::default_for(exp);
                cfg.validate()?;
                Ok(cfg)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.levels.is_empty() {
            return bad("levels must be non-empty".into());
        }
        if self.levels[0] == 0 {
            return bad("levels must be positive".into());
        }
        for w in self.levels.windows(2) {
            if w[1] <= w[0] || w[1] % w[0] != 0 {
                return bad(format!("levels must increase with each dividing the next; got {} then {}", w[0], w[1]));
            }
        }
        let top = *self.levels.last().unwrap();
        if self.n_ref <= top || self.n_ref % top != 0 {
            return bad(format!("n_ref = {} must be a proper multiple of the finest level {}", self.n_ref, top));
        }
        if self.alphas.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return bad("alphas must be positive and finite".into());
        }
        for w in self.alphas.windows(2) {
            if w[1] <= w[0] {
                return bad("alphas must be strictly increasing".into());
            }
        }
        if self.alpha_level == 0 {
            return bad("alpha_level must be positive".into());
        }
        let p = &self.problem;
        if !p.b.is_finite() {
            return bad("b must be finite".into());
        }
        if let Some(m) = p.m {
            if !(m.is_finite() && m > 0.0) {
                return bad(format!("M must be positive, got {m}"));
            }
        }
        if let Some(a) = p.alpha {
            if !(a.is_finite() && a > 0.0) {
                return bad(format!("alpha must be positive, got {a}"));
            }
        }
        if !(p.r >= 1.0) {
            return bad(format!("r must be at least 1, got {}", p.r));
        }
        if p.g.is_none() && p.exact.is_none() {
            return bad("problem needs g or exact".into());
        }
        Mesh::structured(1, &p.gamma1_sides)?;
        if let Some(e) = &p.exact {
            for side in &p.gamma1_sides {
                for k in 0..=8 {
                    let s = k as f64 / 8.0;
                    let (x, y) = match side {
                        Side::Bottom => (s, 0.0),
                        Side::Top => (s, 1.0),
                        Side::Left => (0.0, s),
                        Side::Right => (1.0, s),
                    };
                    if (e.eval(x, y) - p.b).abs() > 1e-12 {
                        return bad(format!("exact solution differs from b on the {side:?} side at ({x}, {y})"));
                    }
                }
            }
        }
        let t = &self.tol;
        if !(t.solver > 0.0) || t.max_iter == 0 {
            return bad("tol.solver and tol.max_iter must be positive".into());
        }
        Ok(())
    }

    pub fn source(&self) -> Expr {
        match (&self.problem.g, &self.problem.exact) {
            (Some(g), _) => g.expr(),
            (None, Some(e)) => Expr::scale(-1.0, e.laplacian()),
            (None, None) => unreachable!("validated"),
        }
    }

    pub fn mesh(&self, n: usize) -> Result<std::sync::Arc<Mesh>> {
        Mesh::structured(n, &self.problem.gamma1_sides)
    }

    /// Configured `M`, or 4× the Dirichlet contraction threshold on mesh `n`.
    pub fn resolve_m(&self, n: usize) -> Result<f64> {
        match self.problem.m {
            Some(m) => Ok(m),
            None => {
                let c = estimate_constants(&FeSpace::new(self.mesh(n)?)?)?;
                Ok(4.0 * c.contraction_threshold())
            }
        }
    }

    /// Problem data for the family chosen by `problem.alpha`.
    pub fn spec(&self, m: f64) -> Result<ProblemSpec> {
        let spec = ProblemSpec::new(self.source().to_field(), self.problem.z_d.expr().to_field(), self.problem.b, m)?;
        match self.problem.alpha {
            Some(a) => spec.with_alpha(a),
            None => Ok(spec),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for e in [
            Experiment::StateConv,
            Experiment::ControlConv,
            Experiment::AlphaSweep,
            Experiment::Diagram,
            Experiment::Constants,
        ] {
            ExperimentConfig::default_for(e).validate().unwrap();
        }
    }

    #[test]
    fn overlay_merges_sections() {
        let c = ExperimentConfig::from_json_overlay(
            Experiment::ControlConv,
            r#"{"levels": [2, 4, 8], "n_ref": 16, "problem": {"M": 50}, "tol": {"oracle": 1e-6}}"#,
        )
        .unwrap();
        assert_eq!(c.levels, vec![2, 4, 8]);
        assert_eq!(c.problem.m, Some(50.0));
        assert_eq!(c.problem.b, 1.0);
        assert_eq!(c.tol.oracle, 1e-6);
        assert_eq!(c.tol.rate_slack, 0.15);
    }

    #[test]
    fn overlay_with_exact_drops_default_source() {
        let c = ExperimentConfig::from_json_overlay(
            Experiment::ControlConv,
            r#"{"problem": {"exact": {"kind": "const", "value": 1.0}}}"#,
        )
        .unwrap();
        assert!(c.problem.g.is_none());
        assert!(c.source().is_zero());
    }

    #[test]
    fn invalid_configs() {
        let cases = [
            r#"{"levels": [4, 6]}"#,
            r#"{"levels": [8, 4]}"#,
            r#"{"n_ref": 32}"#,
            r#"{"alphas": [10, 1]}"#,
            r#"{"problem": {"M": -1}}"#,
            r#"{"problem": {"gamma1_sides": []}}"#,
            r#"{"problem": {"exact": {"kind": "monomial", "px": 1}}}"#,
            r#"{"bogus": 1}"#,
            r#"[1, 2]"#,
        ];
        for c in cases {
            assert!(ExperimentConfig::from_json_overlay(Experiment::ControlConv, c).is_err(), "{c}");
        }
    }

    #[test]
    fn manufactured_source() {
        let c = ExperimentConfig::default_for(Experiment::StateConv);
        let g = c.source();
        let pi2 = std::f64::consts::PI.powi(2);
        for &(x, y) in &[(0.25, 0.5), (0.7, 0.3)] {
            let want = (pi2 * y * y - 2.0) * (std::f64::consts::PI * x).sin();
            assert!((g.eval(x, y) - want).abs() < 1e-12);
        }
    }
}
