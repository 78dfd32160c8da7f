//! Built-in scalar field expressions for experiment configs, with symbolic
//! partial derivatives for manufactured solutions.
//!
//! Trigonometric frequencies are multiples of π: `{"kind": "sin", "axis":
//! "x", "freq": 2}` is `sin(2πx)`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::pde::Field;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expr {
    Const {
        value: f64,
    },
    /// `coef · x^px · y^py`
    Monomial {
        #[serde(default = "one")]
        coef: f64,
        #[serde(default)]
        px: u32,
        #[serde(default)]
        py: u32,
    },
    Sin {
        axis: Axis,
        freq: f64,
    },
    Cos {
        axis: Axis,
        freq: f64,
    },
    Sum {
        terms: Vec<Expr>,
    },
    Product {
        factors: Vec<Expr>,
    },
    Scale {
        factor: f64,
        expr: Box<Expr>,
    },
}

impl Expr {
    pub fn constant(value: f64) -> Self {
        Expr::Const { value }
    }

    pub fn monomial(coef: f64, px: u32, py: u32) -> Self {
        Expr::Monomial { coef, px, py }
    }

    pub fn sin(axis: Axis, freq: f64) -> Self {
        Expr::Sin { axis, freq }
    }

    pub fn cos(axis: Axis, freq: f64) -> Self {
        Expr::Cos { axis, freq }
    }

    pub fn sum(terms: Vec<Expr>) -> Self {
        Expr::Sum { terms }
    }

    pub fn product(factors: Vec<Expr>) -> Self {
        Expr::Product { factors }
    }

    pub fn scale(factor: f64, expr: Expr) -> Self {
        Expr::Scale {
            factor,
            expr: Box::new(expr),
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let pick = |a: Axis| match a {
            Axis::X => x,
            Axis::Y => y,
        };
        match self {
            Expr::Const { value } => *value,
            Expr::Monomial { coef, px, py } => coef * x.powi(*px as i32) * y.powi(*py as i32),
            Expr::Sin { axis, freq } => (freq * PI * pick(*axis)).sin(),
            Expr::Cos { axis, freq } => (freq * PI * pick(*axis)).cos(),
            Expr::Sum { terms } => terms.iter().map(|t| t.eval(x, y)).sum(),
            Expr::Product { factors } => factors.iter().map(|f| f.eval(x, y)).product(),
            Expr::Scale { factor, expr } => factor * expr.eval(x, y),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Expr::Const { value } => *value == 0.0,
            Expr::Monomial { coef, .. } => *coef == 0.0,
            Expr::Sum { terms } => terms.iter().all(Expr::is_zero),
            Expr::Product { factors } => factors.iter().any(Expr::is_zero),
            Expr::Scale { factor, expr } => *factor == 0.0 || expr.is_zero(),
            Expr::Sin { freq, .. } => *freq == 0.0,
            Expr::Cos { .. } => false,
        }
    }

    pub fn derivative(&self, wrt: Axis) -> Expr {
        let zero = Expr::constant(0.0);
        let d = match self {
            Expr::Const { .. } => zero,
            Expr::Monomial { coef, px, py } => match wrt {
                Axis::X if *px > 0 => Expr::monomial(coef * *px as f64, px - 1, *py),
                Axis::Y if *py > 0 => Expr::monomial(coef * *py as f64, *px, py - 1),
                _ => zero,
            },
            Expr::Sin { axis, freq } if *axis == wrt => Expr::scale(freq * PI, Expr::cos(*axis, *freq)),
            Expr::Cos { axis, freq } if *axis == wrt => Expr::scale(-freq * PI, Expr::sin(*axis, *freq)),
            Expr::Sin { .. } | Expr::Cos { .. } => zero,
            Expr::Sum { terms } => Expr::sum(terms.iter().map(|t| t.derivative(wrt)).collect()),
            Expr::Product { factors } => {
                let mut terms = Vec::new();
                for i in 0..factors.len() {
                    let di = factors[i].derivative(wrt);
                    if di.is_zero() {
                        continue;
                    }
                    let mut f = factors.clone();
                    f[i] = di;
                    terms.push(Expr::product(f));
                }
                Expr::sum(terms)
            }
            Expr::Scale { factor, expr } => Expr::scale(*factor, expr.derivative(wrt)),
        };
        if d.is_zero() {
            Expr::constant(0.0)
        } else {
            d
        }
    }

    pub fn laplacian(&self) -> Expr {
        let dxx = self.derivative(Axis::X).derivative(Axis::X);
        let dyy = self.derivative(Axis::Y).derivative(Axis::Y);
        Expr::sum(vec![dxx, dyy])
    }

    pub fn to_field(&self) -> Field {
        let e = self.clone();
        Arc::new(move |x, y| e.eval(x, y))
    }
}

/// A config field: a bare number is a constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldExpr {
    Number(f64),
    Expr(Expr),
}

impl FieldExpr {
    pub fn expr(&self) -> Expr {
        match self {
            FieldExpr::Number(v) => Expr::constant(*v),
            FieldExpr::Expr(e) => e.clone(),
        }
    }
}

impl From<Expr> for FieldExpr {
    fn from(e: Expr) -> Self {
        FieldExpr::Expr(e)
    }
}
