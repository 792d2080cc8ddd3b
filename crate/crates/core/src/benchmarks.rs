//! Built-in benchmark simulators with closed-form first-order indices.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Group, InputSpec, StochasticModel};
use crate::rng::NoiseStream;

/// `f(X, Z) = 1 + X_1 + 2 X_2 + σ Z` with `X_1, X_2, Z` i.i.d. standard normal.
#[derive(Debug, Clone)]
pub struct LinearModel {
    sigma: f64,
    inputs: InputSpec,
}

impl LinearModel {
    /// `σ = 0` gives a deterministic fixture.
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!(
                "sigma must be a non-negative number, got {sigma}"
            )));
        }
        Ok(LinearModel {
            sigma,
            inputs: InputSpec::standard_normal(2)?,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl StochasticModel for LinearModel {
    fn name(&self) -> String {
        format!("linear(sigma={})", self.sigma)
    }

    fn inputs(&self) -> &InputSpec {
        &self.inputs
    }

    fn evaluate(&self, x: &[f64], noise: &mut NoiseStream) -> Result<f64> {
        let z = noise.standard_normal();
        Ok(1.0 + x[0] + 2.0 * x[1] + self.sigma * z)
    }
}

/// Stochastic Ishigami function
/// `f(X, Z) = sin X_1 + a sin² X_2 + b X_3⁴ sin(X_1) Z²`,
/// `X_j ~ U[-π, π]`, `Z ~ N(0, 1)`.
#[derive(Debug, Clone)]
pub struct IshigamiModel {
    a: f64,
    b: f64,
    inputs: InputSpec,
}

impl IshigamiModel {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::invalid(format!(
                "ishigami parameters must be positive, got a={a}, b={b}"
            )));
        }
        Ok(IshigamiModel {
            a,
            b,
            inputs: InputSpec::uniform(3, -PI, PI)?,
        })
    }

    /// Deterministic part given a draw of `Z²`.
    pub fn response(&self, x: &[f64], z_squared: f64) -> f64 {
        let s1 = x[0].sin();
        let s2 = x[1].sin();
        s1 + self.a * s2 * s2 + self.b * x[2].powi(4) * s1 * z_squared
    }
}

impl StochasticModel for IshigamiModel {
    fn name(&self) -> String {
        format!("ishigami(a={},b={})", self.a, self.b)
    }

    fn inputs(&self) -> &InputSpec {
        &self.inputs
    }

    fn evaluate(&self, x: &[f64], noise: &mut NoiseStream) -> Result<f64> {
        let z = noise.standard_normal();
        Ok(self.response(x, z * z))
    }
}

/// Selector for the built-in models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Builtin {
    Linear { sigma: f64 },
    Ishigami { a: f64, b: f64 },
}

impl Builtin {
    pub fn build(&self) -> Result<Box<dyn StochasticModel>> {
        Ok(match *self {
            Builtin::Linear { sigma } => Box::new(LinearModel::new(sigma)?),
            Builtin::Ishigami { a, b } => Box::new(IshigamiModel::new(a, b)?),
        })
    }

    pub fn dimension(&self) -> usize {
        match self {
            Builtin::Linear { .. } => 2,
            Builtin::Ishigami { .. } => 3,
        }
    }

    /// Exact first-order index of `group` for the conditional-mean QoI, or
    /// `None` when no closed form is wired in.
    pub fn analytic_first_order(&self, group: &Group) -> Option<f64> {
        let coords = group.coords();
        if coords.len() == self.dimension() {
            return Some(1.0);
        }
        match (*self, coords) {
            // Var Q = 1 + 4
            (Builtin::Linear { .. }, [1]) => Some(0.2),
            (Builtin::Linear { .. }, [2]) => Some(0.8),
            (Builtin::Ishigami { a, b }, [c]) => {
                let bp4 = b * PI.powi(4);
                let total = a * a / 8.0 + bp4 / 5.0 + b * b * PI.powi(8) / 18.0 + 0.5;
                match c {
                    1 => Some(0.5 * (1.0 + bp4 / 5.0).powi(2) / total),
                    2 => Some(a * a / 8.0 / total),
                    3 => Some(0.0),
                    _ => None,
                }
            }
            _ => None,
        }
    }
}
