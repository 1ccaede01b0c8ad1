//! Problem description: permittivity, sources, Neumann data and reference potential.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::Point;

pub type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Source {
    /// Charge density `ρ(x, y)`.
    Density(ScalarFn),
    /// Line charge `q` (per unit length) through `(x, y)`.
    Point { x: f64, y: f64, q: f64 },
}

impl fmt::Debug for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Density(_) => f.write_str("Density(..)"),
            Source::Point { x, y, q } => write!(f, "Point {{ x: {x}, y: {y}, q: {q} }}"),
        }
    }
}

/// Neumann data `g = ∂φ/∂n` on the boundary.
#[derive(Clone, Default)]
pub enum Neumann {
    #[default]
    Zero,
    Function(ScalarFn),
}

impl Neumann {
    pub fn value(&self, p: Point) -> f64 {
        match self {
            Neumann::Zero => 0.0,
            Neumann::Function(g) => g(p[0], p[1]),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Neumann::Zero)
    }
}

impl fmt::Debug for Neumann {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Neumann::Zero => f.write_str("Zero"),
            Neumann::Function(_) => f.write_str("Function(..)"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reference {
    pub point: Point,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub epsilon_r: f64,
    /// Vacuum permittivity. Defaults to 1 (normalised units).
    pub epsilon_0: f64,
    pub sources: Vec<Source>,
    pub neumann: Neumann,
    pub reference: Reference,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            epsilon_r: 1.0,
            epsilon_0: 1.0,
            sources: Vec::new(),
            neumann: Neumann::Zero,
            reference: Reference {
                point: [0.0, 0.0],
                value: 0.0,
            },
        }
    }
}

impl ProblemSpec {
    pub fn permittivity(&self) -> f64 {
        self.epsilon_r * self.epsilon_0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_r > 0.0 && self.epsilon_r.is_finite()) {
            return Err(Error::Argument(format!("epsilon_r must be positive, got {}", self.epsilon_r)));
        }
        if !(self.epsilon_0 > 0.0 && self.epsilon_0.is_finite()) {
            return Err(Error::Argument(format!("epsilon_0 must be positive, got {}", self.epsilon_0)));
        }
        Ok(())
    }

    /// Same problem with every point charge negated.
    pub fn with_point_charges_negated(&self) -> Self {
        let mut out = self.clone();
        for s in &mut out.sources {
            if let Source::Point { q, .. } = s {
                *q = -*q;
            }
        }
        out
    }
}
