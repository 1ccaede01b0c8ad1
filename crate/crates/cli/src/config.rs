//! JSON problem files.
//!
//! ```json
//! { "epsilon_r": 1.0,
//!   "sources": [{"type": "point", "x": 0.2, "y": 0.3, "q": 1.0},
//!               {"type": "density", "name": "analytic41"}],
//!   "neumann": "zero",
//!   "reference": {"x": 0.0, "y": 0.0, "value": 0.0} }
//! ```

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use treepoisson::{oracle, Neumann, ProblemSpec, Reference, Source};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default = "one")]
    pub epsilon_r: f64,
    #[serde(default = "one")]
    pub epsilon_0: f64,
    #[serde(default)]
    pub sources: Vec<SourceEntry>,
    #[serde(default = "zero_name")]
    pub neumann: String,
    pub reference: ReferenceEntry,
    /// Relative tolerance on the total charge imbalance.
    pub compatibility_tol: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum SourceEntry {
    Point { x: f64, y: f64, q: f64 },
    Density { name: String },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceEntry {
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

fn one() -> f64 {
    1.0
}

fn zero_name() -> String {
    "zero".into()
}

/// Built-in charge densities, by name.
pub fn named_density(name: &str) -> Result<Source> {
    match name {
        "analytic41" => Ok(oracle::analytic_case().spec.sources[0].clone()),
        "zero" => Ok(Source::Density(Arc::new(|_, _| 0.0))),
        other => bail!("unknown density '{other}' (known: analytic41, zero)"),
    }
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn to_spec(&self) -> Result<ProblemSpec> {
        let sources = self
            .sources
            .iter()
            .map(|s| match s {
                SourceEntry::Point { x, y, q } => Ok(Source::Point { x: *x, y: *y, q: *q }),
                SourceEntry::Density { name } => named_density(name),
            })
            .collect::<Result<_>>()?;
        let neumann = match self.neumann.as_str() {
            "zero" => Neumann::Zero,
            other => bail!("unsupported neumann data '{other}' (only \"zero\")"),
        };
        let spec = ProblemSpec {
            epsilon_r: self.epsilon_r,
            epsilon_0: self.epsilon_0,
            sources,
            neumann,
            reference: Reference { point: [self.reference.x, self.reference.y], value: self.reference.value },
        };
        spec.validate()?;
        Ok(spec)
    }
}
