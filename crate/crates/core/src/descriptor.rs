//! Serializable model descriptions and JSON spec files.
//!
//! A spec file looks like
//!
//! ```json
//! { "name": "double-well", "interval": ["-inf", "inf"],
//!   "model": { "builtin": "paper-example", "c": 0.5 },
//!   "degenerate_points": [0.0] }
//! ```
//!
//! Only `model` is required.

use serde::{Deserialize, Serialize};

use crate::model::{
    brownian, example_one, extended_real, make_paper_example, make_powerlaw_spec, ornstein_uhlenbeck, DiffusionSpec,
    GlueOptions, Interval, ModelError, PowerLawProfile,
};

fn half() -> f64 {
    0.5
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builtin", rename_all = "kebab-case")]
pub enum ModelDescriptor {
    PaperExample {
        c: f64,
    },
    OrnsteinUhlenbeck {
        #[serde(default = "half")]
        rate: f64,
        #[serde(default = "one")]
        sigma: f64,
    },
    Brownian {
        #[serde(default = "one")]
        sigma: f64,
    },
    ExampleOne {
        c: f64,
    },
    /// Pure power law on the line, or glued onto `outer` away from Δ.
    Powerlaw {
        profile: PowerLawProfile,
        #[serde(default)]
        glue: GlueOptions,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        outer: Option<Box<ModelDescriptor>>,
    },
}

impl ModelDescriptor {
    pub fn build(&self) -> Result<DiffusionSpec, ModelError> {
        match self {
            Self::PaperExample { c } => make_paper_example(*c),
            Self::OrnsteinUhlenbeck { rate, sigma } => ornstein_uhlenbeck(*rate, *sigma),
            Self::Brownian { sigma } => brownian(*sigma),
            Self::ExampleOne { c } => example_one(*c),
            Self::Powerlaw { profile, glue, outer } => {
                profile.validate()?;
                match outer {
                    None => Ok(profile.local_spec()),
                    Some(o) => make_powerlaw_spec(*profile, &o.build()?, *glue),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalPair(#[serde(with = "extended_real")] pub f64, #[serde(with = "extended_real")] pub f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<IntervalPair>,
    pub model: ModelDescriptor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degenerate_points: Option<Vec<f64>>,
}

impl From<ModelDescriptor> for SpecFile {
    fn from(model: ModelDescriptor) -> Self {
        Self { name: None, interval: None, model, degenerate_points: None }
    }
}

impl SpecFile {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::InvalidSpec(e.to_string()))
    }

    /// Builds the model, then applies the overrides. Without explicit
    /// degenerate points, the built-in ones inside the new interval are kept.
    pub fn build(&self) -> Result<DiffusionSpec, ModelError> {
        let mut spec = self.model.build()?;
        if let Some(IntervalPair(l, r)) = self.interval {
            let iv = Interval::new(l, r)?;
            let kept = spec.degenerate_points.iter().copied().filter(|&d| iv.contains(d)).collect();
            spec = spec.with_degenerate_points(kept)?.with_interval(iv)?;
        }
        if let Some(points) = &self.degenerate_points {
            spec = spec.with_degenerate_points(points.clone())?;
        }
        if let Some(name) = &self.name {
            spec.name = name.clone();
        }
        Ok(spec)
    }
}
